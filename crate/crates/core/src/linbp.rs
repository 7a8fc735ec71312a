//! Linearized belief propagation: the fixed point of `P = Q + W P H`, found by
//! repeated propagation from `P⁽⁰⁾ = Q`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{fmt_f64, CouplingMatrix};
use crate::error::{Error, Result};
use crate::graph::{spmm_propagate, EdgeWeights, SparseGraph};
use crate::matrix::Dense;
use crate::priors::PriorMatrix;

/// Centered approximate marginals with the number of propagation steps that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefMatrix {
    pub p: Dense,
    pub iteration: usize,
}

impl BeliefMatrix {
    /// `P⁽⁰⁾ = Q`.
    pub fn from_priors(q: &PriorMatrix) -> Self {
        BeliefMatrix {
            p: q.centered().clone(),
            iteration: 0,
        }
    }

    /// Per-node argmax; see [`predict`].
    pub fn predict(&self) -> Vec<usize> {
        predict(&self.p)
    }

    /// CSV rows `node,score_0,...,score_{C-1},predicted_class` at 17 significant
    /// digits, with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("node");
        for c in 0..self.p.cols() {
            let _ = write!(s, ",score_{c}");
        }
        s.push_str(",predicted_class\n");
        for (v, (row, y)) in self.p.row_iter().zip(self.predict()).enumerate() {
            let _ = write!(s, "{v}");
            for &x in row {
                let _ = write!(s, ",{}", fmt_f64(x));
            }
            let _ = writeln!(s, ",{y}");
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Class with the largest score in each row; ties go to the lowest class index.
pub fn predict(p: &Dense) -> Vec<usize> {
    p.row_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// One propagation step `Q + W P H`.
pub fn propagate_step(
    q: &PriorMatrix,
    g: &SparseGraph,
    w: &EdgeWeights,
    p: &BeliefMatrix,
    h: &CouplingMatrix,
) -> Result<BeliefMatrix> {
    if q.centered().rows() != p.p.rows() || q.centered().cols() != p.p.cols() {
        return Err(Error::Dimension(format!(
            "priors are {}x{}, beliefs are {}x{}",
            q.centered().rows(),
            q.centered().cols(),
            p.p.rows(),
            p.p.cols()
        )));
    }
    let mut next = spmm_propagate(g, w, &p.p, h.centered())?;
    for (o, &qv) in next.as_mut_slice().iter_mut().zip(q.centered().as_slice()) {
        *o += qv;
    }
    Ok(BeliefMatrix {
        p: next,
        iteration: p.iteration + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Stop once the max-norm change of `P` falls to `tol`, or after `max_iter` steps.
    Tolerance { tol: f64, max_iter: usize },
    /// Exactly this many steps.
    Fixed(usize),
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Tolerance {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Iteration counts searched for the baseline.
pub const BASELINE_ITER_GRID: [usize; 4] = [5, 10, 15, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinbpSolution {
    pub beliefs: BeliefMatrix,
    /// For [`StopRule::Fixed`], always `true`.
    pub converged: bool,
    /// Max-norm change of `P` at each step.
    pub step_sizes: Vec<f64>,
}

/// Runs propagation from `P⁽⁰⁾ = Q`. Non-convergence is reported in the
/// returned flag; a non-finite iterate stops early with `converged = false`.
pub fn solve_linbp(
    q: &PriorMatrix,
    g: &SparseGraph,
    w: &EdgeWeights,
    h: &CouplingMatrix,
    stop: StopRule,
) -> Result<LinbpSolution> {
    let (tol, max_iter) = match stop {
        StopRule::Tolerance { tol, max_iter } => (Some(tol), max_iter),
        StopRule::Fixed(k) => (None, k),
    };
    let mut beliefs = BeliefMatrix::from_priors(q);
    let mut step_sizes = Vec::new();
    let mut converged = tol.is_none();
    for _ in 0..max_iter {
        let next = propagate_step(q, g, w, &beliefs, h)?;
        let delta = next.p.max_abs_diff(&beliefs.p);
        step_sizes.push(delta);
        beliefs = next;
        if !delta.is_finite() {
            converged = false;
            break;
        }
        if let Some(tol) = tol {
            if delta <= tol {
                converged = true;
                break;
            }
        }
    }
    Ok(LinbpSolution {
        beliefs,
        converged,
        step_sizes,
    })
}

/// `‖P - Q - W P H‖_∞`.
pub fn residual(
    q: &PriorMatrix,
    g: &SparseGraph,
    w: &EdgeWeights,
    h: &CouplingMatrix,
    p: &Dense,
) -> Result<f64> {
    let wph = spmm_propagate(g, w, p, h.centered())?;
    Ok(p.as_slice()
        .iter()
        .zip(q.centered().as_slice())
        .zip(wph.as_slice())
        .map(|((pv, qv), tv)| (pv - qv - tv).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> (PriorMatrix, SparseGraph, EdgeWeights, CouplingMatrix) {
        let q = PriorMatrix::from_centered(Dense::from_rows(&[vec![0.3, -0.3], vec![0.3, -0.3]]))
            .unwrap();
        let g = SparseGraph::build(&[(0, 1)], 2).unwrap();
        (
            q,
            g,
            EdgeWeights(vec![1.0]),
            CouplingMatrix::homophilous(2).unwrap(),
        )
    }

    #[test]
    fn single_step_worked_instance() {
        let (q, g, w, h) = worked();
        let p1 = propagate_step(&q, &g, &w, &BeliefMatrix::from_priors(&q), &h).unwrap();
        assert_eq!(p1.iteration, 1);
        for r in p1.p.row_iter() {
            assert!((r[0] - 0.54).abs() < 1e-15);
            assert!((r[1] + 0.54).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weights_or_beliefs_return_priors() {
        let (q, g, _, h) = worked();
        let p = BeliefMatrix::from_priors(&q);
        let out = propagate_step(&q, &g, &EdgeWeights(vec![0.0]), &p, &h).unwrap();
        assert_eq!(&out.p, q.centered());
        let zero = BeliefMatrix {
            p: Dense::zeros(2, 2),
            iteration: 0,
        };
        let out = propagate_step(&q, &g, &EdgeWeights(vec![1.0]), &zero, &h).unwrap();
        assert_eq!(&out.p, q.centered());
    }

    #[test]
    fn fixed_point_worked_instance() {
        let (q, g, w, h) = worked();
        let sol = solve_linbp(&q, &g, &w, &h, StopRule::default()).unwrap();
        assert!(sol.converged);
        for r in sol.beliefs.p.row_iter() {
            assert!((r[0] - 1.5).abs() < 1e-7);
            assert!((r[1] + 1.5).abs() < 1e-7);
        }
        assert!(residual(&q, &g, &w, &h, &sol.beliefs.p).unwrap() <= 1e-7);
    }

    #[test]
    fn zero_coupling_converges_immediately() {
        let (q, g, w, _) = worked();
        let zero = CouplingMatrix::new(Dense::zeros(2, 2)).unwrap();
        let sol = solve_linbp(&q, &g, &w, &zero, StopRule::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.step_sizes, vec![0.0]);
        assert_eq!(&sol.beliefs.p, q.centered());
    }

    #[test]
    fn edgeless_graph_keeps_priors() {
        let q = PriorMatrix::from_centered(Dense::from_rows(&[
            vec![0.2, -0.2],
            vec![-0.1, 0.1],
            vec![0.0, 0.0],
        ]))
        .unwrap();
        let g = SparseGraph::empty(3);
        let h = CouplingMatrix::homophilous(2).unwrap().scaled(5.0);
        let sol = solve_linbp(&q, &g, &EdgeWeights(vec![]), &h, StopRule::default()).unwrap();
        assert_eq!(&sol.beliefs.p, q.centered());
    }

    #[test]
    fn fixed_rule_counts_steps() {
        let (q, g, w, h) = worked();
        let sol = solve_linbp(&q, &g, &w, &h, StopRule::Fixed(10)).unwrap();
        assert_eq!(sol.beliefs.iteration, 10);
        assert_eq!(sol.step_sizes.len(), 10);
    }

    #[test]
    fn divergent_instance_is_flagged() {
        let (q, g, w, h) = worked();
        let sol = solve_linbp(&q, &g, &w, &h.scaled(2.0), StopRule::default()).unwrap();
        assert!(!sol.converged);
    }

    #[test]
    fn argmax_tie_rule() {
        let p = Dense::from_rows(&[
            vec![1.5, -1.5, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![-0.1, 0.2, 0.05],
        ]);
        assert_eq!(predict(&p), vec![0, 0, 1]);
    }

    #[test]
    fn belief_csv() {
        let dir = tempfile::tempdir().unwrap();
        let b = BeliefMatrix {
            p: Dense::from_rows(&[vec![0.25, -0.25], vec![-1.0, 1.0]]),
            iteration: 3,
        };
        let path = dir.path().join("beliefs.csv");
        b.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "node,score_0,score_1,predicted_class");
        assert_eq!(lines[1], "0,2.5000000000000000e-1,-2.5000000000000000e-1,0");
        assert!(lines[2].ends_with(",1"));
    }
}
