//! The shared coupling matrix `H` and spectral diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{adjacency_apply, EdgeWeights, SparseGraph};
use crate::matrix::Dense;

/// Diagonal of the uncentered initial coupling.
pub const INIT_DIAGONAL: f64 = 0.9;

/// Centered `C×C` coupling matrix, kept exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    h: Dense,
}

impl CouplingMatrix {
    /// Wraps a centered matrix. Fails unless square, finite, and exactly symmetric.
    pub fn new(h: Dense) -> Result<Self> {
        if h.rows() != h.cols() {
            return Err(Error::Dimension(format!(
                "coupling must be square, got {}x{}",
                h.rows(),
                h.cols()
            )));
        }
        if !h.is_finite() {
            return Err(Error::Input("coupling has non-finite entries".into()));
        }
        for i in 0..h.rows() {
            for j in 0..i {
                if h[(i, j)] != h[(j, i)] {
                    return Err(Error::Input(format!(
                        "coupling not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CouplingMatrix { h })
    }

    /// Wraps `(h + hᵀ) / 2`.
    pub fn symmetrized(h: Dense) -> Result<Self> {
        if h.rows() != h.cols() {
            return Err(Error::Dimension("coupling must be square".into()));
        }
        let mut s = h;
        symmetrize_in_place(&mut s);
        CouplingMatrix::new(s)
    }

    /// Homophilous default: `H̃_ii = 0.9`, `H̃_ij = 0.1 / (C - 1)`, centered by `1/C`.
    pub fn homophilous(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Input(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        let c = classes as f64;
        let off = (1.0 - INIT_DIAGONAL) / (c - 1.0);
        Ok(CouplingMatrix {
            h: Dense::from_fn(classes, classes, |i, j| {
                if i == j {
                    INIT_DIAGONAL - 1.0 / c
                } else {
                    off - 1.0 / c
                }
            }),
        })
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.h.rows()
    }

    #[inline]
    pub fn centered(&self) -> &Dense {
        &self.h
    }

    /// `H̃ = H + 1/C`.
    pub fn uncentered(&self) -> Dense {
        let shift = 1.0 / self.classes() as f64;
        Dense::from_fn(self.classes(), self.classes(), |i, j| {
            self.h[(i, j)] + shift
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        CouplingMatrix { h: self.h.scale(s) }
    }

    /// `min_i H_ii > max_{i≠j} H_ij`.
    pub fn is_diagonally_dominant(&self) -> bool {
        let c = self.classes();
        let min_diag = (0..c).map(|i| self.h[(i, i)]).fold(f64::INFINITY, f64::min);
        let max_off = (0..c)
            .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.h[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        min_diag > max_off
    }

    /// Entries of `w · H` clipped so that the per-edge uncentered potential stays
    /// in `[0, 1]`, i.e. `w·H_ij ∈ [-1/C, 1 - 1/C]`.
    pub fn clip_bounds(&self) -> (f64, f64) {
        let c = self.classes() as f64;
        (-1.0 / c, 1.0 - 1.0 / c)
    }

    /// Writes the centered and uncentered matrices as two CSV files
    /// (`coupling_centered.csv`, `coupling_uncentered.csv`), row-major, 17
    /// significant digits.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, m) in [
            ("coupling_centered.csv", self.h.clone()),
            ("coupling_uncentered.csv", self.uncentered()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, matrix_csv(&m)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads a centered coupling written by [`CouplingMatrix::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(path, i + 1, format!("bad value: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(Error::parse(path, 1, "coupling CSV is not square"));
        }
        CouplingMatrix::new(Dense::from_rows(&rows))
    }
}

pub(crate) fn symmetrize_in_place(h: &mut Dense) {
    let c = h.rows();
    for i in 0..c {
        for j in 0..i {
            let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = avg;
            h[(j, i)] = avg;
        }
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn matrix_csv(m: &Dense) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<_> = row.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// Result of a power-iteration estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOL: f64 = 1e-9;
pub const POWER_MAX_ITER: usize = 1000;

/// Largest absolute eigenvalue of a symmetric operator of dimension `dim`,
/// given as a matrix-free multiply `apply(x, y)` writing `y = M x`.
///
/// Iterates `x ← M x / ‖M x‖` and tracks `‖M x‖`, which converges to `ρ(M)`
/// for symmetric `M` even when `±ρ` are both eigenvalues. Stops once both the
/// last change and the extrapolated remaining change are within `tol` relative. Starts from the
/// normalized all-ones vector; if that lands in the null space (centered
/// couplings have zero row sums) a fixed irregular start is used instead.
pub fn spectral_radius<F>(dim: usize, mut apply: F, tol: f64, max_iter: usize) -> SpectralEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let ones = vec![1.0; dim];
    let est = run_power(dim, &mut apply, ones, tol, max_iter);
    if est.value > 1e-12 {
        return est;
    }
    // Golden-ratio sequence: deterministic and not aligned with any
    // structured eigenvector.
    let irregular: Vec<f64> = (0..dim)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let fallback = run_power(dim, &mut apply, irregular, tol, max_iter);
    SpectralEstimate {
        iterations: est.iterations + fallback.iterations,
        ..fallback
    }
}

fn run_power<F>(
    dim: usize,
    apply: &mut F,
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> SpectralEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n0 = norm(&x);
    x.iter_mut().for_each(|a| *a /= n0);
    let mut y = vec![0.0; dim];
    let mut prev = f64::NAN;
    let mut prev_delta = f64::NAN;
    for it in 1..=max_iter {
        apply(&x, &mut y);
        let value = norm(&y);
        if value == 0.0 || !value.is_finite() {
            return SpectralEstimate {
                value: if value == 0.0 { 0.0 } else { value },
                iterations: it,
                converged: value == 0.0,
            };
        }
        // The estimate rises monotonically for symmetric M, so the ratio of
        // successive changes gives the remaining error of a geometric tail.
        let delta = (value - prev).abs();
        let rate = delta / prev_delta;
        let tail = if rate < 1.0 {
            delta * rate / (1.0 - rate)
        } else {
            f64::INFINITY
        };
        if delta == 0.0 || (delta <= tol * value && tail <= tol * value) {
            return SpectralEstimate {
                value,
                iterations: it,
                converged: true,
            };
        }
        prev = value;
        prev_delta = delta;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / value;
        }
    }
    SpectralEstimate {
        value: prev,
        iterations: max_iter,
        converged: false,
    }
}

/// Spectral radius of a dense square matrix.
pub fn dense_spectral_radius(m: &Dense, tol: f64, max_iter: usize) -> SpectralEstimate {
    assert_eq!(m.rows(), m.cols(), "square matrix required");
    spectral_radius(
        m.rows(),
        |x, y| {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = m.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
            }
        },
        tol,
        max_iter,
    )
}

/// Spectral radius of the weighted adjacency matrix.
pub fn graph_spectral_radius(g: &SparseGraph, w: &EdgeWeights) -> SpectralEstimate {
    spectral_radius(
        g.node_count(),
        |x, y| adjacency_apply(g, w, x, y),
        POWER_TOL,
        POWER_MAX_ITER,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCheck {
    pub rho_w: SpectralEstimate,
    pub rho_h: SpectralEstimate,
    /// `ρ(H)·ρ(W) < 1`.
    pub satisfied: bool,
}

impl ConvergenceCheck {
    pub fn product(&self) -> f64 {
        self.rho_w.value * self.rho_h.value
    }

    /// Both estimates converged.
    pub fn reliable(&self) -> bool {
        self.rho_w.converged && self.rho_h.converged
    }
}

/// Checks the sufficient condition for power-iteration LinBP to converge.
/// Diagnostic only; never an error.
pub fn check_convergence(g: &SparseGraph, w: &EdgeWeights, h: &CouplingMatrix) -> ConvergenceCheck {
    let rho_w = graph_spectral_radius(g, w);
    let rho_h = dense_spectral_radius(h.centered(), POWER_TOL, POWER_MAX_ITER);
    ConvergenceCheck {
        rho_w,
        rho_h,
        satisfied: rho_w.value * rho_h.value < 1.0,
    }
}
