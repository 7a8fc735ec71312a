//! Brute-force references for verification: exact pairwise-MRF marginals by
//! enumeration, a dense solve of the LinBP linear system, and central finite
//! differences.
//!
//! Nothing here touches the sparse kernels in [`crate::graph`]; every quantity
//! is rebuilt from dense arrays.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Dense;

pub const MAX_NODES: usize = 10;
pub const MAX_CLASSES: usize = 3;
pub const MAX_DENSE_UNKNOWNS: usize = 200;

/// A tiny pairwise MRF with explicit potentials.
#[derive(Debug, Clone)]
pub struct TinyPmrf {
    /// `n×C` node potentials `φ_v(r)`.
    pub node_potentials: Dense,
    /// `(u, v, ψ_uv)` with `ψ_uv[(r_u, r_v)]`.
    pub edges: Vec<(usize, usize, Dense)>,
}

impl TinyPmrf {
    pub fn new(node_potentials: Dense, edges: Vec<(usize, usize, Dense)>) -> Result<Self> {
        let n = node_potentials.rows();
        let c = node_potentials.cols();
        if n > MAX_NODES || c > MAX_CLASSES || c == 0 {
            return Err(Error::Input(format!(
                "enumeration limited to n ≤ {MAX_NODES}, 1 ≤ C ≤ {MAX_CLASSES}; got n={n}, C={c}"
            )));
        }
        if node_potentials
            .as_slice()
            .iter()
            .any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return Err(Error::Input(
                "node potentials must be strictly positive".into(),
            ));
        }
        for (u, v, psi) in &edges {
            if *u >= n || *v >= n || u == v {
                return Err(Error::Input(format!("bad edge ({u}, {v})")));
            }
            if psi.rows() != c || psi.cols() != c {
                return Err(Error::Dimension(format!(
                    "edge ({u}, {v}) potential is not {c}x{c}"
                )));
            }
            if psi.as_slice().iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Input(format!(
                    "edge ({u}, {v}) potential must be strictly positive"
                )));
            }
        }
        Ok(TinyPmrf {
            node_potentials,
            edges,
        })
    }

    /// Rebuilds uncentered potentials from centered LinBP quantities:
    /// `φ_v = q_v + 1/C`, `ψ_uv = W_uv·H + 1/C`.
    pub fn from_centered(q: &Dense, edges: &[(usize, usize, f64)], h: &Dense) -> Result<Self> {
        let c = q.cols();
        let shift = 1.0 / c as f64;
        let phi = Dense::from_fn(q.rows(), c, |v, i| q[(v, i)] + shift);
        let psi = edges
            .iter()
            .map(|&(u, v, w)| (u, v, Dense::from_fn(c, c, |i, j| w * h[(i, j)] + shift)))
            .collect();
        TinyPmrf::new(phi, psi)
    }

    pub fn node_count(&self) -> usize {
        self.node_potentials.rows()
    }

    pub fn classes(&self) -> usize {
        self.node_potentials.cols()
    }
}

/// Marginals of `Pr(r) ∝ Π φ_v(r_v) Π ψ_uv(r_u, r_v)` by summing over all `Cⁿ`
/// assignments.
pub fn exact_marginals(m: &TinyPmrf) -> Dense {
    let n = m.node_count();
    let c = m.classes();
    let mut marg = Dense::zeros(n, c);
    let mut assignment = vec![0usize; n];
    let total = c.pow(n as u32);
    for _ in 0..total {
        let mut weight = 1.0;
        for (v, &r) in assignment.iter().enumerate() {
            weight *= m.node_potentials[(v, r)];
        }
        for (u, v, psi) in &m.edges {
            weight *= psi[(assignment[*u], assignment[*v])];
        }
        for (v, &r) in assignment.iter().enumerate() {
            marg[(v, r)] += weight;
        }
        // odometer increment
        for r in assignment.iter_mut() {
            *r += 1;
            if *r < c {
                break;
            }
            *r = 0;
        }
    }
    for v in 0..n {
        let s: f64 = marg.row(v).iter().sum();
        marg.row_mut(v).iter_mut().for_each(|x| *x /= s);
    }
    marg
}

/// Solves `P = Q + W P H` directly.
///
/// With `vec(P)` stacking rows (`index = v·C + i`), the system reads
/// `(I − W ⊗ Hᵀ) vec(P) = vec(Q)`; for symmetric `H` this is the Kronecker
/// system of the two factors in node-major order.
pub fn dense_linbp_solve(q: &Dense, w: &Dense, h: &Dense) -> Result<Dense> {
    let n = q.rows();
    let c = q.cols();
    if w.rows() != n || w.cols() != n || h.rows() != c || h.cols() != c {
        return Err(Error::Dimension("dense solve shapes disagree".into()));
    }
    let dim = n * c;
    if dim > MAX_DENSE_UNKNOWNS {
        return Err(Error::Input(format!(
            "dense solve limited to n·C ≤ {MAX_DENSE_UNKNOWNS}, got {dim}"
        )));
    }
    let system = DMatrix::from_fn(dim, dim, |row, col| {
        let (v, i) = (row / c, row % c);
        let (u, j) = (col / c, col % c);
        let identity = if row == col { 1.0 } else { 0.0 };
        identity - w[(v, u)] * h[(j, i)]
    });
    let rhs = DVector::from_iterator(dim, q.as_slice().iter().copied());
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I - W⊗Hᵀ is not invertible".into()))?;
    Ok(Dense::from_vec(n, c, x.iter().copied().collect()))
}

/// Central differences `(f(x + h e_i) − f(x − h e_i)) / 2h` per coordinate.
pub fn fd_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numerical(format!(
                "function is not finite around coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
