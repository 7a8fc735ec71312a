//! Coupling-matrix learning.
//!
//! Alternates one propagation step `P⁽ᵗ⁾ = Q + W P⁽ᵗ⁻¹⁾ H` with a few gradient
//! steps on `(W, H)`. Inside an alternation the objective is
//!
//! ```text
//! J(W, H) = -Σ_{l ∈ train} log σ(p_l⁽ᵗ⁺¹⁾)_{y_l} + λ R(W, H),   P⁽ᵗ⁺¹⁾ = Q + W P⁽ᵗ⁾ H
//! ```
//!
//! with `P⁽ᵗ⁾` held fixed. The consistency regularizer uses the current beliefs,
//! `R = -Σ_{(u,v) ∈ E} σ(p_u⁽ᵗ⁾) · W_uv H · σ(p_v⁽ᵗ⁾)ᵀ`, each undirected edge
//! counted once.
//!
//! `H` is parametrized as a symmetric matrix: the `H` gradient returned here is
//! the derivative with respect to the free entries `H_ij = H_ji` (i ≤ j), i.e.
//! the unconstrained gradient `G` folded as `G_ij + G_ji` off the diagonal and
//! `G_ii` on it.

use serde::{Deserialize, Serialize};

use crate::coupling::{symmetrize_in_place, CouplingMatrix};
use crate::error::{Error, Result};
use crate::graph::{right_mul, spmm_propagate, weighted_adjacency_mul, EdgeWeights, SparseGraph};
use crate::linbp::{predict, propagate_step, BeliefMatrix};
use crate::matrix::Dense;
use crate::priors::{softmax_in_place, Labels, PriorMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    Consistency,
    None,
    L1,
    L2,
}

impl Regularizer {
    pub const ALL: [Regularizer; 4] = [
        Regularizer::Consistency,
        Regularizer::None,
        Regularizer::L1,
        Regularizer::L2,
    ];
}

/// Step sizes searched for the edge weights.
pub const GAMMA1_GRID: [f64; 4] = [0.02, 0.05, 0.1, 0.2];
/// Step sizes searched for the coupling; smaller because its gradient sums over all edges.
pub const GAMMA2_GRID: [f64; 4] = [0.0002, 0.0005, 0.001, 0.002];
pub const LAMBDA_GRID: [f64; 4] = [0.02, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Step size for `W`.
    pub gamma1: f64,
    /// Step size for `H`.
    pub gamma2: f64,
    pub lambda: f64,
    pub outer_iters: usize,
    /// Gradient steps per alternation; 0 freezes `(W, H)`.
    pub inner_steps: usize,
    pub regularizer: Regularizer,
    /// Propagation steps with the final `(W, H)` after the last alternation.
    pub final_extra_steps: usize,
    /// Clip each `W_uv` so that `W_uv · H` stays within `[-1/C, 1 - 1/C]`.
    pub clip: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma1: 0.1,
            gamma2: 0.001,
            lambda: 0.1,
            outer_iters: 4,
            inner_steps: 4,
            regularizer: Regularizer::Consistency,
            final_extra_steps: 1,
            clip: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(Error::Input(format!(
                "gamma1 must be positive, got {}",
                self.gamma1
            )));
        }
        if !(self.gamma2 > 0.0 && self.gamma2.is_finite()) {
            return Err(Error::Input(format!(
                "gamma2 must be positive, got {}",
                self.gamma2
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Input(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::Input("outer_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax_row(p: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_rows(p: &Dense) -> Dense {
    let mut s = p.clone();
    let c = s.cols();
    if c > 0 {
        s.as_mut_slice().chunks_mut(c).for_each(softmax_in_place);
    }
    s
}

fn label_of(labels: &Labels, v: usize) -> Result<usize> {
    labels
        .get(v)
        .copied()
        .flatten()
        .ok_or_else(|| Error::Input(format!("training node {v} has no label")))
}

/// `-log σ(p)_y` without forming the softmax.
fn node_cross_entropy(row: &[f64], y: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    lse - row[y]
}

/// Summed cross-entropy of the training nodes.
pub fn cross_entropy_loss(p: &Dense, labels: &Labels, train: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &l in train {
        let y = label_of(labels, l)?;
        if y >= p.cols() {
            return Err(Error::Input(format!("node {l} label {y} out of range")));
        }
        total += node_cross_entropy(p.row(l), y);
    }
    Ok(total)
}

fn bilinear(a: &[f64], h: &Dense, b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        s += ai * h.row(i).iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    }
    s
}

fn consistency_from_softmax(sigma: &Dense, g: &SparseGraph, w: &EdgeWeights, h: &Dense) -> f64 {
    -g.edges()
        .iter()
        .zip(&w.0)
        .map(|(&(u, v), &wuv)| wuv * bilinear(sigma.row(u), h, sigma.row(v)))
        .sum::<f64>()
}

/// `-Σ_{(u,v) ∈ E} σ(p_u) · W_uv H · σ(p_v)ᵀ`.
pub fn consistency_reg(p: &Dense, g: &SparseGraph, w: &EdgeWeights, h: &CouplingMatrix) -> f64 {
    consistency_from_softmax(&softmax_rows(p), g, w, h.centered())
}

/// `Σ |W_uv| + Σ_ij |H_ij|`, all entries of `H` including the diagonal.
pub fn l1_reg(w: &EdgeWeights, h: &Dense) -> f64 {
    w.0.iter().map(|x| x.abs()).sum::<f64>() + h.as_slice().iter().map(|x| x.abs()).sum::<f64>()
}

/// `Σ W_uv² + Σ_ij H_ij²`.
pub fn l2_reg(w: &EdgeWeights, h: &Dense) -> f64 {
    w.0.iter().map(|x| x * x).sum::<f64>() + h.as_slice().iter().map(|x| x * x).sum::<f64>()
}

/// The inputs fixed for a whole training run.
#[derive(Debug, Clone, Copy)]
pub struct LcmProblem<'a> {
    pub graph: &'a SparseGraph,
    pub priors: &'a PriorMatrix,
    pub labels: &'a Labels,
    pub train: &'a [usize],
    pub hp: &'a Hyperparams,
}

impl LcmProblem<'_> {
    fn check(&self) -> Result<()> {
        self.hp.validate()?;
        let n = self.graph.node_count();
        if self.priors.node_count() != n {
            return Err(Error::Dimension(format!(
                "{} prior rows for {n} nodes",
                self.priors.node_count()
            )));
        }
        for &l in self.train {
            if l >= n {
                return Err(Error::Input(format!("training node {l} out of range")));
            }
            let y = label_of(self.labels, l)?;
            if y >= self.priors.classes() {
                return Err(Error::Input(format!("node {l} label {y} out of range")));
            }
        }
        Ok(())
    }
}

/// Parameters and beliefs threaded through the alternation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub weights: EdgeWeights,
    pub coupling: CouplingMatrix,
    /// Current `P⁽ᵗ⁾`.
    pub beliefs: BeliefMatrix,
    pub outer_iter: usize,
}

impl TrainState {
    /// Degree-normalized weights, homophilous coupling, `P⁽⁰⁾ = Q`.
    pub fn initial(g: &SparseGraph, q: &PriorMatrix) -> Result<Self> {
        Ok(TrainState {
            weights: EdgeWeights::degree_normalized(g),
            coupling: CouplingMatrix::homophilous(q.classes())?,
            beliefs: BeliefMatrix::from_priors(q),
            outer_iter: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub loss: f64,
    /// Unscaled regularizer value (0 for [`Regularizer::None`]).
    pub reg: f64,
    /// `loss + λ·reg`.
    pub total: f64,
}

/// Quantities depending only on `P⁽ᵗ⁾`, shared by every candidate evaluated in
/// one alternation.
struct StepContext<'a> {
    problem: LcmProblem<'a>,
    p_t: &'a Dense,
    sigma_t: Dense,
    targets: Vec<(usize, usize)>,
}

struct Evaluation {
    value: ObjectiveValue,
    grad_w: Vec<f64>,
    grad_h: Dense,
}

impl<'a> StepContext<'a> {
    fn new(problem: LcmProblem<'a>, p_t: &'a Dense) -> Result<Self> {
        let targets = problem
            .train
            .iter()
            .map(|&l| label_of(problem.labels, l).map(|y| (l, y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(StepContext {
            problem,
            p_t,
            sigma_t: softmax_rows(p_t),
            targets,
        })
    }

    fn next_beliefs(&self, w: &EdgeWeights, h: &Dense) -> Result<Dense> {
        let mut next = spmm_propagate(self.problem.graph, w, self.p_t, h)?;
        for (o, &qv) in next
            .as_mut_slice()
            .iter_mut()
            .zip(self.problem.priors.centered().as_slice())
        {
            *o += qv;
        }
        Ok(next)
    }

    fn regularizer(&self, w: &EdgeWeights, h: &Dense) -> f64 {
        match self.problem.hp.regularizer {
            Regularizer::Consistency => {
                consistency_from_softmax(&self.sigma_t, self.problem.graph, w, h)
            }
            Regularizer::None => 0.0,
            Regularizer::L1 => l1_reg(w, h),
            Regularizer::L2 => l2_reg(w, h),
        }
    }

    fn objective(&self, w: &EdgeWeights, h: &Dense) -> Result<ObjectiveValue> {
        let p_next = self.next_beliefs(w, h)?;
        let loss: f64 = self
            .targets
            .iter()
            .map(|&(l, y)| node_cross_entropy(p_next.row(l), y))
            .sum();
        let reg = self.regularizer(w, h);
        Ok(ObjectiveValue {
            loss,
            reg,
            total: loss + self.problem.hp.lambda * reg,
        })
    }

    fn evaluate(&self, w: &EdgeWeights, h: &Dense) -> Result<Evaluation> {
        let g = self.problem.graph;
        let c = h.rows();
        let lambda = self.problem.hp.lambda;
        let p_next = self.next_beliefs(w, h)?;

        // dJ/dp_l⁽ᵗ⁺¹⁾ = σ(p_l) - y_l on training rows, zero elsewhere
        let mut resid = Dense::zeros(g.node_count(), c);
        let mut loss = 0.0;
        for &(l, y) in &self.targets {
            loss += node_cross_entropy(p_next.row(l), y);
            let r = resid.row_mut(l);
            r.copy_from_slice(p_next.row(l));
            softmax_in_place(r);
            r[y] -= 1.0;
        }

        // Loss part of dJ/dW_uv: p_u⁽ᵗ⁺¹⁾ gains W_uv (P H)_v and p_v gains W_uv (P H)_u.
        let ph = right_mul(self.p_t, h)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut is_train = vec![false; g.node_count()];
        for &(l, _) in &self.targets {
            is_train[l] = true;
        }
        let mut grad_w: Vec<f64> = g
            .edges()
            .iter()
            .map(|&(u, v)| {
                let mut d = 0.0;
                if is_train[u] {
                    d += dot(resid.row(u), ph.row(v));
                }
                if is_train[v] {
                    d += dot(resid.row(v), ph.row(u));
                }
                d
            })
            .collect();

        // Loss part of dJ/dH_mk, unconstrained: Σ_l (W P)_lm · resid_lk.
        let wp = weighted_adjacency_mul(g, w, self.p_t)?;
        let mut grad_h = Dense::zeros(c, c);
        for &(l, _) in &self.targets {
            let a = wp.row(l);
            let r = resid.row(l);
            for (m, &am) in a.iter().enumerate() {
                for (gk, &rk) in grad_h.row_mut(m).iter_mut().zip(r) {
                    *gk += am * rk;
                }
            }
        }

        let reg = self.regularizer(w, h);
        if lambda != 0.0 {
            match self.problem.hp.regularizer {
                Regularizer::None => {}
                Regularizer::Consistency => {
                    for (e, &(u, v)) in g.edges().iter().enumerate() {
                        let su = self.sigma_t.row(u);
                        let sv = self.sigma_t.row(v);
                        grad_w[e] -= lambda * bilinear(su, h, sv);
                        let wuv = w.0[e];
                        for (m, &sum) in su.iter().enumerate() {
                            for (gk, &svk) in grad_h.row_mut(m).iter_mut().zip(sv) {
                                *gk -= lambda * wuv * sum * svk;
                            }
                        }
                    }
                }
                Regularizer::L1 => {
                    for (gw, &x) in grad_w.iter_mut().zip(&w.0) {
                        *gw += lambda * sign(x);
                    }
                    for (gh, &x) in grad_h.as_mut_slice().iter_mut().zip(h.as_slice()) {
                        *gh += lambda * sign(x);
                    }
                }
                Regularizer::L2 => {
                    for (gw, &x) in grad_w.iter_mut().zip(&w.0) {
                        *gw += 2.0 * lambda * x;
                    }
                    for (gh, &x) in grad_h.as_mut_slice().iter_mut().zip(h.as_slice()) {
                        *gh += 2.0 * lambda * x;
                    }
                }
            }
        }

        Ok(Evaluation {
            value: ObjectiveValue {
                loss,
                reg,
                total: loss + lambda * reg,
            },
            grad_w,
            grad_h: fold_symmetric(&grad_h),
        })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient with respect to the free entries of a symmetric matrix.
fn fold_symmetric(g: &Dense) -> Dense {
    let c = g.rows();
    Dense::from_fn(c, c, |i, j| {
        if i == j {
            g[(i, i)]
        } else {
            g[(i, j)] + g[(j, i)]
        }
    })
}

/// Objective of candidates `(w, h)` given the state's current beliefs `P⁽ᵗ⁾`.
pub fn objective(
    problem: &LcmProblem<'_>,
    state: &TrainState,
    w: &EdgeWeights,
    h: &CouplingMatrix,
) -> Result<ObjectiveValue> {
    problem.check()?;
    StepContext::new(*problem, &state.beliefs.p)?.objective(w, h.centered())
}

/// Per-edge gradient of [`objective`].
pub fn grad_w(
    problem: &LcmProblem<'_>,
    state: &TrainState,
    w: &EdgeWeights,
    h: &CouplingMatrix,
) -> Result<Vec<f64>> {
    problem.check()?;
    Ok(StepContext::new(*problem, &state.beliefs.p)?
        .evaluate(w, h.centered())?
        .grad_w)
}

/// Gradient of [`objective`] with respect to the symmetric coupling's free entries.
pub fn grad_h(
    problem: &LcmProblem<'_>,
    state: &TrainState,
    w: &EdgeWeights,
    h: &CouplingMatrix,
) -> Result<Dense> {
    problem.check()?;
    Ok(StepContext::new(*problem, &state.beliefs.p)?
        .evaluate(w, h.centered())?
        .grad_h)
}

/// Objective recorded at one point of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Alternation, starting at 1.
    pub outer: usize,
    /// Number of gradient steps already applied in this alternation.
    pub inner: usize,
    pub objective: ObjectiveValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Final parameters; `beliefs` holds the beliefs used for prediction.
    pub state: TrainState,
    pub history: Vec<StepRecord>,
}

impl FitResult {
    pub fn predict(&self) -> Vec<usize> {
        predict_final(&self.state)
    }
}

/// Argmax of the final beliefs, ties to the lowest class.
pub fn predict_final(state: &TrainState) -> Vec<usize> {
    predict(&state.beliefs.p)
}

/// Caps every `|W_uv|` so `W_uv · H` stays within `[-1/C, 1 - 1/C]`.
fn clip_weights(w: &mut EdgeWeights, h: &CouplingMatrix) {
    let (lo, hi) = h.clip_bounds();
    let max_pos = h.centered().as_slice().iter().copied().fold(0.0, f64::max);
    let max_neg = h
        .centered()
        .as_slice()
        .iter()
        .map(|x| -x)
        .fold(0.0, f64::max);
    // For w ≥ 0 the binding entries are the largest positive and most negative
    // ones; for w < 0 their roles swap.
    let cap_pos = (hi / max_pos).min(-lo / max_neg);
    let cap_neg = (-lo / max_pos).min(hi / max_neg);
    for x in w.0.iter_mut() {
        if *x > cap_pos {
            *x = cap_pos;
        } else if *x < -cap_neg {
            *x = -cap_neg;
        }
    }
}

/// Runs the full alternation starting from `init`.
pub fn fit_from(problem: &LcmProblem<'_>, init: TrainState) -> Result<FitResult> {
    problem.check()?;
    let hp = problem.hp;
    if init.weights.len() != problem.graph.edge_count() {
        return Err(Error::Dimension("weights do not match graph".into()));
    }
    if init.coupling.classes() != problem.priors.classes() {
        return Err(Error::Dimension(
            "coupling does not match class count".into(),
        ));
    }
    let TrainState {
        mut weights,
        mut coupling,
        mut beliefs,
        outer_iter,
    } = init;
    let mut history = Vec::with_capacity(hp.outer_iters * (hp.inner_steps + 1));

    for t in 1..=hp.outer_iters {
        beliefs = propagate_step(problem.priors, problem.graph, &weights, &beliefs, &coupling)?;
        if !beliefs.p.is_finite() {
            return Err(Error::Numerical(format!(
                "beliefs became non-finite at alternation {t}"
            )));
        }
        let ctx = StepContext::new(*problem, &beliefs.p)?;
        for s in 0..hp.inner_steps {
            let eval = ctx.evaluate(&weights, coupling.centered())?;
            if !eval.value.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "objective is non-finite at alternation {t}, gradient step {s}"
                )));
            }
            history.push(StepRecord {
                outer: t,
                inner: s,
                objective: eval.value,
            });
            for (x, gx) in weights.0.iter_mut().zip(&eval.grad_w) {
                *x -= hp.gamma1 * gx;
            }
            let mut h = coupling.centered().clone();
            for (x, gx) in h.as_mut_slice().iter_mut().zip(eval.grad_h.as_slice()) {
                *x -= hp.gamma2 * gx;
            }
            symmetrize_in_place(&mut h);
            coupling = CouplingMatrix::new(h).map_err(|_| {
                Error::Numerical(format!(
                    "coupling became non-finite at alternation {t}, gradient step {s}"
                ))
            })?;
            if hp.clip {
                clip_weights(&mut weights, &coupling);
            }
            if !weights.is_finite() {
                return Err(Error::Numerical(format!(
                    "edge weights became non-finite at alternation {t}, gradient step {s}"
                )));
            }
        }
        let value = ctx.objective(&weights, coupling.centered())?;
        if !value.total.is_finite() {
            return Err(Error::Numerical(format!(
                "objective is non-finite after alternation {t}"
            )));
        }
        history.push(StepRecord {
            outer: t,
            inner: hp.inner_steps,
            objective: value,
        });
    }

    for _ in 0..hp.final_extra_steps {
        beliefs = propagate_step(problem.priors, problem.graph, &weights, &beliefs, &coupling)?;
    }
    if !beliefs.p.is_finite() {
        return Err(Error::Numerical("final beliefs are non-finite".into()));
    }

    Ok(FitResult {
        state: TrainState {
            weights,
            coupling,
            beliefs,
            outer_iter: outer_iter + hp.outer_iters,
        },
        history,
    })
}

/// Runs the full alternation from the default initialization.
pub fn fit(problem: &LcmProblem<'_>) -> Result<FitResult> {
    let init = TrainState::initial(problem.graph, problem.priors)?;
    fit_from(problem, init)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> (SparseGraph, PriorMatrix, Labels) {
        let g = SparseGraph::build(&[(0, 1)], 2).unwrap();
        let labels = vec![Some(0), None];
        let q = crate::priors::label_priors(&labels, &[0], 2, 2).unwrap();
        (g, q, labels)
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax_row(&[0.0, 0.0]), vec![0.5, 0.5]);
        let s = softmax_row(&[1000.0, 0.0]);
        assert!(s.iter().all(|x| x.is_finite()));
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1] < 1e-300);
        let s = softmax_row(&[2f64.ln(), 0.0]);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_values() {
        let labels = vec![Some(0), Some(0)];
        let p = Dense::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let one = cross_entropy_loss(&p, &labels, &[0]).unwrap();
        assert!((one - 2f64.ln()).abs() < 1e-15);
        let two = cross_entropy_loss(&p, &labels, &[0, 1]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-15);
        let p = Dense::from_rows(&[vec![10.0, 0.0]]);
        let l = cross_entropy_loss(&p, &labels, &[0]).unwrap();
        assert!((l - (-10f64).exp().ln_1p()).abs() < 1e-15);
        assert!((l - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn consistency_values() {
        let g = SparseGraph::build(&[(0, 1)], 2).unwrap();
        let h = CouplingMatrix::homophilous(2).unwrap();
        // large logits make σ(p) one-hot to double precision
        let same = Dense::from_rows(&[vec![800.0, 0.0], vec![800.0, 0.0]]);
        let r = consistency_reg(&same, &g, &EdgeWeights(vec![1.0]), &h);
        assert!((r + 0.4).abs() < 1e-15);
        let diff = Dense::from_rows(&[vec![800.0, 0.0], vec![0.0, 800.0]]);
        let r = consistency_reg(&diff, &g, &EdgeWeights(vec![1.0]), &h);
        assert!((r - 0.4).abs() < 1e-15);
        assert_eq!(consistency_reg(&same, &g, &EdgeWeights(vec![0.0]), &h), 0.0);
    }

    #[test]
    fn lambda_zero_objective_is_loss() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams {
            lambda: 0.0,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let state = TrainState::initial(&g, &q).unwrap();
        let v = objective(&problem, &state, &state.weights, &state.coupling).unwrap();
        assert_eq!(v.total, v.loss);
    }

    #[test]
    fn objective_combines_terms() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams::default();
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let state = TrainState::initial(&g, &q).unwrap();
        let v = objective(&problem, &state, &state.weights, &state.coupling).unwrap();
        let p_next = spmm_propagate(
            &g,
            &state.weights,
            &state.beliefs.p,
            state.coupling.centered(),
        )
        .unwrap();
        let mut p_next = p_next;
        for (o, &x) in p_next
            .as_mut_slice()
            .iter_mut()
            .zip(q.centered().as_slice())
        {
            *o += x;
        }
        let a = cross_entropy_loss(&p_next, &labels, &[0]).unwrap();
        let b = consistency_reg(&state.beliefs.p, &g, &state.weights, &state.coupling);
        assert!((v.total - (a + 0.1 * b)).abs() < 1e-15);
    }

    #[test]
    fn no_labels_no_lambda_gives_zero_gradients() {
        let g = SparseGraph::build(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        let q = PriorMatrix::from_centered(Dense::from_rows(&[
            vec![0.1, -0.1],
            vec![-0.2, 0.2],
            vec![0.0, 0.0],
        ]))
        .unwrap();
        let labels = vec![None; 3];
        let hp = Hyperparams {
            lambda: 0.0,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[],
            hp: &hp,
        };
        let state = TrainState::initial(&g, &q).unwrap();
        let gw = grad_w(&problem, &state, &state.weights, &state.coupling).unwrap();
        assert!(gw.iter().all(|&x| x == 0.0));
        let gh = grad_h(&problem, &state, &state.weights, &state.coupling).unwrap();
        assert_eq!(gh.max_abs(), 0.0);
    }

    #[test]
    fn zero_beliefs_kill_coupling_loss_gradient() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams {
            lambda: 0.0,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let mut state = TrainState::initial(&g, &q).unwrap();
        state.beliefs.p = Dense::zeros(2, 2);
        let gh = grad_h(&problem, &state, &state.weights, &state.coupling).unwrap();
        assert_eq!(gh.max_abs(), 0.0);
    }

    #[test]
    fn far_edge_gradient_is_pure_regularizer() {
        // path 0-1-2-3, only node 0 labeled; edge (2,3) touches no training node
        let g = SparseGraph::build(&[(0, 1), (1, 2), (2, 3)], 4).unwrap();
        let labels = vec![Some(1), None, None, None];
        let q = PriorMatrix::from_centered(Dense::from_rows(&[
            vec![-0.3, 0.3],
            vec![0.1, -0.1],
            vec![0.2, -0.2],
            vec![-0.05, 0.05],
        ]))
        .unwrap();
        let hp = Hyperparams {
            lambda: 0.2,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let state = TrainState::initial(&g, &q).unwrap();
        let gw = grad_w(&problem, &state, &state.weights, &state.coupling).unwrap();
        let e = g.edge_index(2, 3).unwrap();
        let s2 = softmax_row(state.beliefs.p.row(2));
        let s3 = softmax_row(state.beliefs.p.row(3));
        let h = state.coupling.centered();
        let mut expect = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                expect += s2[i] * h[(i, j)] * s3[j];
            }
        }
        assert!((gw[e] + 0.2 * expect).abs() < 1e-16);
        assert_ne!(expect, 0.0);
    }

    #[test]
    fn degenerate_schedule_is_one_propagation() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams {
            outer_iters: 1,
            inner_steps: 0,
            final_extra_steps: 0,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let init = TrainState::initial(&g, &q).unwrap();
        let fit = fit(&problem).unwrap();
        let one = propagate_step(&q, &g, &init.weights, &init.beliefs, &init.coupling).unwrap();
        assert_eq!(fit.state.beliefs, one);
        assert_eq!(fit.state.weights, init.weights);
        assert_eq!(fit.state.coupling, init.coupling);
    }

    #[test]
    fn labeled_node_keeps_its_label() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams::default();
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let fit = fit(&problem).unwrap();
        assert_eq!(fit.predict()[0], 0);
        let row = fit.state.beliefs.p.row(0);
        assert!(row[0] > row[1]);
    }

    #[test]
    fn history_shape() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams::default();
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let fit = fit(&problem).unwrap();
        assert_eq!(fit.history.len(), 4 * 5);
        assert_eq!(fit.state.outer_iter, 4);
        assert_eq!(fit.state.beliefs.iteration, 5);
    }

    #[test]
    fn overflow_aborts_with_step() {
        let (g, q, labels) = two_node();
        let hp = Hyperparams {
            gamma1: 1e300,
            gamma2: 1e300,
            ..Default::default()
        };
        let problem = LcmProblem {
            graph: &g,
            priors: &q,
            labels: &labels,
            train: &[0],
            hp: &hp,
        };
        let err = fit(&problem).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn invalid_hyperparams() {
        for hp in [
            Hyperparams {
                gamma1: 0.0,
                ..Default::default()
            },
            Hyperparams {
                gamma2: -1.0,
                ..Default::default()
            },
            Hyperparams {
                lambda: -0.1,
                ..Default::default()
            },
            Hyperparams {
                outer_iters: 0,
                ..Default::default()
            },
        ] {
            assert!(hp.validate().is_err());
        }
    }

    #[test]
    fn clipping_bounds_products() {
        let h = CouplingMatrix::homophilous(3).unwrap();
        let mut w = EdgeWeights(vec![5.0, -5.0, 0.3]);
        clip_weights(&mut w, &h);
        let (lo, hi) = h.clip_bounds();
        for &x in &w.0 {
            for &hij in h.centered().as_slice() {
                assert!(x * hij >= lo - 1e-12 && x * hij <= hi + 1e-12);
            }
        }
        assert_eq!(w.0[2], 0.3);
    }
}
