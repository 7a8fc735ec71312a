//! Node priors: centered per-node label distributions, either from a
//! multiclass logistic regression over node features or from training labels
//! alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Dense;

/// Partial node labeling; `None` marks an unlabeled node.
pub type Labels = Vec<Option<usize>>;

/// Centered priors `q_v = q̃_v - 1/C`. Rows sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMatrix {
    q: Dense,
}

impl PriorMatrix {
    /// Centers a row-stochastic matrix of uncentered priors.
    pub fn from_distributions(q_tilde: Dense) -> Result<Self> {
        let c = q_tilde.cols();
        if c < 2 {
            return Err(Error::Input(format!("need at least 2 classes, got {c}")));
        }
        for (v, row) in q_tilde.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::Input(format!(
                    "prior row {v} is not a probability distribution"
                )));
            }
        }
        let shift = 1.0 / c as f64;
        let mut q = q_tilde;
        q.as_mut_slice().iter_mut().for_each(|x| *x -= shift);
        Ok(PriorMatrix { q })
    }

    /// Wraps an already-centered matrix. Rows must sum to zero within `1e-9`.
    pub fn from_centered(q: Dense) -> Result<Self> {
        for (v, row) in q.row_iter().enumerate() {
            if row.iter().sum::<f64>().abs() > 1e-9 {
                return Err(Error::Input(format!("prior row {v} does not sum to zero")));
            }
        }
        if !q.is_finite() {
            return Err(Error::Input("prior has non-finite entries".into()));
        }
        Ok(PriorMatrix { q })
    }

    #[inline]
    pub fn centered(&self) -> &Dense {
        &self.q
    }

    pub fn into_inner(self) -> Dense {
        self.q
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.q.cols()
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.q.rows()
    }
}

/// One-hot priors on training nodes, uniform elsewhere.
pub fn label_priors(
    labels: &Labels,
    train: &[usize],
    n: usize,
    classes: usize,
) -> Result<PriorMatrix> {
    let mut q = Dense::from_fn(n, classes, |_, _| 1.0 / classes as f64);
    for &v in train {
        let y = labels
            .get(v)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Input(format!("training node {v} has no label")))?;
        if y >= classes {
            return Err(Error::Input(format!(
                "node {v} has label {y} outside [0, {classes})"
            )));
        }
        let row = q.row_mut(v);
        row.iter_mut().for_each(|x| *x = 0.0);
        row[y] = 1.0;
    }
    PriorMatrix::from_distributions(q)
}

/// Sparse `n×F` feature matrix, one list of `(feature, value)` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FeatureMatrix {
    /// Entries with the same `(node, feature)` are summed; each row is sorted by
    /// feature index.
    pub fn new(dim: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (v, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(f, _)| f);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(f, x) in row.iter() {
                if f >= dim {
                    return Err(Error::Input(format!(
                        "node {v} feature {f} outside [0, {dim})"
                    )));
                }
                if !x.is_finite() {
                    return Err(Error::Input(format!("node {v} feature {f} is not finite")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == f => last.1 += x,
                    _ => merged.push((f, x)),
                }
            }
            *row = merged;
        }
        Ok(FeatureMatrix { dim, rows })
    }

    pub fn from_dense(x: &Dense) -> Self {
        let rows = x
            .row_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(f, &v)| (f, v))
                    .collect()
            })
            .collect();
        FeatureMatrix {
            dim: x.cols(),
            rows,
        }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        FeatureMatrix {
            dim,
            rows: vec![Vec::new(); n],
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[(usize, f64)] {
        &self.rows[v]
    }

    /// Scales each nonzero row to unit L1 norm.
    pub fn l1_normalized(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().map(|(_, x)| x.abs()).sum();
                if s == 0.0 {
                    r.clone()
                } else {
                    r.iter().map(|&(f, x)| (f, x / s)).collect()
                }
            })
            .collect();
        FeatureMatrix {
            dim: self.dim,
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub step: f64,
    pub iterations: usize,
    /// Coefficient of `½‖weights‖²`; the bias is not penalized.
    pub l2: f64,
    pub fit_bias: bool,
    pub l1_normalize_rows: bool,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            step: 0.1,
            iterations: 500,
            l2: 1e-3,
            fit_bias: true,
            l1_normalize_rows: false,
        }
    }
}

/// Softmax classifier: `softmax(x · weights + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// `F×C`.
    pub weights: Dense,
    pub bias: Vec<f64>,
    pub l1_normalize_rows: bool,
}

impl LogRegModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LogRegModel {
            weights: Dense::zeros(dim, classes),
            bias: vec![0.0; classes],
            l1_normalize_rows: false,
        }
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    fn logits_into(&self, row: &[(usize, f64)], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &(f, x) in row {
            for (o, &wf) in out.iter_mut().zip(self.weights.row(f)) {
                *o += x * wf;
            }
        }
    }

    /// Uncentered class probabilities for every node.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Dense> {
        if x.dim() != self.weights.rows() {
            return Err(Error::Dimension(format!(
                "model expects {} features, matrix has {}",
                self.weights.rows(),
                x.dim()
            )));
        }
        let x = if self.l1_normalize_rows {
            std::borrow::Cow::Owned(x.l1_normalized())
        } else {
            std::borrow::Cow::Borrowed(x)
        };
        let c = self.classes();
        let mut out = Dense::zeros(x.node_count(), c);
        for v in 0..x.node_count() {
            let row = out.row_mut(v);
            self.logits_into(x.row(v), row);
            softmax_in_place(row);
        }
        Ok(out)
    }
}

/// Centered priors from a fitted model.
pub fn predict_priors(model: &LogRegModel, x: &FeatureMatrix) -> Result<PriorMatrix> {
    let proba = model.predict_proba(x)?;
    let shift = 1.0 / model.classes() as f64;
    let mut q = proba;
    q.as_mut_slice().iter_mut().for_each(|p| *p -= shift);
    Ok(PriorMatrix { q })
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        s += *x;
    }
    row.iter_mut().for_each(|x| *x /= s);
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct LogRegFit {
    pub model: LogRegModel,
    /// Training objective before the first step and after each accepted step.
    pub loss_history: Vec<f64>,
    /// Classes with no training example.
    pub absent_classes: Vec<usize>,
}

/// Training problem over a fixed set of nodes: mean softmax cross-entropy plus
/// `½ l2 ‖weights‖²`.
struct LogRegProblem<'a> {
    x: &'a FeatureMatrix,
    targets: Vec<(usize, usize)>,
    l2: f64,
    classes: usize,
}

impl LogRegProblem<'_> {
    fn loss(&self, m: &LogRegModel) -> f64 {
        let mut logits = vec![0.0; self.classes];
        let mut total = 0.0;
        for &(v, y) in &self.targets {
            m.logits_into(self.x.row(v), &mut logits);
            total += log_sum_exp(&logits) - logits[y];
        }
        let reg: f64 = m.weights.as_slice().iter().map(|w| w * w).sum();
        total / self.targets.len() as f64 + 0.5 * self.l2 * reg
    }

    /// Returns `(grad_weights, grad_bias)`.
    fn gradient(&self, m: &LogRegModel) -> (Dense, Vec<f64>) {
        let mut gw = m.weights.scale(self.l2);
        let mut gb = vec![0.0; self.classes];
        let scale = 1.0 / self.targets.len() as f64;
        let mut p = vec![0.0; self.classes];
        for &(v, y) in &self.targets {
            let row = self.x.row(v);
            m.logits_into(row, &mut p);
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            for (b, &r) in gb.iter_mut().zip(&p) {
                *b += scale * r;
            }
            for &(f, xf) in row {
                for (g, &r) in gw.row_mut(f).iter_mut().zip(&p) {
                    *g += scale * xf * r;
                }
            }
        }
        (gw, gb)
    }
}

/// Full-batch gradient descent from a zero model. A step that would raise the
/// objective is retried at half the step size (up to 30 halvings), so the
/// recorded loss never increases.
pub fn fit_logreg(
    x: &FeatureMatrix,
    labels: &Labels,
    train: &[usize],
    classes: usize,
    cfg: &LogRegConfig,
) -> Result<LogRegFit> {
    if train.is_empty() {
        return Err(Error::Input(
            "logistic regression needs a nonempty training set".into(),
        ));
    }
    if classes < 2 {
        return Err(Error::Input(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let xs = if cfg.l1_normalize_rows {
        x.l1_normalized()
    } else {
        x.clone()
    };
    let mut targets = Vec::with_capacity(train.len());
    let mut seen = vec![false; classes];
    for &v in train {
        if v >= x.node_count() {
            return Err(Error::Input(format!(
                "training node {v} has no feature row"
            )));
        }
        let y = labels
            .get(v)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Input(format!("training node {v} has no label")))?;
        if y >= classes {
            return Err(Error::Input(format!(
                "node {v} has label {y} outside [0, {classes})"
            )));
        }
        seen[y] = true;
        targets.push((v, y));
    }
    let absent_classes: Vec<usize> = (0..classes).filter(|&c| !seen[c]).collect();
    if !absent_classes.is_empty() {
        log::warn!("classes {absent_classes:?} have no training nodes");
    }

    let problem = LogRegProblem {
        x: &xs,
        targets,
        l2: cfg.l2,
        classes,
    };
    let mut model = LogRegModel::zeros(x.dim(), classes);
    let mut loss = problem.loss(&model);
    let mut history = vec![loss];
    for _ in 0..cfg.iterations {
        let (gw, gb) = problem.gradient(&model);
        let mut step = cfg.step;
        let mut accepted = None;
        for _ in 0..=30 {
            let mut cand = model.clone();
            for (w, g) in cand.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= step * g;
            }
            if cfg.fit_bias {
                for (b, g) in cand.bias.iter_mut().zip(&gb) {
                    *b -= step * g;
                }
            }
            let cand_loss = problem.loss(&cand);
            if cand_loss <= loss {
                accepted = Some((cand, cand_loss));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((m, l)) => {
                model = m;
                loss = l;
                history.push(l);
            }
            // no descent available at any tried step: stationary to machine precision
            None => break,
        }
    }
    model.l1_normalize_rows = cfg.l1_normalize_rows;
    Ok(LogRegFit {
        model,
        loss_history: history,
        absent_classes,
    })
}
