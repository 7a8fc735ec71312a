//! Runs of LinBP and the LCM variants on a dataset split: priors, fitting,
//! evaluation, hyperparameter sweeps, and the on-disk run artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{check_convergence, fmt_f64, ConvergenceCheck, CouplingMatrix};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::{EdgeWeights, SparseGraph};
use crate::learn::{self, Hyperparams, LcmProblem, Regularizer, StepRecord, TrainState};
use crate::linbp::{solve_linbp, BeliefMatrix, StopRule, BASELINE_ITER_GRID};
use crate::matrix::Dense;
use crate::priors::{fit_logreg, label_priors, predict_priors, Labels, LogRegConfig, PriorMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "linbp")]
    Linbp,
    #[serde(rename = "lcm")]
    Lcm,
    #[serde(rename = "lcm-wo")]
    LcmWo,
    #[serde(rename = "lcm-l1")]
    LcmL1,
    #[serde(rename = "lcm-l2")]
    LcmL2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Linbp => "linbp",
            Method::Lcm => "lcm",
            Method::LcmWo => "lcm-wo",
            Method::LcmL1 => "lcm-l1",
            Method::LcmL2 => "lcm-l2",
        }
    }

    pub fn regularizer(self) -> Option<Regularizer> {
        match self {
            Method::Linbp => None,
            Method::Lcm => Some(Regularizer::Consistency),
            Method::LcmWo => Some(Regularizer::None),
            Method::LcmL1 => Some(Regularizer::L1),
            Method::LcmL2 => Some(Regularizer::L2),
        }
    }

    /// Forces the variant's regularizer; `lcm-wo` also forces `λ = 0`.
    pub fn apply_to(self, hp: &Hyperparams) -> Hyperparams {
        let mut hp = hp.clone();
        if let Some(r) = self.regularizer() {
            hp.regularizer = r;
        }
        if self == Method::LcmWo {
            hp.lambda = 0.0;
        }
        hp
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linbp" => Method::Linbp,
            "lcm" => Method::Lcm,
            "lcm-wo" => Method::LcmWo,
            "lcm-l1" => Method::LcmL1,
            "lcm-l2" => Method::LcmL2,
            other => return Err(Error::Input(format!("unknown method {other:?}"))),
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Logistic regression on node features.
    Logreg,
    /// One-hot on training nodes, uniform elsewhere.
    Labels,
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(PriorMode::Logreg),
            "labels" => Ok(PriorMode::Labels),
            other => Err(Error::Input(format!("unknown prior mode {other:?}"))),
        }
    }
}

/// Builds centered priors for a split. `Logreg` needs features.
pub fn build_priors(
    ds: &Dataset,
    split: &Split,
    mode: PriorMode,
    cfg: &LogRegConfig,
) -> Result<PriorMatrix> {
    match mode {
        PriorMode::Labels => label_priors(&ds.labels, &split.train, ds.node_count(), ds.classes),
        PriorMode::Logreg => {
            let x = ds.features.as_ref().ok_or_else(|| {
                Error::Input(format!(
                    "dataset {} has no features for logreg priors",
                    ds.name
                ))
            })?;
            let fit = fit_logreg(x, &ds.labels, &split.train, ds.classes, cfg)?;
            predict_priors(&fit.model, x)
        }
    }
}

/// Everything that selects one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: Method,
    /// Ignored by `linbp`.
    pub hp: Hyperparams,
    /// Used by `linbp`.
    pub linbp_stop: StopRule,
}

impl RunSpec {
    pub fn effective_hp(&self) -> Option<Hyperparams> {
        (self.method != Method::Linbp).then(|| self.method.apply_to(&self.hp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

/// Fraction of `nodes` whose prediction equals their label; `None` if no node
/// in the set is labeled.
pub fn accuracy(pred: &[usize], labels: &Labels, nodes: &[usize]) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for &v in nodes {
        if let Some(y) = labels[v] {
            total += 1;
            if pred[v] == y {
                hit += 1;
            }
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub initial_weights: EdgeWeights,
    pub weights: EdgeWeights,
    pub coupling: CouplingMatrix,
    pub beliefs: BeliefMatrix,
    pub predictions: Vec<usize>,
    pub history: Vec<StepRecord>,
    pub accuracy: Accuracies,
    pub convergence: ConvergenceCheck,
    /// LinBP only: whether the tolerance rule was met.
    pub linbp_converged: Option<bool>,
}

/// Fits (or, for `linbp`, solves) one configuration and scores it on the split.
pub fn run_method(
    ds: &Dataset,
    split: &Split,
    priors: &PriorMatrix,
    spec: &RunSpec,
) -> Result<RunOutcome> {
    let g = &ds.graph;
    let init = TrainState::initial(g, priors)?;
    let initial_weights = init.weights.clone();
    let (weights, coupling, beliefs, history, linbp_converged) = match spec.effective_hp() {
        None => {
            let sol = solve_linbp(priors, g, &init.weights, &init.coupling, spec.linbp_stop)?;
            (
                init.weights,
                init.coupling,
                sol.beliefs,
                Vec::new(),
                Some(sol.converged),
            )
        }
        Some(hp) => {
            let problem = LcmProblem {
                graph: g,
                priors,
                labels: &ds.labels,
                train: &split.train,
                hp: &hp,
            };
            let fit = learn::fit_from(&problem, init)?;
            let s = fit.state;
            (s.weights, s.coupling, s.beliefs, fit.history, None)
        }
    };
    let predictions = beliefs.predict();
    let accuracy = Accuracies {
        train: accuracy(&predictions, &ds.labels, &split.train),
        val: accuracy(&predictions, &ds.labels, &split.val),
        test: accuracy(&predictions, &ds.labels, &split.test),
    };
    let convergence = check_convergence(g, &weights, &coupling);
    Ok(RunOutcome {
        spec: spec.clone(),
        initial_weights,
        weights,
        coupling,
        beliefs,
        predictions,
        history,
        accuracy,
        convergence,
        linbp_converged,
    })
}

/// Mean weight over homogeneous and heterogeneous edges (classified by
/// ground-truth labels). Means are `None` when the class of edges is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub homo_mean: Option<f64>,
    pub hetero_mean: Option<f64>,
    pub homo_edges: usize,
    pub hetero_edges: usize,
    /// Edges with an unlabeled endpoint.
    pub excluded_edges: usize,
}

pub fn weight_stats(g: &SparseGraph, labels: &Labels, w: &EdgeWeights) -> WeightStats {
    let edges = g
        .edges()
        .iter()
        .zip(&w.0)
        .map(|(&(u, v), &x)| (labels[u], labels[v], x));
    weight_stats_from(edges)
}

fn weight_stats_from(
    edges: impl Iterator<Item = (Option<usize>, Option<usize>, f64)>,
) -> WeightStats {
    let (mut hs, mut hn, mut xs, mut xn, mut excl) = (0.0, 0usize, 0.0, 0usize, 0usize);
    for (a, b, w) in edges {
        match (a, b) {
            (Some(a), Some(b)) if a == b => {
                hs += w;
                hn += 1;
            }
            (Some(_), Some(_)) => {
                xs += w;
                xn += 1;
            }
            _ => excl += 1,
        }
    }
    WeightStats {
        homo_mean: (hn > 0).then(|| hs / hn as f64),
        hetero_mean: (xn > 0).then(|| xs / xn as f64),
        homo_edges: hn,
        hetero_edges: xn,
        excluded_edges: excl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeightStats {
    pub initial: WeightStats,
    pub learnt: WeightStats,
}

/// Hyperparameter grid; points are visited γ1-major, then γ2, then λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Candidate fixed iteration counts for `linbp`.
    pub linbp_iters: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            gamma1: learn::GAMMA1_GRID.to_vec(),
            gamma2: learn::GAMMA2_GRID.to_vec(),
            lambda: learn::LAMBDA_GRID.to_vec(),
            linbp_iters: BASELINE_ITER_GRID.to_vec(),
        }
    }
}

impl Grid {
    /// All run specs for `method`, in grid order.
    pub fn specs(&self, method: Method, base: &Hyperparams) -> Vec<RunSpec> {
        if method == Method::Linbp {
            return self
                .linbp_iters
                .iter()
                .map(|&k| RunSpec {
                    method,
                    hp: base.clone(),
                    linbp_stop: StopRule::Fixed(k),
                })
                .collect();
        }
        let mut out = Vec::new();
        for &g1 in &self.gamma1 {
            for &g2 in &self.gamma2 {
                for &lam in &self.lambda {
                    out.push(RunSpec {
                        method,
                        hp: Hyperparams {
                            gamma1: g1,
                            gamma2: g2,
                            lambda: lam,
                            ..base.clone()
                        },
                        linbp_stop: StopRule::default(),
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: RunSpec,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub points: Vec<GridPoint>,
    pub best_index: usize,
    /// Another point reached the same validation accuracy; the earliest won.
    pub tie: bool,
    pub best: RunOutcome,
}

/// Runs every grid point and keeps the one with the highest validation
/// accuracy, earliest in grid order on ties. Points run in parallel; the
/// selection only depends on grid order.
pub fn sweep(
    ds: &Dataset,
    split: &Split,
    priors: &PriorMatrix,
    specs: &[RunSpec],
) -> Result<SweepOutcome> {
    if specs.is_empty() {
        return Err(Error::Input("empty hyperparameter grid".into()));
    }
    if split.val.is_empty() {
        return Err(Error::Input(
            "sweep needs a nonempty validation split".into(),
        ));
    }
    let outcomes: Vec<Result<RunOutcome>> = specs
        .par_iter()
        .map(|s| run_method(ds, split, priors, s))
        .collect();
    let mut runs = Vec::with_capacity(specs.len());
    for (spec, o) in specs.iter().zip(outcomes) {
        match o {
            Ok(run) => runs.push(Some(run)),
            // a diverging point loses the sweep rather than aborting it
            Err(Error::Numerical(msg)) => {
                log::warn!("grid point {spec:?} aborted: {msg}");
                runs.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let val: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.as_ref().and_then(|r| r.accuracy.val))
        .collect();
    let mut best_index: Option<usize> = None;
    for (i, v) in val.iter().enumerate() {
        if let Some(v) = *v {
            let better = best_index.is_none_or(|b| v > val[b].unwrap_or(f64::NEG_INFINITY));
            if better {
                best_index = Some(i);
            }
        }
    }
    let best_index =
        best_index.ok_or_else(|| Error::Numerical("every grid point diverged".into()))?;
    let best_val = val[best_index];
    let tie = val
        .iter()
        .enumerate()
        .any(|(i, v)| i != best_index && *v == best_val);
    let points = specs
        .iter()
        .zip(&val)
        .map(|(s, v)| GridPoint {
            spec: s.clone(),
            val_accuracy: *v,
        })
        .collect();
    let best = runs.swap_remove(best_index).unwrap();
    Ok(SweepOutcome {
        points,
        best_index,
        tie,
        best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

pub fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
        count: xs.len(),
    })
}

/// Deterministic per-run report. Wall-clock timings live in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub seed: u64,
    pub method: Method,
    pub prior_mode: PriorMode,
    pub hyperparams: Option<Hyperparams>,
    pub linbp_stop: Option<StopRule>,
    pub split_sizes: [usize; 3],
    pub accuracy: Accuracies,
    pub history: Vec<StepRecord>,
    pub coupling_centered: Dense,
    pub coupling_uncentered: Dense,
    pub diagonally_dominant: bool,
    pub convergence: ConvergenceCheck,
    pub linbp_converged: Option<bool>,
    pub weight_stats: EdgeWeightStats,
    pub sweep: Option<SweepSummary>,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<GridPoint>,
    pub best_index: usize,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub coupling_csv: String,
    pub predictions_csv: String,
    pub weights_csv: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_s: f64,
    pub priors_s: f64,
    pub fit_s: f64,
    pub predict_s: f64,
}

/// Non-deterministic companion of a report: what is needed to re-run it, plus timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub timings: Timings,
}

pub fn build_report(
    ds: &Dataset,
    split: &Split,
    seed: u64,
    prior_mode: PriorMode,
    run: &RunOutcome,
    sweep: Option<SweepSummary>,
) -> RunReport {
    let hp = run.spec.effective_hp();
    RunReport {
        dataset: ds.name.clone(),
        seed,
        method: run.spec.method,
        prior_mode,
        linbp_stop: hp.is_none().then_some(run.spec.linbp_stop),
        hyperparams: hp,
        split_sizes: [split.train.len(), split.val.len(), split.test.len()],
        accuracy: run.accuracy,
        history: run.history.clone(),
        coupling_centered: run.coupling.centered().clone(),
        coupling_uncentered: run.coupling.uncentered(),
        diagonally_dominant: run.coupling.is_diagonally_dominant(),
        convergence: run.convergence,
        linbp_converged: run.linbp_converged,
        weight_stats: EdgeWeightStats {
            initial: weight_stats(&ds.graph, &ds.labels, &run.initial_weights),
            learnt: weight_stats(&ds.graph, &ds.labels, &run.weights),
        },
        sweep,
        artifacts: Artifacts {
            coupling_csv: "coupling_centered.csv".into(),
            predictions_csv: "predictions.csv".into(),
            weights_csv: "weights.csv".into(),
        },
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, the coupling CSVs, `predictions.csv` and `weights.csv`.
pub fn write_run_artifacts(
    dir: &Path,
    ds: &Dataset,
    run: &RunOutcome,
    report: &RunReport,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(
        &dir.join("report.json"),
        &serde_json::to_string_pretty(report)?,
    )?;
    run.coupling.write_csv(dir)?;
    run.beliefs.write_csv(&dir.join("predictions.csv"))?;

    let mut s = String::from("u,v,label_u,label_v,initial,learnt\n");
    let lbl = |y: Option<usize>| y.map(|y| y.to_string()).unwrap_or_default();
    for (e, &(u, v)) in ds.graph.edges().iter().enumerate() {
        let _ = writeln!(
            s,
            "{u},{v},{},{},{},{}",
            lbl(ds.labels[u]),
            lbl(ds.labels[v]),
            fmt_f64(run.initial_weights.get(e)),
            fmt_f64(run.weights.get(e))
        );
    }
    write_file(&dir.join("weights.csv"), &s)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write_file(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(manifest)?,
    )
}

/// Reads `weights.csv` from a run directory and recomputes the homogeneous vs
/// heterogeneous weight statistics.
pub fn stats_from_run_dir(dir: &Path) -> Result<EdgeWeightStats> {
    let path = dir.join("weights.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<_> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::parse(&path, i + 1, "expected 6 columns"));
        }
        let label = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| Error::parse(&path, i + 1, format!("bad label: {e}")))
            }
        };
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::parse(&path, i + 1, format!("bad weight: {e}")))
        };
        rows.push((
            label(cells[2])?,
            label(cells[3])?,
            num(cells[4])?,
            num(cells[5])?,
        ));
    }
    Ok(EdgeWeightStats {
        initial: weight_stats_from(rows.iter().map(|&(a, b, w, _)| (a, b, w))),
        learnt: weight_stats_from(rows.iter().map(|&(a, b, _, w)| (a, b, w))),
    })
}

/// How splits are produced for each seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    Sample {
        per_class: usize,
        val_total: usize,
        test: crate::dataset::TestSelection,
    },
    /// A split file used as-is for every seed.
    File(PathBuf),
}

pub fn make_split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Split> {
    match spec {
        SplitSpec::Sample {
            per_class,
            val_total,
            test,
        } => crate::dataset::sample_split(ds, *per_class, *val_total, test, seed),
        SplitSpec::File(p) => crate::dataset::read_split_file(p, ds.node_count()),
    }
}

/// One seed of a train or sweep run, with phase timings.
pub struct SeedRun {
    pub split: Split,
    pub run: RunOutcome,
    pub sweep: Option<SweepSummary>,
    pub timings: Timings,
}

/// Splits, builds priors and runs a fixed spec (`grid = None`) or a sweep.
pub fn run_seed(
    ds: &Dataset,
    split_spec: &SplitSpec,
    seed: u64,
    prior_mode: PriorMode,
    logreg: &LogRegConfig,
    spec: &RunSpec,
    grid: Option<&Grid>,
) -> Result<SeedRun> {
    let mut timings = Timings::default();
    let split = make_split(ds, split_spec, seed)?;
    let t = Instant::now();
    let priors = build_priors(ds, &split, prior_mode, logreg)?;
    timings.priors_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (run, sweep_summary) = match grid {
        None => (run_method(ds, &split, &priors, spec)?, None),
        Some(grid) => {
            let specs = grid.specs(spec.method, &spec.hp);
            let out = sweep(ds, &split, &priors, &specs)?;
            let summary = SweepSummary {
                points: out.points,
                best_index: out.best_index,
                tie: out.tie,
            };
            (out.best, Some(summary))
        }
    };
    timings.fit_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let _ = run.beliefs.predict();
    timings.predict_s = t.elapsed().as_secs_f64();
    Ok(SeedRun {
        split,
        run,
        sweep: sweep_summary,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_sbm, sample_split, TestSelection};

    #[test]
    fn method_round_trip() {
        for m in [
            Method::Linbp,
            Method::Lcm,
            Method::LcmWo,
            Method::LcmL1,
            Method::LcmL2,
        ] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert!("bp".parse::<Method>().is_err());
    }

    #[test]
    fn lcm_wo_forces_zero_lambda() {
        let hp = Method::LcmWo.apply_to(&Hyperparams::default());
        assert_eq!(hp.lambda, 0.0);
        assert_eq!(hp.regularizer, Regularizer::None);
    }

    #[test]
    fn default_grid_size() {
        let g = Grid::default();
        assert_eq!(g.specs(Method::Lcm, &Hyperparams::default()).len(), 64);
        assert_eq!(g.specs(Method::Linbp, &Hyperparams::default()).len(), 4);
        let specs = g.specs(Method::Lcm, &Hyperparams::default());
        assert_eq!(
            (specs[0].hp.gamma1, specs[0].hp.gamma2, specs[0].hp.lambda),
            (0.02, 0.0002, 0.02)
        );
        assert_eq!(specs[1].hp.lambda, 0.05);
    }

    #[test]
    fn stats_with_constant_weights() {
        // a 4-cycle: all degrees 2, so every initial weight is 0.5
        let g = SparseGraph::build(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4).unwrap();
        let labels = vec![Some(0), Some(0), Some(1), None];
        let s = weight_stats(&g, &labels, &EdgeWeights::degree_normalized(&g));
        assert_eq!(s.homo_mean, Some(0.5));
        assert_eq!(s.hetero_mean, Some(0.5));
        assert_eq!((s.homo_edges, s.hetero_edges, s.excluded_edges), (1, 1, 2));
    }

    #[test]
    fn stats_without_hetero_edges() {
        let g = SparseGraph::build(&[(0, 1)], 2).unwrap();
        let s = weight_stats(&g, &vec![Some(1), Some(1)], &EdgeWeights(vec![0.7]));
        assert_eq!(s.hetero_mean, None);
        assert_eq!(s.homo_mean, Some(0.7));
    }

    #[test]
    fn sweep_tie_picks_first() {
        // two identical grid points must tie, and the first wins
        let ds = gen_sbm(40, 2, 0.3, 0.02, 1).unwrap();
        let split = sample_split(&ds, 3, 10, &TestSelection::Remaining, 1).unwrap();
        let priors = label_priors(&ds.labels, &split.train, 40, 2).unwrap();
        let spec = RunSpec {
            method: Method::Lcm,
            hp: Hyperparams::default(),
            linbp_stop: StopRule::default(),
        };
        let out = sweep(&ds, &split, &priors, &[spec.clone(), spec]).unwrap();
        assert_eq!(out.best_index, 0);
        assert!(out.tie);
    }

    #[test]
    fn one_point_sweep_matches_train() {
        let ds = gen_sbm(40, 2, 0.3, 0.02, 2).unwrap();
        let split = sample_split(&ds, 3, 10, &TestSelection::Remaining, 4).unwrap();
        let priors = label_priors(&ds.labels, &split.train, 40, 2).unwrap();
        let spec = RunSpec {
            method: Method::Lcm,
            hp: Hyperparams::default(),
            linbp_stop: StopRule::default(),
        };
        let direct = run_method(&ds, &split, &priors, &spec).unwrap();
        let swept = sweep(&ds, &split, &priors, std::slice::from_ref(&spec)).unwrap();
        assert_eq!(swept.best, direct);
        assert!(!swept.tie);
    }

    #[test]
    fn mean_and_std() {
        let m = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std, m.count), (2.0, 1.0, 2));
        assert!(mean_std(&[]).is_none());
    }
}
