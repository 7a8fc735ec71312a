//! Command-line front end behind the `lcm` binary.
//!
//! Any flag may also come from a `--config <file>` of `key=value` lines (keys
//! are long flag names, e.g. `gamma1=0.05`); flags given on the command line
//! win over the file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::coupling::CouplingMatrix;
use crate::dataset::{gen_sbm, load_dataset, write_dataset, Dataset, TestSelection};
use crate::error::{Error, Result};
use crate::experiment::{
    build_report, mean_std, run_seed, stats_from_run_dir, write_manifest, write_run_artifacts,
    Grid, Manifest, Method, PriorMode, RunSpec, SplitSpec, WeightStats,
};
use crate::learn::{Hyperparams, Regularizer};
use crate::linbp::StopRule;
use crate::priors::LogRegConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "lcm",
    version,
    about = "Pairwise-MRF node classification with learnt coupling"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate one configuration per seed.
    Train(RunArgs),
    /// Grid-search hyperparameters on the validation split.
    Sweep(SweepArgs),
    /// Homogeneous vs heterogeneous edge-weight means of a finished run.
    Stats { run: PathBuf },
    /// Write the centered and uncentered coupling CSVs of a run (or the default initial coupling).
    ExportCoupling {
        #[arg(long, conflicts_with = "initial")]
        run: Option<PathBuf>,
        /// Export the homophilous initial coupling for this many classes.
        #[arg(long)]
        initial: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a stochastic block model dataset.
    GenSbm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "lcm")]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub gamma1: f64,
    #[arg(long, default_value_t = 0.001)]
    pub gamma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Alternations for LCM.
    #[arg(long, default_value_t = 4)]
    pub outer_iters: usize,
    #[arg(long, default_value_t = 4)]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 1)]
    pub final_extra_steps: usize,
    #[arg(long)]
    pub clip: bool,
    /// Fixed LinBP iteration count; without it LinBP runs to tolerance.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    #[arg(long, default_value_t = 500)]
    pub val_total: usize,
    /// Test nodes to sample; all remaining labeled nodes when absent.
    #[arg(long)]
    pub test_count: Option<usize>,
    /// File of node ids (one per line) used as the fixed test set.
    #[arg(long)]
    pub test_file: Option<PathBuf>,
    /// `node split` file used for every seed instead of sampling.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// `logreg` or `labels`; defaults to logreg when the dataset has features.
    #[arg(long)]
    pub priors: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub logreg_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub logreg_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub logreg_l2: f64,
    #[arg(long)]
    pub l1_normalize: bool,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    pub gamma1_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma2_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub iters_grid: Option<Vec<usize>>,
}

/// Expands `--config <file>` into flags placed ahead of the remaining
/// arguments, so explicit flags override the file.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let (path, consumed) = match args[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => (
            args.get(pos + 1)
                .cloned()
                .ok_or_else(|| Error::Input("--config needs a path".into()))?,
            2,
        ),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut from_file = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&path, i + 1, "expected key=value"))?;
        let key = k.trim().replace('_', "-");
        let v = v.trim();
        match v {
            "true" => from_file.push(format!("--{key}")),
            "false" => {}
            _ => {
                from_file.push(format!("--{key}"));
                from_file.push(v.to_string());
            }
        }
    }
    let mut rest = args;
    rest.drain(pos..pos + consumed);
    // the file's flags follow the subcommand name
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    rest.splice(sub..sub, from_file);
    Ok(rest)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::Io { .. } | Error::Dimension(_) | Error::Json(_) => EXIT_DATA,
        Error::Numerical(_) | Error::Singular(_) => EXIT_NUMERICAL,
    }
}

/// Entry point; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args().collect())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(&a, None, "train").map(|_| ()),
        Command::Sweep(a) => {
            let mut grid = Grid::default();
            if let Some(g) = a.gamma1_grid {
                grid.gamma1 = g;
            }
            if let Some(g) = a.gamma2_grid {
                grid.gamma2 = g;
            }
            if let Some(g) = a.lambda_grid {
                grid.lambda = g;
            }
            if let Some(g) = a.iters_grid {
                grid.linbp_iters = g;
            }
            cmd_train(&a.run, Some(&grid), "sweep").map(|_| ())
        }
        Command::Stats { run } => cmd_stats(&run).map(|_| ()),
        Command::ExportCoupling { run, initial, out } => {
            let h = match (run, initial) {
                (Some(dir), _) => CouplingMatrix::read_csv(&dir.join("coupling_centered.csv"))?,
                (None, Some(c)) => CouplingMatrix::homophilous(c)?,
                (None, None) => return Err(Error::Input("pass --run or --initial".into())),
            };
            h.write_csv(&out)?;
            println!(
                "wrote {} and {}",
                out.join("coupling_centered.csv").display(),
                out.join("coupling_uncentered.csv").display()
            );
            Ok(())
        }
        Command::GenSbm {
            n,
            classes,
            p_in,
            p_out,
            seed,
            out,
        } => {
            let ds = gen_sbm(n, classes, p_in, p_out, seed)?;
            write_dataset(&ds, &out)?;
            println!(
                "wrote {} ({} nodes, {} edges, {} classes)",
                out.display(),
                ds.node_count(),
                ds.graph.edge_count(),
                classes
            );
            Ok(())
        }
    }
}

fn read_node_list(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        out.push(
            l.parse()
                .map_err(|e| Error::parse(path, i + 1, format!("bad node id: {e}")))?,
        );
    }
    Ok(out)
}

/// Resolved, validated form of [`RunArgs`].
pub struct RunPlan {
    pub spec: RunSpec,
    pub split: SplitSpec,
    pub prior_mode: PriorMode,
    pub logreg: LogRegConfig,
}

pub fn plan(a: &RunArgs, ds: &Dataset) -> Result<RunPlan> {
    let method: Method = a.method.parse()?;
    let hp = Hyperparams {
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        lambda: a.lambda,
        outer_iters: a.outer_iters,
        inner_steps: a.inner_steps,
        regularizer: method.regularizer().unwrap_or(Regularizer::Consistency),
        final_extra_steps: a.final_extra_steps,
        clip: a.clip,
    };
    if method != Method::Linbp {
        method.apply_to(&hp).validate()?;
    }
    let linbp_stop = match a.iters {
        Some(k) => StopRule::Fixed(k),
        None => StopRule::Tolerance {
            tol: a.tol,
            max_iter: a.max_iter,
        },
    };
    let split = match &a.split_file {
        Some(p) => SplitSpec::File(p.clone()),
        None => SplitSpec::Sample {
            per_class: a.per_class,
            val_total: a.val_total,
            test: match (&a.test_file, a.test_count) {
                (Some(p), _) => TestSelection::Fixed(read_node_list(p)?),
                (None, Some(k)) => TestSelection::Count(k),
                (None, None) => TestSelection::Remaining,
            },
        },
    };
    let prior_mode = match &a.priors {
        Some(s) => s.parse()?,
        None if ds.features.is_some() => PriorMode::Logreg,
        None => PriorMode::Labels,
    };
    Ok(RunPlan {
        spec: RunSpec {
            method,
            hp,
            linbp_stop,
        },
        split,
        prior_mode,
        logreg: LogRegConfig {
            step: a.logreg_step,
            iterations: a.logreg_iters,
            l2: a.logreg_l2,
            fit_bias: true,
            l1_normalize_rows: a.l1_normalize,
        },
    })
}

/// Summary over seeds of a train or sweep command.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub test_accuracy: Vec<Option<f64>>,
    pub mean_test_accuracy: Option<f64>,
    pub std_test_accuracy: Option<f64>,
}

/// Runs every seed, writing `<out>/seed-<s>/` per run and `<out>/summary.json`.
pub fn cmd_train(a: &RunArgs, grid: Option<&Grid>, command: &str) -> Result<Summary> {
    let t = Instant::now();
    let ds = load_dataset(&a.dataset)?;
    let load_s = t.elapsed().as_secs_f64();
    let plan = plan(a, &ds)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let mut accs = Vec::new();
    println!(
        "{:<8} {:<8} {:>10} {:>10} {:>10}",
        "seed", "method", "train", "val", "test"
    );
    for &seed in &a.seeds {
        let mut r = run_seed(
            &ds,
            &plan.split,
            seed,
            plan.prior_mode,
            &plan.logreg,
            &plan.spec,
            grid,
        )?;
        r.timings.load_s = load_s;
        let report = build_report(
            &ds,
            &r.split,
            seed,
            plan.prior_mode,
            &r.run,
            r.sweep.clone(),
        );
        let dir = a.out.join(format!("seed-{seed}"));
        write_run_artifacts(&dir, &ds, &r.run, &report)?;
        write_manifest(
            &dir,
            &Manifest {
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config: serde_json::json!({
                    "args": format!("{a:?}"),
                    "grid": grid,
                    "spec": plan.spec,
                    "split": plan.split,
                    "prior_mode": plan.prior_mode,
                    "logreg": plan.logreg,
                }),
                seed,
                timings: r.timings.clone(),
            },
        )?;
        let f = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:<8} {:<8} {:>10} {:>10} {:>10}",
            seed,
            plan.spec.method.name(),
            f(r.run.accuracy.train),
            f(r.run.accuracy.val),
            f(r.run.accuracy.test)
        );
        accs.push(r.run.accuracy.test);
    }
    let present: Vec<f64> = accs.iter().flatten().copied().collect();
    let ms = mean_std(&present);
    if let Some(ms) = ms {
        println!(
            "{} on {}: test accuracy {:.3} ± {:.3} over {} seed(s)",
            plan.spec.method, ds.name, ms.mean, ms.std, ms.count
        );
    }
    let summary = Summary {
        dataset: ds.name.clone(),
        method: plan.spec.method,
        seeds: a.seeds.clone(),
        test_accuracy: accs,
        mean_test_accuracy: ms.map(|m| m.mean),
        std_test_accuracy: ms.map(|m| m.std),
    };
    let p = a.out.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

pub fn cmd_stats(run: &Path) -> Result<crate::experiment::EdgeWeightStats> {
    let s = stats_from_run_dir(run)?;
    let f = |x: Option<f64>| x.map_or("absent".to_string(), |x| format!("{x:.3}"));
    let row = |name: &str, w: &WeightStats| {
        println!(
            "{:<10} {:>10} {:>10}",
            name,
            f(w.homo_mean),
            f(w.hetero_mean)
        );
    };
    println!("{:<10} {:>10} {:>10}", "weights", "homo", "hetero");
    row("initial", &s.initial);
    row("learnt", &s.learnt);
    println!(
        "edges: {} homogeneous, {} heterogeneous, {} excluded (unlabeled endpoint)",
        s.learnt.homo_edges, s.learnt.hetero_edges, s.learnt.excluded_edges
    );
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let d = tempfile::tempdir().unwrap();
        let cfg = d.path().join("run.cfg");
        std::fs::write(
            &cfg,
            "# cfg\ngamma1=0.05\nlambda = 0.2\nclip=true\nper_class=3\n",
        )
        .unwrap();
        let args = expand_config(strings(&[
            "lcm",
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--dataset",
            "x",
            "--lambda",
            "0.02",
        ]))
        .unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let Command::Train(a) = cli.command else {
            panic!("expected train")
        };
        assert_eq!(a.gamma1, 0.05);
        assert_eq!(a.lambda, 0.02);
        assert!(a.clip);
        assert_eq!(a.per_class, 3);
    }

    #[test]
    fn seeds_list() {
        let cli = Cli::try_parse_from(strings(&[
            "lcm",
            "train",
            "--dataset",
            "x",
            "--seeds",
            "1,2,3",
        ]))
        .unwrap();
        let Command::Train(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn exit_codes_distinguish_failures() {
        assert_eq!(main_with_args(strings(&["lcm", "train"])), EXIT_CONFIG);
        assert_eq!(
            main_with_args(strings(&["lcm", "train", "--dataset", "/nonexistent/dir"])),
            EXIT_DATA
        );
        let d = tempfile::tempdir().unwrap();
        let out = d.path().join("sbm");
        assert_eq!(
            main_with_args(strings(&[
                "lcm",
                "gen-sbm",
                "--n",
                "20",
                "--classes",
                "2",
                "--p-in",
                "0.4",
                "--p-out",
                "0.05",
                "--out",
                out.to_str().unwrap()
            ])),
            0
        );
        assert_eq!(
            main_with_args(strings(&[
                "lcm",
                "train",
                "--dataset",
                out.to_str().unwrap(),
                "--method",
                "nope"
            ])),
            EXIT_CONFIG
        );
        assert_eq!(
            main_with_args(strings(&[
                "lcm",
                "train",
                "--dataset",
                out.to_str().unwrap(),
                "--per-class",
                "2",
                "--val-total",
                "4",
                "--gamma1",
                "1e300",
                "--gamma2",
                "1e300",
                "--out",
                d.path().join("runs").to_str().unwrap()
            ])),
            EXIT_NUMERICAL
        );
    }
}
