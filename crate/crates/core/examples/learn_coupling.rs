//! Learning edge weights and the coupling matrix on a weakly homophilous block
//! model, where the default coupling overstates homophily.
//!
//! cargo run --release --example learn_coupling

use lcm_pmrf::dataset::{gen_sbm, homophily, sample_split, TestSelection};
use lcm_pmrf::experiment::{accuracy, weight_stats};
use lcm_pmrf::learn::{fit_from, LcmProblem, TrainState};
use lcm_pmrf::linbp::{solve_linbp, StopRule};
use lcm_pmrf::priors::label_priors;
use lcm_pmrf::Hyperparams;

fn main() -> lcm_pmrf::Result<()> {
    let (n, c) = (300, 3);
    let ds = gen_sbm(n, c, 0.04, 0.015, 11)?;
    println!(
        "edges {}, homophily {:.3}",
        ds.graph.edge_count(),
        homophily(&ds).unwrap_or(f64::NAN)
    );
    let split = sample_split(&ds, 10, 60, &TestSelection::Remaining, 11)?;
    let q = label_priors(&ds.labels, &split.train, n, c)?;

    let init = TrainState::initial(&ds.graph, &q)?;
    let base = solve_linbp(
        &q,
        &ds.graph,
        &init.weights,
        &init.coupling,
        StopRule::default(),
    )?;
    let base_acc = accuracy(&base.beliefs.predict(), &ds.labels, &split.test).unwrap();

    let hp = Hyperparams {
        gamma1: 0.2,
        gamma2: 0.002,
        outer_iters: 6,
        ..Default::default()
    };
    let problem = LcmProblem {
        graph: &ds.graph,
        priors: &q,
        labels: &ds.labels,
        train: &split.train,
        hp: &hp,
    };
    let fit = fit_from(&problem, init)?;
    for r in fit.history.iter().filter(|r| r.inner == 0) {
        println!(
            "alternation {}: loss {:.4} reg {:.4}",
            r.outer, r.objective.loss, r.objective.reg
        );
    }
    let lcm_acc = accuracy(&fit.predict(), &ds.labels, &split.test).unwrap();
    println!("test accuracy: linbp {base_acc:.4}, lcm {lcm_acc:.4}");

    println!("learnt coupling (uncentered):");
    for row in fit.state.coupling.uncentered().row_iter() {
        println!(
            "  {}",
            row.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join("  ")
        );
    }
    let ws = weight_stats(&ds.graph, &ds.labels, &fit.state.weights);
    println!(
        "mean weight: homogeneous {:.4}, heterogeneous {:.4}",
        ws.homo_mean.unwrap_or(f64::NAN),
        ws.hetero_mean.unwrap_or(f64::NAN)
    );
    Ok(())
}
