//! Node priors from a logistic-regression model over noisy features, then
//! propagation.
//!
//! cargo run --release --example logreg_priors

use lcm_pmrf::dataset::{gen_sbm, rng_from_seed, sample_split, TestSelection};
use lcm_pmrf::experiment::accuracy;
use lcm_pmrf::graph::init_weights;
use lcm_pmrf::linbp::{predict, solve_linbp, StopRule};
use lcm_pmrf::priors::{fit_logreg, predict_priors, FeatureMatrix, LogRegConfig};
use lcm_pmrf::CouplingMatrix;
use rand::Rng;

fn main() -> lcm_pmrf::Result<()> {
    let (n, c, dim) = (400, 3, 30);
    let ds = gen_sbm(n, c, 0.04, 0.004, 5)?;
    // bag-of-words style: a few informative features per class buried in noise
    let mut rng = rng_from_seed(5);
    let rows = (0..n)
        .map(|v| {
            let y = ds.labels[v].unwrap();
            (0..dim)
                .filter_map(|f| {
                    let p = if f % c == y && f < 3 * c { 0.4 } else { 0.1 };
                    rng.gen_bool(p).then_some((f, 1.0))
                })
                .collect()
        })
        .collect();
    let x = FeatureMatrix::new(dim, rows)?;
    let split = sample_split(&ds, 20, 50, &TestSelection::Remaining, 5)?;

    let fit = fit_logreg(&x, &ds.labels, &split.train, c, &LogRegConfig::default())?;
    println!(
        "logreg loss {:.4} -> {:.4} over {} accepted steps",
        fit.loss_history[0],
        fit.loss_history.last().unwrap(),
        fit.loss_history.len() - 1
    );
    let q = predict_priors(&fit.model, &x)?;
    let priors_only = accuracy(&predict(q.centered()), &ds.labels, &split.test).unwrap();

    let sol = solve_linbp(
        &q,
        &ds.graph,
        &init_weights(&ds.graph),
        &CouplingMatrix::homophilous(c)?,
        StopRule::default(),
    )?;
    let propagated = accuracy(&sol.beliefs.predict(), &ds.labels, &split.test).unwrap();
    println!("test accuracy: priors alone {priors_only:.4}, after propagation {propagated:.4}");
    Ok(())
}
