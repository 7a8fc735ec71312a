//! LCM vs. the LinBP baseline on stochastic block models, both tuned on a
//! validation split.
//!
//! cargo run --release --example sbm_benchmark -- [n] [p_in] [p_out] [per_class]

use lcm_pmrf::dataset::{gen_sbm, sample_split, TestSelection};
use lcm_pmrf::experiment::{mean_std, sweep, weight_stats, Grid, Method};
use lcm_pmrf::priors::label_priors;
use lcm_pmrf::Hyperparams;

fn main() -> lcm_pmrf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let n: usize = arg(0, "400").parse().unwrap();
    let p_in: f64 = arg(1, "0.05").parse().unwrap();
    let p_out: f64 = arg(2, "0.005").parse().unwrap();
    let per_class: usize = arg(3, "10").parse().unwrap();

    let grid = Grid::default();
    let (mut lcm_acc, mut base_acc) = (Vec::new(), Vec::new());
    println!("seed  linbp   lcm     H-dominant  homo-w  hetero-w");
    for seed in 1..=5u64 {
        let ds = gen_sbm(n, 2, p_in, p_out, seed)?;
        let split = sample_split(&ds, per_class, 100, &TestSelection::Remaining, seed)?;
        let q = label_priors(&ds.labels, &split.train, n, 2)?;
        let base = sweep(
            &ds,
            &split,
            &q,
            &grid.specs(Method::Linbp, &Hyperparams::default()),
        )?;
        let lcm = sweep(
            &ds,
            &split,
            &q,
            &grid.specs(Method::Lcm, &Hyperparams::default()),
        )?;
        let ws = weight_stats(&ds.graph, &ds.labels, &lcm.best.weights);
        let (b, l) = (
            base.best.accuracy.test.unwrap(),
            lcm.best.accuracy.test.unwrap(),
        );
        println!(
            "{seed:<5} {b:.4}  {l:.4}  {:<10}  {:.4}  {:.4}",
            lcm.best.coupling.is_diagonally_dominant(),
            ws.homo_mean.unwrap_or(f64::NAN),
            ws.hetero_mean.unwrap_or(f64::NAN)
        );
        base_acc.push(b);
        lcm_acc.push(l);
    }
    let (b, l) = (mean_std(&base_acc).unwrap(), mean_std(&lcm_acc).unwrap());
    println!("linbp {:.4} ± {:.4}", b.mean, b.std);
    println!("lcm   {:.4} ± {:.4}", l.mean, l.std);
    Ok(())
}
