//! Linearized belief propagation on a small hand-built graph.
//!
//! cargo run --example linbp_inference

use lcm_pmrf::coupling::check_convergence;
use lcm_pmrf::graph::init_weights;
use lcm_pmrf::linbp::{residual, solve_linbp, StopRule};
use lcm_pmrf::{CouplingMatrix, Dense, PriorMatrix, SparseGraph};

fn main() -> lcm_pmrf::Result<()> {
    // two triangles joined by the bridge 2-3
    let g = SparseGraph::build(&[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)], 6)?;
    // node 0 is known to be class 0, node 5 class 1; everything else uniform
    let q = PriorMatrix::from_distributions(Dense::from_rows(&[
        vec![0.9, 0.1],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![0.1, 0.9],
    ]))?;
    let w = init_weights(&g);
    let h = CouplingMatrix::homophilous(2)?;

    let check = check_convergence(&g, &w, &h);
    println!(
        "rho(W) = {:.4}, rho(H) = {:.4}, product {:.4}",
        check.rho_w.value,
        check.rho_h.value,
        check.product()
    );

    let sol = solve_linbp(&q, &g, &w, &h, StopRule::default())?;
    println!(
        "converged: {} after {} steps, residual {:.2e}",
        sol.converged,
        sol.step_sizes.len(),
        residual(&q, &g, &w, &h, &sol.beliefs.p)?
    );
    for (v, class) in sol.beliefs.predict().iter().enumerate() {
        let p = sol.beliefs.p.row(v);
        println!("node {v}: [{:+.4}, {:+.4}] -> class {class}", p[0], p[1]);
    }
    Ok(())
}
