//! Exact marginals by enumeration next to LinBP beliefs on a tiny graph.
//!
//! cargo run --example exact_oracle

use lcm_pmrf::graph::EdgeWeights;
use lcm_pmrf::linbp::{solve_linbp, StopRule};
use lcm_pmrf::oracle::{dense_linbp_solve, exact_marginals, TinyPmrf};
use lcm_pmrf::{CouplingMatrix, Dense, PriorMatrix, SparseGraph};

fn main() -> lcm_pmrf::Result<()> {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)];
    let g = SparseGraph::build(&edges, 4)?;
    let q = PriorMatrix::from_distributions(Dense::from_rows(&[
        vec![0.6, 0.2, 0.2],
        vec![1.0 / 3.0; 3],
        vec![0.2, 0.2, 0.6],
        vec![1.0 / 3.0; 3],
    ]))?;
    // a weak coupling keeps the linearization close to exact inference
    let h = CouplingMatrix::homophilous(3)?.scaled(0.3);
    let w = EdgeWeights::constant(&g, 0.5);

    let linbp = solve_linbp(&q, &g, &w, &h, StopRule::default())?;
    let mut wd = Dense::zeros(4, 4);
    for &(u, v) in g.edges() {
        wd[(u, v)] = 0.5;
        wd[(v, u)] = 0.5;
    }
    let direct = dense_linbp_solve(q.centered(), &wd, h.centered())?;
    println!(
        "iterative vs direct solve: max diff {:.2e}",
        linbp.beliefs.p.max_abs_diff(&direct)
    );

    let wedges: Vec<_> = g.edges().iter().map(|&(u, v)| (u, v, 0.5)).collect();
    let exact = exact_marginals(&TinyPmrf::from_centered(
        q.centered(),
        &wedges,
        h.centered(),
    )?);
    println!("node  exact marginals             linbp (centered)");
    for v in 0..4 {
        let e = exact.row(v);
        let p = linbp.beliefs.p.row(v);
        println!(
            "{v}     [{:.3} {:.3} {:.3}]   [{:+.3} {:+.3} {:+.3}]",
            e[0], e[1], e[2], p[0], p[1], p[2]
        );
    }
    Ok(())
}
