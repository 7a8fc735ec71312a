use lcm_pmrf::coupling::{dense_spectral_radius, graph_spectral_radius, POWER_MAX_ITER, POWER_TOL};
use lcm_pmrf::dataset::rng_from_seed;
use lcm_pmrf::graph::{spmm_propagate, EdgeWeights, SparseGraph};
use lcm_pmrf::matrix::Dense;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

fn random_graph(seed: u64, n: usize, p: f64) -> (SparseGraph, EdgeWeights, Dense) {
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let g = SparseGraph::build(&edges, n).unwrap();
    let w = EdgeWeights(
        (0..g.edge_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    let mut a = Dense::zeros(n, n);
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        a[(u, v)] = w.get(e);
        a[(v, u)] = w.get(e);
    }
    (g, w, a)
}

fn eigen_radius(m: &Dense) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    SymmetricEigen::new(d)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, x| a.max(x.abs()))
}

#[test]
fn propagation_matches_dense_product() {
    for seed in 0..40 {
        let mut rng = rng_from_seed(1000 + seed);
        let n = rng.gen_range(1..=50);
        let c = rng.gen_range(1..=5);
        let (g, w, a) = random_graph(seed, n, rng.gen_range(0.0..0.5));
        let p = Dense::from_fn(n, c, |_, _| rng.gen_range(-1.0..1.0));
        let h = Dense::from_fn(c, c, |_, _| rng.gen_range(-1.0..1.0));
        let sparse = spmm_propagate(&g, &w, &p, &h).unwrap();
        let dense = a.matmul(&p).matmul(&h);
        assert!(sparse.max_abs_diff(&dense) <= 1e-12, "seed {seed}");
    }
}

#[test]
fn isolated_nodes_receive_nothing() {
    let g = SparseGraph::build(&[(0, 1)], 3).unwrap();
    let p = Dense::from_fn(3, 2, |v, c| (v + c) as f64);
    let out = spmm_propagate(
        &g,
        &EdgeWeights(vec![0.5]),
        &p,
        &Dense::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
    )
    .unwrap();
    assert_eq!(out.row(2), &[0.0, 0.0]);
}

#[test]
fn spectral_radius_matches_eigendecomposition() {
    for seed in 0..30 {
        let mut rng = rng_from_seed(2000 + seed);
        let n = rng.gen_range(1..=50);
        let mut m = Dense::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = rng.gen_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let exact = eigen_radius(&m);
        // nearly equal top magnitudes can outlast the default budget, but then
        // the estimate must say so
        let est = dense_spectral_radius(&m, POWER_TOL, POWER_MAX_ITER);
        let accurate = |v: f64| (v - exact).abs() <= 1e-6 * exact;
        assert!(
            accurate(est.value) || !est.converged,
            "seed {seed}: {} vs {exact}",
            est.value
        );
        let est = dense_spectral_radius(&m, POWER_TOL, 100_000);
        assert!(
            est.converged && accurate(est.value),
            "seed {seed}: {} vs {exact}",
            est.value
        );
    }
}

#[test]
fn graph_spectral_radius_matches_eigendecomposition() {
    for seed in 0..20 {
        let (g, w, a) = random_graph(3000 + seed, 30, 0.2);
        let w = EdgeWeights(w.0.iter().map(|x| x.abs()).collect());
        let a = Dense::from_fn(30, 30, |i, j| a[(i, j)].abs());
        let exact = eigen_radius(&a);
        let est = graph_spectral_radius(&g, &w);
        assert!(
            (est.value - exact).abs() <= 1e-6 * exact.max(1e-12),
            "seed {seed}"
        );
        assert!(est.iterations <= POWER_MAX_ITER);
    }
}

#[test]
fn centered_coupling_radius() {
    // rows sum to zero, so the all-ones start vector lies in the kernel
    let h = Dense::from_rows(&[vec![0.4, -0.4], vec![-0.4, 0.4]]);
    let est = dense_spectral_radius(&h, POWER_TOL, POWER_MAX_ITER);
    assert!((est.value - 0.8).abs() < 1e-9);
}
