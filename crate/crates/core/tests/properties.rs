use lcm_pmrf::coupling::CouplingMatrix;
use lcm_pmrf::dataset::rng_from_seed;
use lcm_pmrf::graph::{init_weights, EdgeWeights, SparseGraph};
use lcm_pmrf::learn::{fit, LcmProblem, Regularizer};
use lcm_pmrf::linbp::{residual, solve_linbp, StopRule};
use lcm_pmrf::matrix::Dense;
use lcm_pmrf::oracle::{exact_marginals, TinyPmrf};
use lcm_pmrf::priors::{label_priors, PriorMatrix};
use lcm_pmrf::Hyperparams;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn edge_list(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n)))
}

fn priors(seed: u64, n: usize, c: usize) -> PriorMatrix {
    let mut rng = rng_from_seed(seed);
    let mut q = Dense::from_fn(n, c, |_, _| rng.gen_range(0.05..1.0));
    for v in 0..n {
        let s: f64 = q.row(v).iter().sum();
        q.row_mut(v).iter_mut().for_each(|x| *x /= s);
    }
    PriorMatrix::from_distributions(q).unwrap()
}

fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng_from_seed(seed));
    p
}

fn permute_rows(m: &Dense, perm: &[usize]) -> Dense {
    let mut out = Dense::zeros(m.rows(), m.cols());
    for (v, &pv) in perm.iter().enumerate() {
        out.row_mut(pv).copy_from_slice(m.row(v));
    }
    out
}

/// Random labeled instance for the learner: `(graph, priors, labels, train)`.
fn learner_instance(
    seed: u64,
    n: usize,
    c: usize,
) -> (SparseGraph, PriorMatrix, Vec<Option<usize>>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    for _ in 0..n {
        edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    let g = SparseGraph::build(&edges, n).unwrap();
    let labels: Vec<Option<usize>> = (0..n).map(|v| Some(v % c)).collect();
    let mut train: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).chain([0]).collect();
    train.sort_unstable();
    train.dedup();
    let q = label_priors(&labels, &train, n, c).unwrap();
    // blend label priors with noise so unlabeled rows are not all zero
    let noise = priors(seed ^ 0x5eed, n, c);
    let mixed = Dense::from_fn(n, c, |v, k| {
        q.centered()[(v, k)] + 0.5 * noise.centered()[(v, k)]
    });
    (g, PriorMatrix::from_centered(mixed).unwrap(), labels, train)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn build_ignores_edge_order((n, edges) in edge_list(12), seed in any::<u64>()) {
        let mut shuffled = edges.clone();
        shuffled.shuffle(&mut rng_from_seed(seed));
        // flip orientation of every other edge too
        for (i, e) in shuffled.iter_mut().enumerate() {
            if i % 2 == 1 {
                *e = (e.1, e.0);
            }
        }
        let a = SparseGraph::build(&edges, n).unwrap();
        let b = SparseGraph::build(&shuffled, n).unwrap();
        prop_assert_eq!(a.degrees(), b.degrees());
        prop_assert_eq!(init_weights(&a), init_weights(&b));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn half_edges_share_a_weight((n, edges) in edge_list(12)) {
        let g = SparseGraph::build(&edges, n).unwrap();
        let w = EdgeWeights((0..g.edge_count()).map(|e| 0.1 + e as f64 / 7.0).collect());
        for &(u, v) in g.edges() {
            prop_assert_eq!(
                w.between(&g, u, v).unwrap().to_bits(),
                w.between(&g, v, u).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn priors_are_centered(seed in any::<u64>(), n in 1usize..20, c in 2usize..6) {
        let q = priors(seed, n, c);
        for r in q.centered().row_iter() {
            prop_assert!(r.iter().sum::<f64>().abs() <= 1e-9);
        }
    }

    #[test]
    fn linbp_is_permutation_equivariant((n, edges) in edge_list(10), seed in any::<u64>(), c in 2usize..=3) {
        let g = SparseGraph::build(&edges, n).unwrap();
        let q = priors(seed, n, c);
        let h = CouplingMatrix::homophilous(c).unwrap().scaled(0.5);
        let w = init_weights(&g);
        let perm = permutation(seed.wrapping_add(1), n);
        let gp = g.relabel(&perm).unwrap();
        // weights follow their edges into the relabeled record order
        let mut wp = vec![0.0; gp.edge_count()];
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            wp[gp.edge_index(perm[u], perm[v]).unwrap()] = w.get(e);
        }
        let qp = PriorMatrix::from_centered(permute_rows(q.centered(), &perm)).unwrap();
        let stop = StopRule::Fixed(15);
        let a = solve_linbp(&q, &g, &w, &h, stop).unwrap();
        let b = solve_linbp(&qp, &gp, &EdgeWeights(wp), &h, stop).unwrap();
        // relabeling changes the neighbor summation order, so only rounding differs
        prop_assert!(permute_rows(&a.beliefs.p, &perm).max_abs_diff(&b.beliefs.p) <= 1e-12);
    }

    #[test]
    fn linbp_residual_and_geometric_decay((n, edges) in edge_list(10), seed in any::<u64>(), c in 2usize..=3, s in 0.2f64..1.0) {
        let g = SparseGraph::build(&edges, n).unwrap();
        let q = priors(seed, n, c);
        let w = init_weights(&g);
        // ρ(W) ≤ 1 for degree-normalized weights and ρ(H) = 0.8·s for C = 2, 0.85·s for C = 3
        let h = CouplingMatrix::homophilous(c).unwrap().scaled(s);
        let rho = match c { 2 => 0.8 * s, _ => 0.85 * s };
        let tol = 1e-10;
        let sol = solve_linbp(&q, &g, &w, &h, StopRule::Tolerance { tol, max_iter: 10_000 }).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(residual(&q, &g, &w, &h, &sol.beliefs.p).unwrap() <= 10.0 * tol);
        let steps = &sol.step_sizes;
        let k = steps.len() as i32;
        prop_assert!(steps[steps.len() - 1] <= steps[0] * (rho + 0.05).powi(k - 1) + 1e-15);
    }

    #[test]
    fn exact_marginals_are_permutation_invariant(seed in any::<u64>(), n in 1usize..=6, c in 2usize..=3) {
        let mut rng = rng_from_seed(seed);
        let phi = Dense::from_fn(n, c, |_, _| rng.gen_range(0.1..1.0));
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.4) {
                    edges.push((u, v, Dense::from_fn(c, c, |i, j| if i == j { 0.7 } else { 0.3 })));
                }
            }
        }
        let perm = permutation(seed.wrapping_add(7), n);
        let permuted_edges = edges.iter().map(|(u, v, psi)| (perm[*u], perm[*v], psi.clone())).collect();
        let a = exact_marginals(&TinyPmrf::new(phi.clone(), edges).unwrap());
        let b = exact_marginals(&TinyPmrf::new(permute_rows(&phi, &perm), permuted_edges).unwrap());
        prop_assert!(permute_rows(&a, &perm).max_abs_diff(&b) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn learner_keeps_symmetry_and_is_deterministic(seed in any::<u64>(), n in 3usize..=10, c in 2usize..=3) {
        let (g, q, labels, train) = learner_instance(seed, n, c);
        let hp = Hyperparams::default();
        let problem = LcmProblem { graph: &g, priors: &q, labels: &labels, train: &train, hp: &hp };
        let a = fit(&problem).unwrap();
        let b = fit(&problem).unwrap();
        let h = a.state.coupling.centered();
        prop_assert_eq!(h.clone(), h.transpose());
        prop_assert_eq!(a.state.weights.len(), g.edge_count());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn regularizers_agree_at_zero_lambda(seed in any::<u64>(), n in 3usize..=10, c in 2usize..=3) {
        let (g, q, labels, train) = learner_instance(seed, n, c);
        let run = |reg| {
            let hp = Hyperparams { lambda: 0.0, regularizer: reg, ..Default::default() };
            let problem = LcmProblem { graph: &g, priors: &q, labels: &labels, train: &train, hp: &hp };
            fit(&problem).unwrap()
        };
        let base = run(Regularizer::Consistency);
        for reg in [Regularizer::L1, Regularizer::L2] {
            let other = run(reg);
            prop_assert_eq!(&other.state, &base.state);
            let a: Vec<_> = other.history.iter().map(|r| r.objective.total.to_bits()).collect();
            let b: Vec<_> = base.history.iter().map(|r| r.objective.total.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn small_steps_descend(seed in any::<u64>(), n in 3usize..=10, c in 2usize..=3, r in 0usize..4) {
        let (g, q, labels, train) = learner_instance(seed, n, c);
        let d = Hyperparams::default();
        let hp = Hyperparams {
            gamma1: d.gamma1 / 100.0,
            gamma2: d.gamma2 / 100.0,
            regularizer: Regularizer::ALL[r],
            ..d
        };
        let problem = LcmProblem { graph: &g, priors: &q, labels: &labels, train: &train, hp: &hp };
        let history = fit(&problem).unwrap().history;
        for pair in history.windows(2) {
            if pair[0].outer == pair[1].outer {
                prop_assert!(pair[1].objective.total <= pair[0].objective.total + 1e-10,
                    "{:?} -> {:?}", pair[0], pair[1]);
            }
        }
    }
}
