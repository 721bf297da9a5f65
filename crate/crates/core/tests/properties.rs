use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracwalk::gauge::{
    check_conditions, check_conditions_with, gauge_action, recover_interaction, solve_gauge, GaugeElement,
};
use fracwalk::graph::{all_pairs_distances, leaf_set, random_admissible_graph, random_connected_graph};
use fracwalk::io::{matrix_from_value, matrix_to_value, to_json};
use fracwalk::matrix::{max_abs, max_abs_diff, Matrix};
use fracwalk::reconstruct::{
    classify_pairs, kernel_from_interaction, pair_ratio, pair_ratio_matrix, pair_ratio_via,
    reconstruct_full, KernelMatrix,
};
use fracwalk::recovery::{
    canonical_from_factors, full_rank_factorization, pseudoinverse, recover_canonical, verify_redundancy,
};
use fracwalk::walk::{blocks, build_interaction, exact_observation_data, normalize, TransitionMatrix};
use fracwalk::{Conductivity, Execution, Graph};

fn gamma(n: usize, rng: &mut ChaCha8Rng) -> Conductivity {
    Conductivity::new((0..n).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap()
}

fn admissible(seed: u64) -> (Graph, Conductivity, TransitionMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_admissible_graph(1 + (seed % 5) as usize, 2.5, seed).unwrap();
    let gm = gamma(g.n(), &mut rng);
    let t = normalize(&build_interaction(&g, &gm, 2.5, 1.0).unwrap()).unwrap();
    (g, gm, t)
}

fn random_invertible(m: usize, rng: &mut ChaCha8Rng) -> GaugeElement {
    let a = Matrix::from_fn(m, m, |i, j| {
        rng.random_range(-0.5..0.5) + if i == j { 1.5 } else { 0.0 }
    });
    GaugeElement::new(a, 1e-9).unwrap()
}

fn penrose(a: &Matrix, x: &Matrix) -> f64 {
    let r1 = max_abs_diff(&(a * x * a), a);
    let r2 = max_abs_diff(&(x * a * x), x);
    let ax = a * x;
    let xa = x * a;
    let r3 = max_abs_diff(&ax, &ax.transpose());
    let r4 = max_abs_diff(&xa, &xa.transpose());
    r1.max(r2).max(r3).max(r4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_identities_hold(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = rng.random_range(1..n);
        let g = random_connected_graph(n, obs, 0.2, &mut rng).unwrap();
        let t = normalize(&build_interaction(&g, &gamma(n, &mut rng), 2.5, 1.0).unwrap()).unwrap();
        let b = blocks(&t.p, obs);
        prop_assert_eq!(b.reassemble(), t.p.clone());
        let data = exact_observation_data(&t.p, obs, 3).unwrap();
        let g2 = &b.p12 * &b.p21;
        prop_assert!(max_abs_diff(&data.mats[1], &(&b.p11 * &b.p11 + &g2)) <= 1e-12);
        let rhs3 = &b.p11 * &b.p11 * &b.p11 + &b.p11 * &g2 + &g2 * &b.p11 + &b.p12 * &b.p22 * &b.p21;
        prop_assert!(max_abs_diff(&data.mats[2], &rhs3) <= 1e-12);
    }

    #[test]
    fn observation_data_is_gauge_invariant(seed in any::<u64>()) {
        let (g, _, t) = admissible(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let a = random_invertible(g.hidden_count(), &mut rng);
        let moved = gauge_action(&a, &t.p, g.observable_count()).unwrap();
        let n_obs = g.observable_count();
        prop_assert!(verify_redundancy(&t.p, &moved, n_obs, 6).unwrap() <= 1e-10);
    }

    #[test]
    fn diagonal_gauges_keep_data_and_symmetry(seed in any::<u64>()) {
        let (g, _, t) = admissible(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let d: Vec<f64> = (0..g.hidden_count()).map(|_| rng.random_range(0.3..3.0)).collect();
        let moved = gauge_action(&GaugeElement::diagonal(&d).unwrap(), &t.p, g.observable_count()).unwrap();
        prop_assert!(verify_redundancy(&t.p, &moved, g.observable_count(), 6).unwrap() <= 1e-12);
        let report = check_conditions(&moved, false, 1e-10);
        prop_assert!(report.p3_residual.unwrap() <= 1e-10);
        let rec = recover_interaction(&moved, 1e-10).unwrap();
        prop_assert!(max_abs_diff(&rec.c, &rec.c.transpose()) <= 1e-10 * max_abs(&rec.c));
    }

    #[test]
    fn any_factorization_gives_an_equivalent_representative(seed in any::<u64>()) {
        let (g, _, t) = admissible(seed);
        let n_obs = g.observable_count();
        let data = exact_observation_data(&t.p, n_obs, 3).unwrap();
        let base = recover_canonical(&data, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let r = random_invertible(base.rank, &mut rng);
        let other = canonical_from_factors(&data, &base.r1 * r.matrix(), r.inverse() * &base.r2).unwrap();
        prop_assert!(verify_redundancy(&base.q, &other.q, n_obs, 8).unwrap() <= 1e-10);
        let a = solve_gauge(&other.q, &base.q, n_obs, 1e-8).unwrap();
        prop_assert!(max_abs_diff(a.matrix(), r.inverse()) <= 1e-6 * max_abs(r.inverse()));
        // the truth is one more member of the same class
        let back = solve_gauge(&t.p, &base.q, n_obs, 1e-8).unwrap();
        prop_assert!(max_abs_diff(&gauge_action(&back, &base.q, n_obs).unwrap(), &t.p) <= 1e-8);
    }

    #[test]
    fn pseudoinverse_satisfies_penrose(seed in any::<u64>(), m in 1usize..7, n in 1usize..7, rank in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rank.min(m).min(n);
        let f = Matrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0));
        let h = Matrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        let a = f * h;
        let x = pseudoinverse(&a);
        prop_assert!(penrose(&a, &x) <= 1e-8 * (1.0 + max_abs(&x)).powi(2));
        let frf = full_rank_factorization(&a, 1e-9);
        prop_assert!(max_abs_diff(&(&frf.left * &frf.right), &a) <= 1e-12);
    }

    #[test]
    fn reconstruction_round_trip(seed in any::<u64>()) {
        let (g, gm, _) = admissible(seed);
        let c = build_interaction(&g, &gm, 2.5, 1.0).unwrap();
        let ones = vec![1.0; g.n()];
        let fm = kernel_from_interaction(&c.c, 2.5, &ones, &ones).unwrap();
        let res = reconstruct_full(&fm, 1e-6).unwrap();
        prop_assert_eq!(res.edges.clone(), g.edges().collect::<Vec<_>>());
        prop_assert_eq!(res.distances.clone(), all_pairs_distances(&g).unwrap());
        prop_assert_eq!(res.leaves.clone(), leaf_set(&g));
        prop_assert_eq!(res.sigma1[0], 1.0);
    }

    #[test]
    fn ratios_do_not_depend_on_the_third_vertex(seed in any::<u64>()) {
        let (g, gm, _) = admissible(seed);
        let c = build_interaction(&g, &gm, 2.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let g1: Vec<f64> = (0..g.n()).map(|_| rng.random_range(0.5..2.0)).collect();
        let fm = kernel_from_interaction(&c.c, 2.5, &g1, &g1).unwrap();
        let n = g.n();
        let a = rng.random_range(0..n);
        let b = (a + 1 + rng.random_range(0..n - 1)) % n;
        let base = pair_ratio(&fm, a, b).unwrap();
        for c in (0..n).filter(|&c| c != a && c != b) {
            prop_assert!((pair_ratio_via(&fm, a, b, c).unwrap() - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn ratio_laws_from_true_distances(seed in any::<u64>()) {
        let (g, gm, _) = admissible(seed);
        let c = build_interaction(&g, &gm, 2.5, 1.0).unwrap();
        let ones = vec![1.0; g.n()];
        let fm = kernel_from_interaction(&c.c, 2.5, &ones, &ones).unwrap();
        let d = all_pairs_distances(&g).unwrap();
        let leaves = leaf_set(&g);
        let close = |v: f64, w: f64| (v - w).abs() <= 1e-9 * w.max(1.0);
        for &a in &leaves {
            let own = g.neighbors(a)[0];
            for &b in &leaves {
                let other = g.neighbors(b)[0];
                if a == b {
                    continue;
                }
                let dd = d.get(a, b) as f64;
                prop_assert!(close(pair_ratio(&fm, a, b).unwrap(), (dd - 1.0).powi(2)));
                if other != own {
                    let dn = d.get(a, other) as f64;
                    prop_assert!(close(pair_ratio(&fm, a, other).unwrap(), dn * dn - 1.0));
                    let du = d.get(own, other) as f64;
                    prop_assert!(close(pair_ratio(&fm, own, other).unwrap(), (du + 1.0).powi(2)));
                }
            }
            let r = pair_ratio(&fm, a, own).unwrap();
            prop_assert!(r > 1.0 && r < 2.0);
        }
        let stats = classify_pairs(&fm, 1e-6).unwrap();
        prop_assert_eq!(stats.leaves, leaves);
    }

    #[test]
    fn parallel_kernels_match_sequential(seed in any::<u64>()) {
        let (g, gm, t) = admissible(seed);
        let c = build_interaction(&g, &gm, 2.5, 1.0).unwrap();
        let ones = vec![1.0; g.n()];
        let fm = kernel_from_interaction(&c.c, 2.5, &ones, &ones).unwrap();
        prop_assert_eq!(
            pair_ratio_matrix(&fm, Execution::Sequential).unwrap(),
            pair_ratio_matrix(&fm, Execution::Parallel).unwrap()
        );
        prop_assert_eq!(
            check_conditions_with(&t.p, false, 1e-10, Execution::Sequential),
            check_conditions_with(&t.p, false, 1e-10, Execution::Parallel)
        );
    }

    #[test]
    fn matrices_survive_json(seed in any::<u64>(), m in 0usize..5, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(m, n, |_, _| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-200..200)));
        let text = to_json(&matrix_to_value(&a));
        let back = matrix_from_value(&serde_json::from_str(&text).unwrap()).unwrap();
        if m > 0 {
            prop_assert_eq!(back, a);
        }
    }

    #[test]
    fn kernel_rejects_nonpositive_entries(x in 0usize..4, y in 0usize..4) {
        prop_assume!(x != y);
        let mut f = Matrix::from_element(4, 4, 1.0);
        f[(x, y)] = 0.0;
        prop_assert!(KernelMatrix::new(f).is_err());
    }
}
