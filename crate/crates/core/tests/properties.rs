use proptest::prelude::*;

use topoloss::metrics::brute_force_match;
use topoloss::{
    bottleneck, build_lower_star, build_rips, compute_p, compute_persistence, compute_persistence_dim0, compute_q,
    restoration_match, theorem_step_size, total_persistence, wasserstein, PersistenceDiagram, PointCloud,
    SimplicialComplex, TheoremConstants,
};

fn cloud(max_n: usize, d: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), 2..=max_n)
        .prop_map(|rows| PointCloud::new(rows).unwrap())
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.001..1.0f64).prop_map(|(b, p)| (b, b + p)), 0..=max)
}

fn vertex_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n)
}

fn constants() -> impl Strategy<Value = TheoremConstants> {
    (0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64, 0.1..100.0f64, 1usize..10, 1u32..4).prop_map(
        |(ell0, ell1, ell2, c_x, b, k)| TheoremConstants {
            ell0,
            ell1,
            ell2,
            c_x,
            b,
            k,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rips_values_are_monotone(x in cloud(8, 3)) {
        let f = build_rips(&x, 2, f64::INFINITY).unwrap();
        prop_assert!(f.monotonicity_violation().is_none());
    }

    #[test]
    fn lower_star_values_are_monotone(v in vertex_values(6)) {
        let k = SimplicialComplex::complete(6, 2).unwrap();
        let f = build_lower_star(&k, &v).unwrap();
        prop_assert!(f.monotonicity_violation().is_none());
        for id in 0..f.len() {
            let top = k.vertices(id).iter().map(|&u| v[u]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(f.value(id), top);
        }
    }

    #[test]
    fn rips_value_gradient_matches_finite_differences(x in cloud(6, 2)) {
        let f = build_rips(&x, 1, f64::INFINITY).unwrap();
        let h = 1e-6;
        for id in f.complex().ids_of_dim(1) {
            let value = f.value(id);
            prop_assume!(value > 1e-3);
            let g = f.value_gradient(id, topoloss::FilterInput::Cloud(&x)).unwrap().to_dense(x.as_flat().len());
            for i in 0..x.as_flat().len() {
                let shifted = |s: f64| {
                    let mut c = x.as_flat().to_vec();
                    c[i] += s;
                    let y = PointCloud::from_flat(2, c).unwrap();
                    build_rips(&y, 1, f64::INFINITY).unwrap().value(id)
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-6, "simplex {id} coord {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn dim0_fast_path_equals_reduction(x in cloud(10, 3)) {
        let f = build_rips(&x, 1, f64::INFINITY).unwrap();
        prop_assert_eq!(compute_persistence_dim0(&f).unwrap(), compute_persistence(&f, 0).unwrap().of_dim(0));
    }

    #[test]
    fn diagram_shape(x in cloud(8, 2)) {
        let f = build_rips(&x, 2, f64::INFINITY).unwrap();
        let d = compute_persistence(&f, 1).unwrap();
        prop_assert_eq!(d.of_dim(0).essential_count(), 1);
        prop_assert_eq!(d.of_dim(0).len(), x.len());
        for p in &d.points {
            prop_assert!(p.death.is_none_or(|death| death >= p.birth));
        }
    }

    #[test]
    fn wasserstein_is_a_metric(a in pairs(4), b in pairs(4), c in pairs(4)) {
        let (a, b, c) = (
            PersistenceDiagram::from_pairs(0, &a),
            PersistenceDiagram::from_pairs(0, &b),
            PersistenceDiagram::from_pairs(0, &c),
        );
        for q in [1.0, 2.0, f64::INFINITY] {
            let d = |x: &PersistenceDiagram, y: &PersistenceDiagram| wasserstein(x, y, q).unwrap().0;
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }

    #[test]
    fn bottleneck_is_the_smallest_order(a in pairs(5), b in pairs(5)) {
        let (a, b) = (PersistenceDiagram::from_pairs(0, &a), PersistenceDiagram::from_pairs(0, &b));
        let inf = bottleneck(&a, &b).unwrap();
        prop_assert!((inf - wasserstein(&a, &b, f64::INFINITY).unwrap().0).abs() < 1e-12);
        prop_assert!(inf <= wasserstein(&a, &b, 2.0).unwrap().0 + 1e-12);
        prop_assert!(wasserstein(&a, &b, 2.0).unwrap().0 <= wasserstein(&a, &b, 1.0).unwrap().0 + 1e-12);
    }

    #[test]
    fn lower_star_stability(v in vertex_values(7), delta in prop::collection::vec(-0.2..0.2f64, 7)) {
        let k = SimplicialComplex::complete(7, 2).unwrap();
        let w: Vec<f64> = v.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let sup = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let a = compute_persistence(&build_lower_star(&k, &v).unwrap(), 1).unwrap();
        let b = compute_persistence(&build_lower_star(&k, &w).unwrap(), 1).unwrap();
        for dim in 0..=1 {
            prop_assert!(bottleneck(&a.of_dim(dim), &b.of_dim(dim)).unwrap() <= sup + 1e-9);
        }
    }

    #[test]
    fn total_persistence_difference_bound(
        v in vertex_values(7),
        delta in prop::collection::vec(-0.2..0.2f64, 7),
        k in 2u32..4,
    ) {
        let cx = SimplicialComplex::complete(7, 2).unwrap();
        let w: Vec<f64> = v.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let sup = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let a = compute_persistence(&build_lower_star(&cx, &v).unwrap(), 1).unwrap();
        let b = compute_persistence(&build_lower_star(&cx, &w).unwrap(), 1).unwrap();
        let lhs = (total_persistence(&a, k) - total_persistence(&b, k)).abs();
        let rhs = 2.0 * k as f64 * sup * (total_persistence(&a, k - 1) + total_persistence(&b, k - 1));
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn restoration_matching_is_optimal(truth in pairs(3), pred in pairs(5)) {
        prop_assume!(!truth.is_empty());
        let pred = PersistenceDiagram::from_pairs(0, &pred);
        let fast = restoration_match(&truth, &pred);
        let slow = brute_force_match(&truth, &pred).unwrap();
        prop_assert!(fast.is_injective());
        prop_assert_eq!(fast.pairs.len(), truth.len());
        prop_assert!((fast.cost - slow.cost).abs() <= 1e-12);
    }

    #[test]
    fn step_size_shrinks_with_data_bound(c in constants(), lt in 0.0..0.1f64, lr in 1e-4..0.1f64, eps in 1e-6..1e-1f64) {
        let eta = theorem_step_size(&c, lt, lr, eps).unwrap();
        let doubled = TheoremConstants { c_x: 2.0 * c.c_x, ..c };
        prop_assert!(theorem_step_size(&doubled, lt, lr, eps).unwrap() <= eta);
        prop_assert!(theorem_step_size(&c, lt, lr, 2.0 * eps).unwrap() >= eta);
        prop_assert!(eta <= 1.0 / (2.0 * c.c2(lt, lr)));
    }

    #[test]
    fn affinities_are_distributions(x in cloud(12, 3)) {
        prop_assume!(x.len() >= 4);
        let (p, _) = compute_p(&x, 1.5).unwrap();
        let q = compute_q(&x).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        prop_assert!((q.sum() - 1.0).abs() < 1e-9);
        prop_assert!(p.values().iter().chain(q.values()).all(|v| *v >= 0.0));
    }
}
