use proptest::prelude::*;
use qgrf_core::coupling::{mod1, CouplingScheme, TrvStream};
use qgrf_core::dense::DenseMatrix;
use qgrf_core::features::{build_feature_matrix_with, Execution};
use qgrf_core::graph::{generate_er, grf_walk_graph, normalized_laplacian};
use qgrf_core::kernels::relative_frobenius_error;
use qgrf_core::theory::{conditional_length_pmf, correlation_matrices, TheoryParams};
use qgrf_core::WalkConfig;

fn scheme() -> impl Strategy<Value = CouplingScheme> {
    prop_oneof![
        Just(CouplingScheme::Iid),
        Just(CouplingScheme::AntitheticPairs),
        Just(CouplingScheme::OffsetEnsemble { delta: 0.5, group_size: 2 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feature_rows_are_well_formed(n in 4usize..14, seed in any::<u64>(), s in scheme(), sigma in 0.05f64..0.95, p in 0.1f64..0.5) {
        let g = generate_er(n, 0.5, seed).unwrap();
        let walk = grf_walk_graph(&g, sigma).unwrap();
        let cfg = WalkConfig::new(4, p, s, seed ^ 1);
        let a = build_feature_matrix_with(&walk, &cfg, Execution::Parallel).unwrap();
        let b = build_feature_matrix_with(&walk, &cfg, Execution::Serial).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.n(), n);
        for (i, row) in a.rows().iter().enumerate() {
            prop_assert_eq!(row.source, i);
            prop_assert!(row.load(i) >= 1.0);
            prop_assert!(row.entries().windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert!(row.entries().iter().all(|&(_, v)| v.is_finite() && v >= 0.0));
        }
    }

    #[test]
    fn antithetic_trvs_never_both_below_p(seed in any::<u64>(), p in 0.01f64..=0.5) {
        let s = TrvStream::new(CouplingScheme::AntitheticPairs, 8, seed).unwrap();
        for step in 0..20 {
            let t = s.draw_step_trvs(step);
            prop_assert!(t.iter().all(|&x| (0.0..1.0).contains(&x)));
            for pair in t.chunks(2) {
                prop_assert!(!(pair[0] < p && pair[1] < p));
            }
        }
    }

    #[test]
    fn mod1_in_unit_interval(x in -1e6f64..1e6) {
        let y = mod1(x);
        prop_assert!((0.0..1.0).contains(&y));
    }

    #[test]
    fn pmf_sums_to_one(p in 0.05f64..=0.5, m in 0u32..15) {
        let total: f64 = (0..20_000).map(|i| conditional_length_pmf(p, m, i).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_spectrum_in_zero_two(n in 3usize..16, seed in any::<u64>()) {
        let g = generate_er(n, 0.5, seed).unwrap();
        let ev = normalized_laplacian(&g).unwrap().symmetric_eigenvalues().unwrap();
        prop_assert!(ev[0] > -1e-12 && ev[0] < 1e-9);
        prop_assert!(ev.iter().all(|&e| e <= 2.0 + 1e-12));
    }

    #[test]
    fn frobenius_error_non_negative(vals in prop::collection::vec(-5.0f64..5.0, 9), noise in prop::collection::vec(-1.0f64..1.0, 9)) {
        let a = DenseMatrix::from_row_major(3, &vals);
        prop_assume!(a.frobenius_norm() > 1e-6);
        let b = DenseMatrix::from_row_major(3, &vals.iter().zip(&noise).map(|(x, e)| x + e).collect::<Vec<_>>());
        let e = relative_frobenius_error(&a, &b).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(relative_frobenius_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn e_matrix_is_nsd(p in 0.01f64..=0.5, w in 0.01f64..0.9, lam in prop::collection::vec(-1.0f64..1.0, 2..12)) {
        let mats = correlation_matrices(&TheoryParams::new(p, w, lam)).unwrap();
        let top = *mats.e.symmetric_eigenvalues().unwrap().last().unwrap();
        prop_assert!(top <= 1e-10 * mats.e.frobenius_norm());
    }
}
