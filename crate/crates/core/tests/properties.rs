use ident_core::denoise::{smoother_filter, SmootherConfig};
use ident_core::grid::{add_gaussian_noise, Boundary, Field, Grid, NoiseSpec};
use ident_core::metrics::{coefficient_errors, support_scores};
use ident_core::select::rr_select;
use ident_core::sparse::{lasso_matrix, least_squares_on_support, subspace_pursuit};
use ident_core::system::{column_normalize, LinearSystem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(DVector::from_vec)
}

fn system(rows: usize, cols: usize) -> impl Strategy<Value = LinearSystem> {
    (matrix(rows, cols), vector(rows)).prop_map(|(a, b)| LinearSystem::from_matrix(a, b).unwrap())
}

fn residual_of(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> f64 {
    let sub = a.select_columns(cols);
    let c = sub.clone().svd(true, true).solve(b, 1e-12).unwrap();
    (b - sub * c).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothers_are_linear(
        u in prop::collection::vec(-1.0f64..1.0, 40),
        v in prop::collection::vec(-1.0f64..1.0, 40),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        periodic in any::<bool>(),
    ) {
        let boundary = if periodic { Boundary::Periodic } else { Boundary::Dirichlet };
        for cfg in [SmootherConfig::lsma(), SmootherConfig::mls(Some(0.1), 2), SmootherConfig::mls(Some(0.15), 4)] {
            let f = smoother_filter(40, 0.025, &cfg, boundary).unwrap();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = f.apply(&mix);
            let (su, sv) = (f.apply(&u), f.apply(&v));
            for i in 0..40 {
                prop_assert!((lhs[i] - (a * su[i] + b * sv[i])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ls_residual_invariant_under_column_rescaling(
        sys in system(30, 5),
        scales in prop::collection::vec(0.01f64..100.0, 5),
        pick in prop::collection::btree_set(0usize..5, 1..=4),
    ) {
        let support: Vec<usize> = pick.into_iter().collect();
        let base = least_squares_on_support(&sys, &support).unwrap();
        let mut scaled = sys.matrix.clone();
        for (j, s) in scales.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        let rescaled = least_squares_on_support(&LinearSystem::from_matrix(scaled, sys.rhs.clone()).unwrap(), &support).unwrap();
        prop_assert!((base.residual - rescaled.residual).abs() <= 1e-8 * (1.0 + base.residual));
        for &j in &support {
            let unscaled = rescaled.system_coeffs[j] * scales[j];
            prop_assert!((unscaled - base.system_coeffs[j]).abs() <= 1e-8 * (1.0 + base.system_coeffs[j].abs()));
        }
    }

    #[test]
    fn sp_residual_between_exhaustive_minimum_and_initial_top_k(sys in system(25, 6), k in 1usize..=3) {
        let sys = column_normalize(&sys);
        let sp = subspace_pursuit(&sys, k).unwrap();
        prop_assert_eq!(sp.support.len(), k);
        let corr = sys.matrix.tr_mul(&sys.rhs);
        let mut order: Vec<usize> = (0..sys.ncols()).collect();
        order.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
        let mut initial = order[..k].to_vec();
        initial.sort_unstable();
        let r0 = residual_of(&sys.matrix, &sys.rhs, &initial);
        prop_assert!(sp.residual <= r0 + 1e-10);
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << sys.ncols()) {
            if mask.count_ones() as usize == k {
                let cols: Vec<usize> = (0..sys.ncols()).filter(|j| mask & (1 << j) != 0).collect();
                best = best.min(residual_of(&sys.matrix, &sys.rhs, &cols));
            }
        }
        prop_assert!(sp.residual >= best - 1e-10);
    }

    #[test]
    fn lasso_objective_never_increases(a in matrix(20, 5), b in vector(20), frac in 0.0f64..1.0) {
        let lambda = frac * a.tr_mul(&b).amax();
        let res = lasso_matrix(&a, &b, lambda, 1e-10, 2000).unwrap();
        for w in res.objective.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn rr_select_is_scale_free(
        drops in prop::collection::vec(0.0f64..1.0, 12),
        scale in 1e-6f64..1e6,
        rho in 0.001f64..0.2,
    ) {
        let mut r = vec![10.0];
        for d in &drops {
            let last = *r.last().unwrap();
            r.push(last * (1.0 - 0.5 * d));
        }
        let scaled: Vec<f64> = r.iter().map(|v| v * scale).collect();
        let a = rr_select(&r, 5, rho).unwrap();
        let b = rr_select(&scaled, 5, rho).unwrap();
        prop_assert_eq!(a.k, b.k);
        prop_assert_eq!(a.fallback, b.fallback);
    }

    #[test]
    fn support_scores_are_bounded_and_jaccard_detects_equality(
        hat in prop::collection::btree_set(0u8..12, 0..8),
        truth in prop::collection::btree_set(0u8..12, 1..8),
    ) {
        let h: Vec<u8> = hat.iter().copied().collect();
        let t: Vec<u8> = truth.iter().copied().collect();
        let s = support_scores(&h, &t).unwrap();
        for v in [s.tpr, s.ppv, s.jaccard] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(s.jaccard == 1.0, hat == truth);
        let inter: BTreeSet<_> = hat.intersection(&truth).collect();
        prop_assert!((s.tpr - inter.len() as f64 / truth.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn coefficient_errors_vanish_only_at_truth(
        truth in prop::collection::vec(0.1f64..2.0, 1..6),
        delta in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let hat: Vec<f64> = truth.iter().zip(&delta).map(|(t, d)| t + d).collect();
        let e = coefficient_errors(&hat, &truth).unwrap();
        prop_assert!(e.e_c >= 0.0);
        let moved = truth.iter().zip(&hat).any(|(a, b)| a != b);
        prop_assert_eq!(e.e_c == 0.0, !moved);
        prop_assert_eq!(coefficient_errors(&truth, &truth).unwrap().e_c, 0.0);
    }

    #[test]
    fn noise_is_reproducible_per_seed(seed in any::<u64>(), level in 0.0f64..0.5) {
        let g = Grid::on_interval(0.0, 1.0, 32, 1.0, 8, Boundary::Periodic).unwrap();
        let clean = Field::from_fn(g, |x, t| (6.0 * x).sin() + t).unwrap();
        let a = add_gaussian_noise(&clean, &NoiseSpec::percent(100.0 * level, seed)).unwrap();
        let b = add_gaussian_noise(&clean, &NoiseSpec::percent(100.0 * level, seed)).unwrap();
        prop_assert_eq!(a.values(), b.values());
        let s1 = NoiseSpec::nsr(level, seed).sigma(&clean).unwrap();
        let s2 = NoiseSpec::nsr(2.0 * level, seed).sigma(&clean).unwrap();
        prop_assert!(s1 >= 0.0 && (s2 - 2.0 * s1).abs() <= 1e-12 * (1.0 + s2));
    }
}
