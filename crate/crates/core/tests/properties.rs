mod common;

use proptest::prelude::*;
use seqcop::bandwidth::{cross_covariance, ell_from_constants, lag_window_estimates};
use seqcop::bootstrap::replicate_bhat;
use seqcop::empirical::{rank_threshold, seq_copula_process};
use seqcop::inference::{order_statistic_quantile, p_value};
use seqcop::kernels::KernelFamily;
use seqcop::multipliers::generate;
use seqcop::{
    BaseLaw, CopulaSpec, DataMatrix, DataModel, KernelSpec, ModelKind, MultiplierConfig, MultiplierMethod,
    PseudoObsWindow,
};

fn family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Truncated),
        Just(KernelFamily::Bartlett),
        Just(KernelFamily::Parzen),
        (0.0..0.95f64).prop_map(|c| KernelFamily::FlatTop { c }),
        (1u32..=8).prop_map(|p| KernelFamily::UniformSum { p }),
    ]
}

fn sample(max_n: usize) -> impl Strategy<Value = DataMatrix> {
    (3..=max_n, any::<bool>()).prop_flat_map(|(n, ties)| {
        let cell = if ties {
            (0u8..5).prop_map(f64::from).boxed()
        } else {
            (0.0..1.0f64).boxed()
        };
        prop::collection::vec(cell, n * 2).prop_map(move |v| DataMatrix::new(n, 2, v).unwrap())
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_shape(fam in family(), x in -2.0..2.0f64) {
        let k = KernelSpec::weight(fam).unwrap();
        prop_assert_eq!(k.value(0.0), 1.0);
        prop_assert!((k.value(x) - k.value(-x)).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&k.value(x)));
        if x.abs() > 1.0 {
            prop_assert_eq!(k.value(x), 0.0);
        }
    }

    #[test]
    fn kernel_lipschitz(fam in family(), x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let lam = match fam {
            KernelFamily::FlatTop { c } => 1.0 / (1.0 - c),
            KernelFamily::Bartlett => 1.0,
            KernelFamily::Parzen => 3.0,
            KernelFamily::UniformSum { p } if p >= 2 => f64::from(p),
            // jumps at ±1
            _ => return Ok(()),
        };
        let k = KernelSpec::weight(fam).unwrap();
        prop_assert!((k.value(x) - k.value(y)).abs() <= lam * (x - y).abs() + 1e-12);
    }

    #[test]
    fn self_convolution_normalized(fam in family(), x in 1.0..3.0f64) {
        let k = KernelSpec::weight(fam).unwrap();
        prop_assert!((k.self_convolution_normalized(0.0).unwrap() - 1.0).abs() < 1e-9);
        if x > 1.0 {
            prop_assert!(k.self_convolution_normalized(x).unwrap().abs() < 1e-12);
            prop_assert!(k.self_convolution_normalized(-x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_admits_exactly_the_ranks_below(m in 1usize..500, r in 0i64..1000, bump in -2i64..=2) {
        let r = r.min(2 * m as i64);
        let u = r as f64 / (2 * m) as f64;
        let u = if bump == 0 { u } else { u + bump as f64 * 1e-9 };
        let t = rank_threshold(m, u);
        if t >= 0 {
            prop_assert!(t as f64 / (2 * m) as f64 <= u);
        }
        if t < 2 * m as i64 {
            prop_assert!((t + 1) as f64 / (2 * m) as f64 > u);
        }
    }

    #[test]
    fn copula_monotone_and_normalized(data in sample(12), u in point(), du in point()) {
        let w = PseudoObsWindow::full(&data);
        let v: Vec<f64> = u.iter().zip(&du).map(|(a, b)| (a + b).min(1.0)).collect();
        prop_assert!(w.empirical_copula(&u) <= w.empirical_copula(&v));
        prop_assert_eq!(w.empirical_copula(&[1.0, 1.0]), 1.0);
        let tiny = 0.5 / data.n() as f64;
        prop_assert_eq!(w.empirical_copula(&[tiny, u[1]]), 0.0);
    }

    #[test]
    fn process_vanishes_at_the_top_corner(data in sample(12)) {
        let w = PseudoObsWindow::full(&data);
        let c_ref = |u: &[f64]| w.empirical_copula(u);
        let v = seq_copula_process(&data, 0.0, 1.0, &[1.0, 1.0], &c_ref).unwrap();
        prop_assert_eq!(v, 0.0);
    }

    #[test]
    fn bhat_is_linear_in_multipliers(
        data in sample(12),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        s in 0.0..=1.0f64,
        u in point(),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let n = data.n();
        let mut r = common::rng(seed);
        let xi: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        let xj: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        let mix: Vec<f64> = xi.iter().zip(&xj).map(|(x, y)| a * x + b * y).collect();
        let w = PseudoObsWindow::full(&data);
        let lhs = replicate_bhat(&w, &mix, s, &u);
        let rhs = a * replicate_bhat(&w, &xi, s, &u) + b * replicate_bhat(&w, &xj, s, &u);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gamma_shift_symmetry(data in sample(12), u in point(), v in point(), k in 0isize..11) {
        let w = PseudoObsWindow::full(&data);
        let k = k.min(data.n() as isize - 1);
        let g1 = cross_covariance(&w, k, &u, &v).unwrap();
        let g2 = cross_covariance(&w, -k, &v, &u).unwrap();
        prop_assert!((g1 - g2).abs() < 1e-12);
        if k == 0 {
            let g = cross_covariance(&w, 0, &u, &u).unwrap();
            prop_assert!((-1e-12..=0.25 + 1e-12).contains(&g));
        }
    }

    #[test]
    fn lag_window_symmetric(data in sample(12), u in point(), v in point(), l in 1usize..11) {
        let w = PseudoObsWindow::full(&data);
        let l = l.min(data.n() - 1);
        let (s1, k1) = lag_window_estimates(&w, l, &u, &v).unwrap();
        let (s2, k2) = lag_window_estimates(&w, l, &v, &u).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-12);
        prop_assert!((k1 - k2).abs() < 1e-12);
    }

    #[test]
    fn p_value_on_the_lattice_and_monotone(
        reps in prop::collection::vec(-5.0..5.0f64, 1..60),
        a in -6.0..6.0f64,
        b in -6.0..6.0f64,
    ) {
        let m = reps.len() as f64;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = p_value(lo, &reps);
        let p_hi = p_value(hi, &reps);
        prop_assert!(p_hi <= p_lo);
        prop_assert!(((p_lo * m).round() - p_lo * m).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&p_lo));
    }

    #[test]
    fn quantile_is_an_order_statistic(reps in prop::collection::vec(-5.0..5.0f64, 1..80), p in 0.0..1.0f64) {
        let mut sorted = reps.clone();
        sorted.sort_by(f64::total_cmp);
        let k = ((p * reps.len() as f64).floor() as usize).max(1);
        prop_assert_eq!(order_statistic_quantile(&reps, p), sorted[k - 1]);
    }

    #[test]
    fn ell_scales_as_fifth_root(g in 0.01..10.0f64, d in 0.01..10.0f64, n in 10usize..100_000) {
        let a = ell_from_constants(g, d, n).unwrap();
        let b = ell_from_constants(g, d, 2 * n).unwrap();
        prop_assert!((b / a - 2f64.powf(0.2)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn multipliers_are_deterministic(seed in any::<u64>(), ell in 1usize..6, cov in any::<bool>()) {
        let method = if cov {
            MultiplierMethod::CovarianceMatrix(KernelSpec::covariance(KernelFamily::Parzen).unwrap())
        } else {
            MultiplierMethod::MovingAverage(KernelSpec::weight(KernelFamily::Parzen).unwrap())
        };
        let ell = if cov { ell } else { 2 * ell - 1 };
        let cfg = MultiplierConfig { method, ell, n: 40, replicates: 3, seed, base_law: BaseLaw::StandardNormal };
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), k in 0usize..5) {
        let kind = [ModelKind::Iid, ModelKind::Ar1, ModelKind::Nar, ModelKind::Expar, ModelKind::Garch][k];
        let model = DataModel::new(kind, CopulaSpec::Gumbel { theta: 1.5 }, 30);
        let (a, b) = (model.simulate(seed).unwrap(), model.simulate(seed).unwrap());
        prop_assert_eq!(a.values(), b.values());
    }
}
