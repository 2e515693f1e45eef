//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Run a subset with `cargo test -p seqcop --test acceptance -- 3 5`.

mod common;

use std::time::Instant;

use common::{chi_square_10, lag_cov, oracle_discrepancy, sample_cov, CHI2_9_99};
use seqcop::bandwidth::{lag_window_estimates, oracle_sigma_tilde};
use seqcop::datagen::simulate_with_break;
use seqcop::experiments::{
    auto_phi, default_ell_sweep, quantile_mse_experiment, reference_quantiles, table1_cell, EllChoice,
    QuantileMseConfig,
};
use seqcop::kernels::KernelFamily;
use seqcop::multipliers::generate;
use seqcop::rng::{derive_seed, domain};
use seqcop::{
    changepoint_test, par, Aggregation, BaseLaw, ChangePointConfig, CopulaSpec, DataModel, EvalGrid, KernelSpec,
    ModelKind, MultiplierConfig, MultiplierMethod, PseudoObsWindow,
};

type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn parzen() -> KernelSpec {
    KernelSpec::covariance(KernelFamily::Parzen).unwrap()
}

fn usum8() -> KernelSpec {
    KernelSpec::covariance(KernelFamily::UniformSum { p: 8 }).unwrap()
}

fn table1_reproduction() -> Check {
    let a = table1_cell(1.5, 100, &parzen(), 300, 25, Aggregation::Median, 1).map_err(|e| e.to_string())?;
    let b = table1_cell(1.5, 400, &usum8(), 300, 25, Aggregation::Median, 1).map_err(|e| e.to_string())?;
    let ok = (a.mean - 8.93).abs() <= 1.0 && (a.sd - 3.85).abs() <= 1.0 && (b.mean - 17.73).abs() <= 1.5;
    verdict(
        ok,
        format!(
            "parzen n=100 mean {:.2} sd {:.2} (8.93, 3.85); u8 n=400 mean {:.2} (17.73)",
            a.mean, a.sd, b.mean
        ),
    )
}

fn table1_invariances() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, phi) in [("parzen", parzen()), ("u8", usum8())] {
        let mut means = [[0.0; 3]; 2];
        for (t, theta) in [1.5, 3.0].into_iter().enumerate() {
            for (k, n) in [100, 200, 400].into_iter().enumerate() {
                means[t][k] = table1_cell(theta, n, &phi, 300, 25, Aggregation::Median, 1)
                    .map_err(|e| e.to_string())?
                    .mean;
            }
            ok &= means[t][0] < means[t][1] && means[t][1] < means[t][2];
        }
        let gap = (0..3).map(|k| (means[0][k] - means[1][k]).abs()).fold(0.0, f64::max);
        ok &= gap < 1.0;
        notes.push(format!(
            "{name}: θ=1.5 {:.2}/{:.2}/{:.2}, θ=3 {:.2}/{:.2}/{:.2}, max gap {gap:.2}",
            means[0][0], means[0][1], means[0][2], means[1][0], means[1][1], means[1][2]
        ));
    }
    verdict(ok, notes.join("; "))
}

fn kernel_identities() -> Check {
    let bartlett = KernelSpec::weight(KernelFamily::Bartlett).unwrap();
    let u2 = KernelSpec::weight(KernelFamily::UniformSum { p: 2 }).unwrap();
    let p = KernelSpec::weight(KernelFamily::Parzen).unwrap();
    let u8 = usum8();
    let grid: Vec<f64> = (0..=100).map(|i| -1.0 + i as f64 * 0.02).collect();
    let e1 = grid
        .iter()
        .map(|&x| (u2.value(x) - bartlett.value(x)).abs())
        .fold(0.0, f64::max);
    let mut e2 = 0.0f64;
    for &x in &grid {
        e2 = e2.max((p.self_convolution_normalized(x).map_err(|e| e.to_string())? - u8.value(x)).abs());
    }
    let left = 2.0 * (1.0f64 - 0.5).powi(3);
    let right = 1.0 - 6.0 * 0.25 + 6.0 * 0.125;
    let ok = e1 < 1e-10 && e2 < 1e-6 && p.value(0.5) == 0.25 && left == 0.25 && right == 0.25;
    verdict(
        ok,
        format!(
            "u2 vs bartlett {e1:.1e}; parzen⋆parzen vs u8 {e2:.1e}; parzen(0.5) = {}",
            p.value(0.5)
        ),
    )
}

fn multiplier_structure() -> Check {
    let phi = parzen();
    let ell = 5;
    let cm = generate(&MultiplierConfig {
        method: MultiplierMethod::CovarianceMatrix(phi),
        ell,
        n: 1000,
        replicates: 100,
        seed: 11,
        base_law: BaseLaw::StandardNormal,
    })
    .map_err(|e| e.to_string())?;
    let rows: Vec<&[f64]> = (0..cm.replicates()).map(|m| cm.row(m)).collect();
    let total = 100_000f64;
    let near = (0..=6)
        .map(|h| (lag_cov(&rows, h) - phi.value(h as f64 / ell as f64)).abs())
        .fold(0.0, f64::max);
    let far = (6..=10).map(|h| lag_cov(&rows, h).abs()).fold(0.0, f64::max);

    let ma = generate(&MultiplierConfig {
        method: MultiplierMethod::MovingAverage(KernelSpec::weight(KernelFamily::Truncated).unwrap()),
        ell,
        n: 100_000,
        replicates: 1,
        seed: 12,
        base_law: BaseLaw::StandardNormal,
    })
    .map_err(|e| e.to_string())?;
    let bartlett = KernelSpec::weight(KernelFamily::Bartlett).unwrap();
    let ma_err = (0..=6)
        .map(|h| (lag_cov(&[ma.row(0)], h) - bartlett.value(h as f64 / ell as f64)).abs())
        .fold(0.0, f64::max);
    let ok = near < 0.02 && far < 4.0 / total.sqrt() && ma_err < 0.02;
    verdict(
        ok,
        format!(
            "covariance-matrix lags 0..6 err {near:.4}, lags 6..10 max {far:.4} (< {:.4}); moving-average vs bartlett err {ma_err:.4}",
            4.0 / total.sqrt()
        ),
    )
}

fn oracle_equivalence() -> Check {
    let worst = (0..100).map(oracle_discrepancy).fold(0.0, f64::max);
    verdict(worst < 1e-12, format!("max discrepancy {worst:.2e} over 100 fixtures"))
}

fn bootstrap_validity() -> Check {
    let seeds = 500;
    let m = 500;
    let model = DataModel::new(ModelKind::Iid, CopulaSpec::Clayton { theta: 1.0 }, 200);
    let runs: Vec<Result<(f64, usize, usize), String>> = par::map_range(seeds, |i| {
        let s = derive_seed(7, domain::EXPERIMENT, i as u64);
        let data = model.simulate(s).map_err(|e| e.to_string())?;
        let cfg = ChangePointConfig {
            replicates: m,
            seed: s,
            ..Default::default()
        };
        let r = changepoint_test(&data, &cfg).map_err(|e| e.to_string())?;
        Ok((r.p_value, r.rank(), r.meta.ell))
    });
    let runs: Vec<(f64, usize, usize)> = runs.into_iter().collect::<Result<_, _>>()?;
    let rate = runs.iter().filter(|r| r.0 <= 0.05).count() as f64 / seeds as f64;
    let ranks: Vec<f64> = runs.iter().map(|r| r.1 as f64 / (m + 1) as f64).collect();
    let (chi2, bins) = chi_square_10(&ranks);
    let mean_ell = runs.iter().map(|r| r.2 as f64).sum::<f64>() / seeds as f64;
    let ok = (0.025..=0.085).contains(&rate) && chi2 < CHI2_9_99;
    verdict(
        ok,
        format!("rejection {rate:.3}; rank chi2 {chi2:.1} (crit {CHI2_9_99:.2}) bins {bins:?}; mean ell {mean_ell:.2}"),
    )
}

fn power() -> Check {
    let seeds = 200;
    let runs: Vec<Result<f64, String>> = par::map_range(seeds, |i| {
        let s = derive_seed(8, domain::EXPERIMENT, i as u64);
        let data = simulate_with_break(
            ModelKind::Iid,
            CopulaSpec::Clayton { theta: 1.0 },
            CopulaSpec::Clayton { theta: 10.0 },
            400,
            s,
        )
        .map_err(|e| e.to_string())?;
        let cfg = ChangePointConfig {
            replicates: 500,
            seed: s,
            ..Default::default()
        };
        Ok(changepoint_test(&data, &cfg).map_err(|e| e.to_string())?.p_value)
    });
    let p: Vec<f64> = runs.into_iter().collect::<Result<_, _>>()?;
    let rate = p.iter().filter(|&&v| v <= 0.05).count() as f64 / seeds as f64;
    verdict(rate >= 0.8, format!("rejection {rate:.3} over {seeds} seeds"))
}

/// (ell, mse) curve, auto mse, mean auto ell
type Sweep = (Vec<(usize, f64)>, f64, f64);

fn sweep(kind: ModelKind) -> Result<Sweep, String> {
    let method = MultiplierMethod::MovingAverage(KernelSpec::weight(KernelFamily::Parzen).unwrap());
    let mut cfg = QuantileMseConfig::new(DataModel::new(kind, CopulaSpec::Gumbel { theta: 1.5 }, 200), method);
    cfg.replicates = 500;
    cfg.datasets = 300;
    cfg.orders = vec![0.95];
    cfg.choices = default_ell_sweep().into_iter().map(EllChoice::Fixed).collect();
    cfg.choices
        .push(EllChoice::Auto(auto_phi(&method).map_err(|e| e.to_string())?));
    let grid = EvalGrid::lattice(cfg.grid_per_axis, 2, true).map_err(|e| e.to_string())?;
    let (_, targets) = reference_quantiles(&cfg, &grid).map_err(|e| e.to_string())?;
    let rows = quantile_mse_experiment(&cfg, &targets).map_err(|e| e.to_string())?;
    let (fixed, auto): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.ell != "auto");
    let curve = fixed.iter().map(|r| (r.ell.parse().unwrap(), r.mse)).collect();
    Ok((curve, auto[0].mse, auto[0].mean_ell))
}

fn sweep_shapes() -> Check {
    let (nar, nar_auto, nar_ell) = sweep(ModelKind::Nar)?;
    let (garch, _, _) = sweep(ModelKind::Garch)?;
    let argmin = |c: &[(usize, f64)]| *c.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let (nar_best, nar_min) = argmin(&nar);
    let interior = nar[1..nar.len() - 1].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let nar_ok = interior < nar[0].1 && interior < nar[nar.len() - 1].1 && nar_auto <= 2.0 * nar_min;
    let (garch_best, garch_min) = argmin(&garch);
    let ok = nar_ok && garch_best == 1;
    verdict(
        ok,
        format!(
            "nar: min at ell {nar_best} ({:.2e}), ell=1 {:.2e}, ell=39 {:.2e}, auto (mean ell {nar_ell:.1}) {nar_auto:.2e}; garch: min at ell {garch_best} ({garch_min:.2e})",
            nar_min,
            nar[0].1,
            nar[nar.len() - 1].1
        ),
    )
}

fn sigma_consistency() -> Check {
    let points: [[f64; 2]; 3] = [[0.25, 0.5], [0.5, 0.5], [0.75, 0.25]];
    let indep = |u: &[f64]| u[0] * u[1];
    let big = DataModel::new(ModelKind::Iid, CopulaSpec::Independence, 10_000)
        .simulate(21)
        .map_err(|e| e.to_string())?;
    let pobs = PseudoObsWindow::full(&big);
    let mut e1 = 0.0f64;
    for u in &points {
        for v in &points {
            let meet = [u[0].min(v[0]), u[1].min(v[1])];
            let truth = indep(&meet) - indep(u) * indep(v);
            let (sigma, _) = lag_window_estimates(&pobs, 2, u, v).map_err(|e| e.to_string())?;
            e1 = e1.max((sigma - truth).abs());
        }
    }

    let n = 500;
    let ell = 5;
    let phi = parzen();
    let clayton = CopulaSpec::Clayton { theta: 1.0 };
    let uniforms = clayton.sample(n, 2, 22).map_err(|e| e.to_string())?;
    let c = |u: &[f64]| clayton.cdf_unchecked(u);
    let batch = generate(&MultiplierConfig {
        method: MultiplierMethod::CovarianceMatrix(phi),
        ell,
        n,
        replicates: 5000,
        seed: 23,
        base_law: BaseLaw::StandardNormal,
    })
    .map_err(|e| e.to_string())?;
    let btilde = |xi: &[f64], u: &[f64]| -> f64 {
        let cu = c(u);
        uniforms
            .rows()
            .zip(xi)
            .map(|(r, x)| x * (f64::from(u8::from(r[0] <= u[0] && r[1] <= u[1])) - cu))
            .sum::<f64>()
            / (n as f64).sqrt()
    };
    let reps: Vec<Vec<f64>> = points
        .iter()
        .map(|u| (0..5000).map(|m| btilde(batch.row(m), u)).collect())
        .collect();
    let mut e2 = 0.0f64;
    for (a, u) in points.iter().enumerate() {
        for (b, v) in points.iter().enumerate() {
            let want = oracle_sigma_tilde(&uniforms, &phi, ell, u, v, &c);
            e2 = e2.max((sample_cov(&reps[a], &reps[b]) - want).abs());
        }
    }
    verdict(
        e1 < 0.05 && e2 < 0.03,
        format!("lag-window vs C(u∧v)-C(u)C(v) max err {e1:.4}; sigma-tilde vs replicate covariance max err {e2:.4}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 9] = [
        ("table1-reproduction", table1_reproduction),
        ("table1-invariances", table1_invariances),
        ("kernel-identities", kernel_identities),
        ("multiplier-structure", multiplier_structure),
        ("oracle-equivalence", oracle_equivalence),
        ("bootstrap-validity", bootstrap_validity),
        ("power", power),
        ("sweep-shapes", sweep_shapes),
        ("sigma-consistency", sigma_consistency),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
