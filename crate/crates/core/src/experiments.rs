//! Monte Carlo protocols: bandwidth estimates under the AR1 model, quantile
//! bias/MSE of the multiplier estimator of the quantiles of `S`, and the IMSE
//! of the multiplier covariance as a function of `ℓ`.
//!
//! Each protocol derives the seed of data set `i` as
//! `derive_seed(seed, EXPERIMENT, i)` and its multipliers from
//! `derive_seed(seed, MULTIPLIERS, i)`, so results do not depend on the
//! number of threads.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{estimate_ell_opt, to_odd, Aggregation};
use crate::bootstrap::{PartialDerivEstimator, ReplicateDesign};
use crate::data::DataMatrix;
use crate::datagen::{CopulaSpec, DataModel, ModelKind};
use crate::empirical::{EvalGrid, PseudoObsWindow};
use crate::error::{Error, Result};
use crate::inference::{matched_phi, process_on_grid, quantile_sorted, replicate_statistics, StatisticKind};
use crate::kernels::KernelSpec;
use crate::multipliers::{self, BaseLaw, MultiplierConfig, MultiplierMethod};
use crate::par;
use crate::rng::{derive_seed, domain};

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub theta: f64,
    pub n: usize,
    pub phi: String,
    pub mean: f64,
    pub sd: f64,
    pub seeds: usize,
}

/// Mean and standard deviation of `ℓ̂_opt` (unrounded) over `seeds` AR1
/// samples with Gumbel innovations.
pub fn table1_cell(
    theta: f64,
    n: usize,
    phi: &KernelSpec,
    seeds: usize,
    g: usize,
    psi: Aggregation,
    seed: u64,
) -> Result<Table1Row> {
    let model = DataModel::new(ModelKind::Ar1, CopulaSpec::Gumbel { theta }.validate()?, n);
    let estimates: Vec<Result<f64>> = par::map_range(seeds, |i| {
        let data = model.simulate(derive_seed(seed, domain::EXPERIMENT, i as u64))?;
        Ok(estimate_ell_opt(&data, phi, g, psi)?.ell_raw)
    });
    let estimates: Vec<f64> = estimates.into_iter().collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&estimates);
    Ok(Table1Row {
        theta,
        n,
        phi: phi.to_string(),
        mean,
        sd,
        seeds,
    })
}

/// Stationary copula of the model on the grid. Known in closed form for
/// i.i.d. data; otherwise the empirical copula of one long simulated path.
pub fn stationary_copula_on_grid(model: &DataModel, grid: &EvalGrid, length: usize, seed: u64) -> Result<Vec<f64>> {
    if model.kind == ModelKind::Iid {
        return Ok(grid.points().map(|u| model.copula.cdf_unchecked(u)).collect());
    }
    let long = DataModel {
        n: length,
        ..model.clone()
    };
    let path = long.simulate(derive_seed(seed, domain::ORACLE, 0))?;
    Ok(PseudoObsWindow::full(&path).empirical_copula_on(grid))
}

/// Sorted oracle realizations of `S_n` (or `T_n`) centered at `c_ref`.
pub fn reference_statistics(
    model: &DataModel,
    grid: &EvalGrid,
    c_ref: &[f64],
    reps: usize,
    kind: StatisticKind,
    seed: u64,
) -> Result<Vec<f64>> {
    let stats: Vec<Result<f64>> = par::map_range(reps, |i| {
        let data = model.simulate(derive_seed(seed, domain::ORACLE, 1 + i as u64))?;
        let c = process_on_grid(&data, grid, c_ref)?;
        Ok(match kind {
            StatisticKind::Ks => c.iter().fold(0.0f64, |a, x| a.max(x.abs())),
            _ => c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64,
        })
    });
    let mut stats: Vec<f64> = stats.into_iter().collect::<Result<_>>()?;
    stats.sort_by(f64::total_cmp);
    Ok(stats)
}

/// Bandwidth choice for one curve of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EllChoice {
    Fixed(usize),
    /// `ℓ̂_opt` per data set with covariance kernel `φ` (odd-rounded for
    /// moving averages).
    Auto(KernelSpec),
}

impl std::fmt::Display for EllChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EllChoice::Fixed(l) => write!(f, "{l}"),
            EllChoice::Auto(_) => write!(f, "auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMseConfig {
    pub model: DataModel,
    pub method: MultiplierMethod,
    pub choices: Vec<EllChoice>,
    pub replicates: usize,
    pub datasets: usize,
    pub orders: Vec<f64>,
    pub kind: StatisticKind,
    pub estimator: PartialDerivEstimator,
    pub grid_per_axis: usize,
    pub bandwidth_grid: usize,
    pub psi: Aggregation,
    pub seed: u64,
    /// Path length used to approximate the stationary copula.
    pub reference_length: usize,
    /// Oracle realizations of the statistic and their sample size.
    pub reference_reps: usize,
    pub reference_n: usize,
}

impl QuantileMseConfig {
    pub fn new(model: DataModel, method: MultiplierMethod) -> Self {
        Self {
            model,
            method,
            choices: vec![EllChoice::Fixed(1)],
            replicates: 1000,
            datasets: 300,
            orders: crate::inference::DEFAULT_ORDERS.to_vec(),
            kind: StatisticKind::Cvm,
            estimator: PartialDerivEstimator::RemillardScaillet,
            grid_per_axis: 20,
            bandwidth_grid: 25,
            psi: Aggregation::Median,
            seed: 1,
            reference_length: 4_000_000,
            reference_reps: 20_000,
            reference_n: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMseRow {
    pub scenario: String,
    pub n: usize,
    pub ell: String,
    /// Average bandwidth actually used (differs from `ell` for `auto`).
    pub mean_ell: f64,
    pub kernel: String,
    pub p: f64,
    pub target: f64,
    pub bias: f64,
    pub mse: f64,
}

/// Reference quantiles of the limiting statistic at the given orders.
pub fn reference_quantiles(cfg: &QuantileMseConfig, grid: &EvalGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let c_ref = stationary_copula_on_grid(&cfg.model, grid, cfg.reference_length, cfg.seed)?;
    let ref_model = DataModel {
        n: cfg.reference_n,
        ..cfg.model.clone()
    };
    let sorted = reference_statistics(&ref_model, grid, &c_ref, cfg.reference_reps, cfg.kind, cfg.seed)?;
    let q = cfg.orders.iter().map(|&p| empirical_quantile(&sorted, p)).collect();
    Ok((c_ref, q))
}

/// Type-7 sample quantile of sorted values.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bias and MSE of `S_n^{(⌊pM⌋:M)}` for each bandwidth choice and order,
/// against `targets` (one per order).
pub fn quantile_mse_experiment(cfg: &QuantileMseConfig, targets: &[f64]) -> Result<Vec<QuantileMseRow>> {
    if targets.len() != cfg.orders.len() {
        return Err(Error::InvalidArgument("one target per quantile order".into()));
    }
    if !matches!(cfg.kind, StatisticKind::Cvm | StatisticKind::Ks) {
        return Err(Error::InvalidArgument(
            "quantile MSE uses the CvM or KS statistic".into(),
        ));
    }
    let n = cfg.model.n;
    let grid = EvalGrid::lattice(cfg.grid_per_axis, cfg.model.d, true)?;
    // per data set: for each choice, (ℓ used, quantile estimates)
    // per data set: (ell used, quantiles) for each choice
    type PerSet = Vec<(usize, Vec<f64>)>;
    let per_set: Vec<Result<PerSet>> = par::map_range(cfg.datasets, |i| {
        let data = cfg
            .model
            .simulate(derive_seed(cfg.seed, domain::EXPERIMENT, i as u64))?;
        let design = ReplicateDesign::from_data(&data, &grid, cfg.estimator)?;
        let mult_seed = derive_seed(cfg.seed, domain::MULTIPLIERS, i as u64);
        cfg.choices
            .iter()
            .map(|choice| {
                let ell = match choice {
                    EllChoice::Fixed(l) => *l,
                    EllChoice::Auto(phi) => {
                        let e = estimate_ell_opt(&data, phi, cfg.bandwidth_grid, cfg.psi)?.ell_opt;
                        match cfg.method {
                            MultiplierMethod::MovingAverage(_) => to_odd(e),
                            MultiplierMethod::CovarianceMatrix(_) => e,
                        }
                    }
                };
                let batch = multipliers::generate(&MultiplierConfig {
                    method: cfg.method,
                    ell,
                    n,
                    replicates: cfg.replicates,
                    seed: mult_seed,
                    base_law: BaseLaw::StandardNormal,
                })?;
                let mut reps = replicate_statistics(&design, &batch, cfg.kind)?;
                reps.sort_by(f64::total_cmp);
                Ok((ell, cfg.orders.iter().map(|&p| quantile_sorted(&reps, p)).collect()))
            })
            .collect()
    });
    let per_set: Vec<PerSet> = per_set.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (c, choice) in cfg.choices.iter().enumerate() {
        let mean_ell = per_set.iter().map(|s| s[c].0 as f64).sum::<f64>() / per_set.len() as f64;
        for (o, &p) in cfg.orders.iter().enumerate() {
            let errs: Vec<f64> = per_set.iter().map(|s| s[c].1[o] - targets[o]).collect();
            let bias = errs.iter().sum::<f64>() / errs.len() as f64;
            let mse = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
            rows.push(QuantileMseRow {
                scenario: format!("{}-{}", cfg.model.kind, cfg.model.copula),
                n,
                ell: choice.to_string(),
                mean_ell,
                kernel: cfg.method.kernel().to_string(),
                p,
                target: targets[o],
                bias,
                mse,
            });
        }
    }
    Ok(rows)
}

/// Default sweep `ℓ ∈ {1, 3, …, 39}`.
pub fn default_ell_sweep() -> Vec<usize> {
    (0..20).map(|i| 2 * i + 1).collect()
}

/// Covariance kernel used for `auto` with the given multiplier method.
pub fn auto_phi(method: &MultiplierMethod) -> Result<KernelSpec> {
    matched_phi(method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImseConfig {
    pub model: DataModel,
    pub phi: KernelSpec,
    pub ells: Vec<usize>,
    pub replicates: usize,
    pub datasets: usize,
    pub grid_size: usize,
    pub oracle_reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImseRow {
    pub scenario: String,
    pub n: usize,
    pub ell: usize,
    pub kernel: String,
    pub imse: f64,
}

fn centered_indicators(uniforms: &DataMatrix, grid: &EvalGrid, c: &[f64]) -> Vec<f64> {
    let g = grid.len();
    let mut out = vec![0.0; uniforms.n() * g];
    for (i, row) in uniforms.rows().enumerate() {
        for (p, u) in grid.points().enumerate() {
            let below = row.iter().zip(u).all(|(x, y)| x <= y);
            out[i * g + p] = f64::from(u8::from(below)) - c[p];
        }
    }
    out
}

/// Sample covariance (`g × g`) of the rows of an `r × g` matrix.
fn sample_covariance(rows: &[f64], r: usize, g: usize) -> Vec<f64> {
    let mut mean = vec![0.0; g];
    for row in rows.chunks_exact(g) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r as f64);
    let mut cov = vec![0.0; g * g];
    for row in rows.chunks_exact(g) {
        for a in 0..g {
            let da = row[a] - mean[a];
            for b in 0..g {
                cov[a * g + b] += da * (row[b] - mean[b]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= (r - 1) as f64);
    cov
}

/// `σ_C` on the grid from `oracle_reps` realizations of `B̃_n(1,·)`, using
/// the known margins of the model.
pub fn oracle_sigma_c(cfg: &ImseConfig, grid: &EvalGrid) -> Result<Vec<f64>> {
    let g = grid.len();
    let c: Vec<f64> = grid.points().map(|u| cfg.model.copula.cdf_unchecked(u)).collect();
    if cfg.model.kind != ModelKind::Iid && cfg.model.kind != ModelKind::Ar1 {
        return Err(Error::InvalidArgument(
            "the IMSE oracle needs known margins (iid or ar1)".into(),
        ));
    }
    // centering constants cancel in the sample covariance
    let rows: Vec<Result<Vec<f64>>> = par::map_range(cfg.oracle_reps, |r| {
        let x = cfg
            .model
            .simulate(derive_seed(cfg.seed, domain::ORACLE, 1 + r as u64))?;
        let u = cfg.model.to_uniforms(&x).expect("known margins");
        let ind = centered_indicators(&u, grid, &c);
        let rn = (u.n() as f64).sqrt();
        let mut b = vec![0.0; g];
        for row in ind.chunks_exact(g) {
            for (o, v) in b.iter_mut().zip(row) {
                *o += v;
            }
        }
        Ok(b.into_iter().map(|v| v / rn).collect())
    });
    let rows: Vec<f64> = rows.into_iter().collect::<Result<Vec<_>>>()?.concat();
    Ok(sample_covariance(&rows, cfg.oracle_reps, g))
}

/// IMSE of the multiplier covariance of `B̂^{(m)}(1,·)` against `sigma_c`,
/// for each bandwidth.
pub fn imse_experiment(cfg: &ImseConfig, sigma_c: &[f64]) -> Result<Vec<ImseRow>> {
    let n = cfg.model.n;
    let grid = EvalGrid::open_lattice_with_size(cfg.grid_size, cfg.model.d)?;
    let g = grid.len();
    if sigma_c.len() != g * g {
        return Err(Error::InvalidArgument("oracle covariance has the wrong size".into()));
    }
    let method = MultiplierMethod::CovarianceMatrix(cfg.phi);
    // warm the square-root cache outside the parallel loop
    for &ell in &cfg.ells {
        multipliers::covariance_root(n, ell, &cfg.phi)?;
    }
    let per_set: Vec<Result<Vec<f64>>> = par::map_range(cfg.datasets, |i| {
        let data = cfg
            .model
            .simulate(derive_seed(cfg.seed, domain::EXPERIMENT, i as u64))?;
        let design = ReplicateDesign::from_data(&data, &grid, PartialDerivEstimator::default())?;
        let mult_seed = derive_seed(cfg.seed, domain::MULTIPLIERS, i as u64);
        cfg.ells
            .iter()
            .map(|&ell| {
                let batch = multipliers::generate(&MultiplierConfig {
                    method,
                    ell,
                    n,
                    replicates: cfg.replicates,
                    seed: mult_seed,
                    base_law: BaseLaw::StandardNormal,
                })?;
                let reps: Vec<f64> = (0..cfg.replicates)
                    .flat_map(|m| design.bhat(batch.row(m), 1.0))
                    .collect();
                let cov = sample_covariance(&reps, cfg.replicates, g);
                let se = cov.iter().zip(sigma_c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (g * g) as f64;
                Ok(se)
            })
            .collect()
    });
    let per_set: Vec<Vec<f64>> = per_set.into_iter().collect::<Result<_>>()?;
    Ok(cfg
        .ells
        .iter()
        .enumerate()
        .map(|(k, &ell)| ImseRow {
            scenario: format!("{}-{}", cfg.model.kind, cfg.model.copula),
            n,
            ell,
            kernel: cfg.phi.to_string(),
            imse: per_set.iter().map(|v| v[k]).sum::<f64>() / per_set.len() as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_helpers() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_quantile(&v, 0.5), 3.0);
        assert_eq!(empirical_quantile(&v, 0.25), 2.0);
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sample_covariance_small() {
        let rows = [1.0, 2.0, 3.0, 6.0];
        let c = sample_covariance(&rows, 2, 2);
        assert_eq!(c, vec![2.0, 4.0, 4.0, 8.0]);
    }

    #[test]
    fn iid_reference_is_exact() {
        let model = DataModel::new(ModelKind::Iid, CopulaSpec::Clayton { theta: 1.0 }, 10);
        let grid = EvalGrid::lattice(3, 2, true).unwrap();
        let c = stationary_copula_on_grid(&model, &grid, 100, 1).unwrap();
        assert!((c[4] - 1.0 / 3.0).abs() < 1e-15);
    }
}
