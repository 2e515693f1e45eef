//! Test statistics, multiplier p-values and the copula change-point test.
//!
//! `S_n` and `T_n` are the grid mean of `ℂ_n(0,1,·)²` and the grid maximum of
//! `|ℂ_n(0,1,·)|`; `W_n` is the maximum of `|D_n|` over `⌊ns⌋ ∈ [2, n-2]` and
//! the grid. Replicate versions apply the same functional to `Ĉ^{(m)}` and
//! `D̂^{(m)}`.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{estimate_ell_opt, to_odd, Aggregation, BandwidthEstimate};
use crate::bootstrap::{changepoint_observed, PartialDerivEstimator, ReplicateDesign};
use crate::data::DataMatrix;
use crate::empirical::{EvalGrid, PseudoObsWindow};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, MAX_UNIFORM_SUM};
use crate::multipliers::{self, BaseLaw, MultiplierBatch, MultiplierConfig, MultiplierMethod};
use crate::par;

/// Quantile orders reported by default.
pub const DEFAULT_ORDERS: [f64; 6] = [0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

/// Smallest sample accepted by the change-point test.
pub const MIN_CHANGEPOINT_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    Cvm,
    Ks,
    #[default]
    ChangePointKs,
    ChangePointCvm,
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cvm" => Ok(Self::Cvm),
            "ks" => Ok(Self::Ks),
            "cp-ks" | "changepoint-ks" => Ok(Self::ChangePointKs),
            "cp-cvm" | "changepoint-cvm" => Ok(Self::ChangePointCvm),
            other => Err(Error::InvalidArgument(format!("unknown statistic '{other}'"))),
        }
    }
}

/// `ℂ_n(0,1,u_p) = √n {C_{1:n}(u_p) - c_ref[p]}` over the grid.
pub fn process_on_grid(data: &DataMatrix, grid: &EvalGrid, c_ref: &[f64]) -> Result<Vec<f64>> {
    if c_ref.len() != grid.len() || grid.d() != data.d() {
        return Err(Error::InvalidArgument(
            "reference values, grid and data do not match".into(),
        ));
    }
    let cn = PseudoObsWindow::full(data).empirical_copula_on(grid);
    let rn = (data.n() as f64).sqrt();
    Ok(cn.iter().zip(c_ref).map(|(c, r)| rn * (c - r)).collect())
}

fn reference_values(grid: &EvalGrid, c_ref: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    grid.points().map(c_ref).collect()
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// `S_n`, the grid average of `ℂ_n(0,1,·)²`.
pub fn cvm_statistic(data: &DataMatrix, grid: &EvalGrid, c_ref: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    Ok(mean_square(&process_on_grid(
        data,
        grid,
        &reference_values(grid, c_ref),
    )?))
}

/// `T_n`, the grid maximum of `|ℂ_n(0,1,·)|`.
pub fn ks_statistic(data: &DataMatrix, grid: &EvalGrid, c_ref: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    Ok(max_abs(&process_on_grid(data, grid, &reference_values(grid, c_ref))?))
}

/// Observed `W_n` (or its mean-square variant).
pub fn changepoint_statistic(data: &DataMatrix, grid: &EvalGrid, kind: StatisticKind) -> Result<f64> {
    let surface = changepoint_observed(data, grid)?;
    if surface.is_empty() {
        return Ok(0.0);
    }
    Ok(match kind {
        StatisticKind::ChangePointCvm => mean_square(&surface),
        _ => max_abs(&surface),
    })
}

/// The `M` replicate statistics of the given kind.
pub fn replicate_statistics(
    design: &ReplicateDesign,
    batch: &MultiplierBatch,
    kind: StatisticKind,
) -> Result<Vec<f64>> {
    let g = design.grid_len();
    match kind {
        StatisticKind::Cvm | StatisticKind::Ks => {
            let full = design.chat_full(batch)?;
            Ok(full
                .chunks_exact(g)
                .map(|row| {
                    if kind == StatisticKind::Cvm {
                        mean_square(row)
                    } else {
                        max_abs(row)
                    }
                })
                .collect())
        }
        StatisticKind::ChangePointKs | StatisticKind::ChangePointCvm => {
            if batch.n() != design.n() {
                return Err(Error::InvalidArgument(
                    "multiplier length does not match sample size".into(),
                ));
            }
            Ok(par::map_range(batch.replicates(), |m| {
                let (sup, ms) = design.changepoint_functionals(batch.row(m));
                if kind == StatisticKind::ChangePointKs {
                    sup
                } else {
                    ms
                }
            }))
        }
    }
}

/// `M^{-1} Σ_m 1(replicate_m ≥ statistic)`.
pub fn p_value(statistic: f64, replicates: &[f64]) -> f64 {
    if replicates.is_empty() {
        return f64::NAN;
    }
    replicates.iter().filter(|&&r| r >= statistic).count() as f64 / replicates.len() as f64
}

/// The `⌊pM⌋`-th order statistic (1-based; index 1 when `⌊pM⌋ = 0`).
pub fn order_statistic_quantile(replicates: &[f64], p: f64) -> f64 {
    let mut v = replicates.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let k = ((p * m as f64).floor() as usize).clamp(1, m);
    sorted[k - 1]
}

/// How `ℓ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EllPolicy {
    Fixed(usize),
    /// Estimated `ℓ̂_opt`. Without an explicit `φ`, the covariance kernel
    /// matched to the multiplier kernel is used.
    Auto {
        phi: Option<KernelSpec>,
        g: usize,
        psi: Aggregation,
    },
}

impl Default for EllPolicy {
    fn default() -> Self {
        EllPolicy::Auto {
            phi: None,
            g: 25,
            psi: Aggregation::Median,
        }
    }
}

/// Covariance function `φ = κ⋆κ(2·)/κ⋆κ(0)` induced by moving-average
/// weights `κ`, when it belongs to the uniform-sum family.
pub fn matched_phi(method: &MultiplierMethod) -> Result<KernelSpec> {
    match method {
        MultiplierMethod::CovarianceMatrix(phi) => Ok(*phi),
        MultiplierMethod::MovingAverage(kappa) => {
            let p = match kappa.family {
                KernelFamily::Truncated => 1,
                KernelFamily::Bartlett => 2,
                KernelFamily::Parzen => 4,
                KernelFamily::UniformSum { p } => p,
                f @ KernelFamily::FlatTop { .. } => {
                    return Err(Error::InvalidArgument(format!(
                        "no closed-form covariance kernel matches {f}; pass one explicitly"
                    )))
                }
            };
            if 2 * p > MAX_UNIFORM_SUM {
                return Err(Error::InvalidArgument(format!(
                    "matched kernel usum:{} exceeds the supported order",
                    2 * p
                )));
            }
            KernelSpec::covariance(KernelFamily::UniformSum { p: 2 * p })
        }
    }
}

/// Resolves the policy into a bandwidth valid for the method.
pub fn resolve_ell(
    data: &DataMatrix,
    method: &MultiplierMethod,
    policy: &EllPolicy,
) -> Result<(usize, Option<BandwidthEstimate>)> {
    let (ell, est) = match policy {
        EllPolicy::Fixed(l) => (*l, None),
        EllPolicy::Auto { phi, g, psi } => {
            let phi = match phi {
                Some(p) => *p,
                None => matched_phi(method)?,
            };
            let est = estimate_ell_opt(data, &phi, *g, *psi)?;
            (est.ell_opt, Some(est))
        }
    };
    let ell = match method {
        MultiplierMethod::MovingAverage(_) if est.is_some() => to_odd(ell),
        _ => ell,
    };
    Ok((ell, est))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointConfig {
    pub method: MultiplierMethod,
    pub ell: EllPolicy,
    pub replicates: usize,
    pub seed: u64,
    pub base_law: BaseLaw,
    pub estimator: PartialDerivEstimator,
    /// Points per axis of the open evaluation lattice.
    pub grid_per_axis: usize,
    pub statistic: StatisticKind,
}

impl Default for ChangePointConfig {
    fn default() -> Self {
        Self {
            method: MultiplierMethod::MovingAverage(
                KernelSpec::weight(KernelFamily::Parzen).expect("parzen is a valid weight"),
            ),
            ell: EllPolicy::default(),
            replicates: 1000,
            seed: 1,
            base_law: BaseLaw::StandardNormal,
            estimator: PartialDerivEstimator::RemillardScaillet,
            grid_per_axis: 20,
            statistic: StatisticKind::ChangePointKs,
        }
    }
}

/// Everything needed to trace a result back to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub ell: usize,
    pub method: String,
    pub kernel: String,
    pub seed: u64,
    pub replicates: usize,
    pub estimator: PartialDerivEstimator,
    pub statistic: StatisticKind,
    pub bandwidth: Option<BandwidthEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub statistic: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    /// `(p, ⌊pM⌋-th order statistic)`.
    pub quantiles: Vec<(f64, f64)>,
    pub meta: Provenance,
}

impl BootstrapResult {
    /// Number of replicates strictly below the observed statistic.
    pub fn rank(&self) -> usize {
        self.replicates.iter().filter(|&&r| r < self.statistic).count()
    }
}

/// Multiplier bootstrap test for a change in the copula at an unknown time.
pub fn changepoint_test(data: &DataMatrix, config: &ChangePointConfig) -> Result<BootstrapResult> {
    let n = data.n();
    if n < MIN_CHANGEPOINT_N {
        return Err(Error::SampleTooSmall {
            n,
            min: MIN_CHANGEPOINT_N,
        });
    }
    if !matches!(
        config.statistic,
        StatisticKind::ChangePointKs | StatisticKind::ChangePointCvm
    ) {
        return Err(Error::InvalidArgument(
            "the change-point test needs a change-point statistic".into(),
        ));
    }
    let (ell, bandwidth) = resolve_ell(data, &config.method, &config.ell)?;
    let mconf = MultiplierConfig {
        method: config.method,
        ell,
        n,
        replicates: config.replicates,
        seed: config.seed,
        base_law: config.base_law,
    };
    let batch = multipliers::generate(&mconf)?;
    let grid = EvalGrid::lattice(config.grid_per_axis, data.d(), true)?;
    let design = ReplicateDesign::from_data(data, &grid, config.estimator)?;
    let replicates = replicate_statistics(&design, &batch, config.statistic)?;
    let statistic = changepoint_statistic(data, &grid, config.statistic)?;
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        statistic,
        p_value: p_value(statistic, &replicates),
        quantiles: DEFAULT_ORDERS
            .iter()
            .map(|&p| (p, quantile_sorted(&sorted, p)))
            .collect(),
        replicates,
        meta: Provenance {
            ell,
            method: config.method.name().to_string(),
            kernel: config.method.kernel().to_string(),
            seed: config.seed,
            replicates: config.replicates,
            estimator: config.estimator,
            statistic: config.statistic,
            bandwidth,
        },
    })
}
