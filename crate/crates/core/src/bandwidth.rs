//! Automatic choice of the multiplier bandwidth `ℓ`.
//!
//! The lag-window estimators
//!
//! ```text
//! σ̂(u,v) = Σ_{|k|≤L} κ_{F,0.5}(k/L) γ̂(k,u,v),   K̂(u,v) = Σ_{|k|≤L} κ_{F,0.5}(k/L) k² γ̂(k,u,v)
//! ```
//!
//! are averaged over a `g`-point lattice into `Γ̄² = φ''(0)²/4 · mean K̂²` and
//! `Δ̄ = ∫φ² · {(mean diag σ̂)² + mean σ̂²}`, and the bandwidth is
//! `ℓ = (4 Γ̄² / Δ̄)^{1/5} n^{1/5}`. The truncation `L` comes from the
//! autocorrelation scan of each margin, aggregated by `ψ`.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::empirical::{EvalGrid, PseudoObsWindow};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, PhiConstants, FLAT_TOP_LAG_WINDOW};
use crate::par;

/// Aggregation `ψ` of the per-margin truncation lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
    Min,
    Max,
}

impl Aggregation {
    pub fn apply(self, values: &[usize]) -> f64 {
        let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        v.sort_by(f64::total_cmp);
        match self {
            Aggregation::Median => {
                let m = v.len();
                if m % 2 == 1 {
                    v[m / 2]
                } else {
                    0.5 * (v[m / 2 - 1] + v[m / 2])
                }
            }
            Aggregation::Mean => v.iter().sum::<f64>() / v.len() as f64,
            Aggregation::Min => v[0],
            Aggregation::Max => v[v.len() - 1],
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            other => Err(Error::InvalidArgument(format!("unknown aggregation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    /// `max(1, round(ℓ_raw))`.
    pub ell_opt: usize,
    pub ell_raw: f64,
    pub l_used: usize,
    pub gamma_bar_sq: f64,
    pub delta_bar: f64,
    pub phi_constants: PhiConstants,
    pub grid_size: usize,
}

impl BandwidthEstimate {
    /// `ℓ_opt` bumped to the next odd integer, as the moving-average
    /// generator requires.
    pub fn ell_odd(&self) -> usize {
        to_odd(self.ell_opt)
    }
}

pub fn to_odd(ell: usize) -> usize {
    if ell.is_multiple_of(2) {
        ell + 1
    } else {
        ell
    }
}

/// `(4 Γ̄² / Δ̄)^{1/5} n^{1/5}`.
pub fn ell_from_constants(gamma_bar_sq: f64, delta_bar: f64, n: usize) -> Result<f64> {
    if delta_bar.is_nan() || delta_bar <= 0.0 {
        return Err(Error::DegenerateVariance(delta_bar));
    }
    Ok((4.0 * gamma_bar_sq / delta_bar).powf(0.2) * (n as f64).powf(0.2))
}

/// Centered indicator sequences `1(Û_i ≤ u_p) - C_n(u_p)` for a set of points,
/// stored `n × P`.
#[derive(Debug, Clone)]
pub struct IndicatorSeries {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl IndicatorSeries {
    pub fn new(pobs: &PseudoObsWindow, points: &[&[f64]]) -> Self {
        let n = pobs.m();
        let p = points.len();
        let mut values = vec![0.0; n * p];
        for (c, u) in points.iter().enumerate() {
            let ind = pobs.indicators(u);
            let mean = ind.iter().filter(|&&b| b).count() as f64 / n as f64;
            for (i, b) in ind.into_iter().enumerate() {
                values[i * p + c] = f64::from(u8::from(b)) - mean;
            }
        }
        Self { n, p, values }
    }

    pub fn from_grid(pobs: &PseudoObsWindow, grid: &EvalGrid) -> Self {
        let pts: Vec<&[f64]> = grid.points().collect();
        Self::new(pobs, &pts)
    }

    /// `γ̂(k, ·, ·)` for `k ≥ 0` as a `P × P` matrix; entry `(a, b)` pairs
    /// point `a` at time `i` with point `b` at time `i + k`.
    fn lag_matrix(&self, k: usize) -> Vec<f64> {
        let (n, p) = (self.n, self.p);
        let mut out = vec![0.0; p * p];
        for i in 0..n.saturating_sub(k) {
            let x = &self.values[i * p..(i + 1) * p];
            let y = &self.values[(i + k) * p..(i + k + 1) * p];
            for (a, xa) in x.iter().enumerate() {
                if *xa == 0.0 {
                    continue;
                }
                let row = &mut out[a * p..(a + 1) * p];
                for (o, yb) in row.iter_mut().zip(y) {
                    *o += xa * yb;
                }
            }
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    /// `γ̂(k, u_a, u_b)` for any `|k| < n`.
    pub fn gamma(&self, k: isize, a: usize, b: usize) -> f64 {
        let (n, p) = (self.n, self.p);
        let (lag, x, y) = if k >= 0 {
            (k as usize, a, b)
        } else {
            ((-k) as usize, b, a)
        };
        let s: f64 = (0..n.saturating_sub(lag))
            .map(|i| self.values[i * p + x] * self.values[(i + lag) * p + y])
            .sum();
        s / n as f64
    }

    /// `(σ̂, K̂)` as `P × P` matrices.
    pub fn lag_window(&self, l: usize) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut sigma = self.lag_matrix(0);
        let mut kmat = vec![0.0; p * p];
        if l == 0 {
            return (sigma, kmat);
        }
        let flat = KernelFamily::FlatTop { c: FLAT_TOP_LAG_WINDOW };
        let lags: Vec<Vec<f64>> = par::map_range(l, |k| self.lag_matrix(k + 1));
        for (idx, g) in lags.iter().enumerate() {
            let k = idx + 1;
            let w = flat.value(k as f64 / l as f64);
            if w == 0.0 {
                continue;
            }
            let k2 = (k * k) as f64;
            for a in 0..p {
                for b in 0..p {
                    // γ̂(-k, a, b) = γ̂(k, b, a)
                    let both = g[a * p + b] + g[b * p + a];
                    sigma[a * p + b] += w * both;
                    kmat[a * p + b] += w * k2 * both;
                }
            }
        }
        (sigma, kmat)
    }
}

/// `γ̂(k,u,v)` from the window's pseudo-observations.
pub fn cross_covariance(pobs: &PseudoObsWindow, k: isize, u: &[f64], v: &[f64]) -> Result<f64> {
    let n = pobs.m() as isize;
    if k.abs() >= n {
        return Err(Error::InvalidArgument(format!(
            "lag {k} out of range for a sample of size {n}"
        )));
    }
    Ok(IndicatorSeries::new(pobs, &[u, v]).gamma(k, 0, 1))
}

/// `(σ̂(u,v), K̂(u,v))` with truncation `L`; `L = 0` gives `(γ̂(0,u,v), 0)`.
pub fn lag_window_estimates(pobs: &PseudoObsWindow, l: usize, u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    if l >= pobs.m() {
        return Err(Error::InvalidArgument(format!(
            "truncation {l} must be below the sample size {}",
            pobs.m()
        )));
    }
    let (s, k) = IndicatorSeries::new(pobs, &[u, v]).lag_window(l);
    Ok((s[1], k[1]))
}

/// Sample autocorrelations `ρ̂(1..=max_lag)` with the usual `1/n` scaling.
/// A constant series yields zeros.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|k| {
            if c0 == 0.0 || k >= n {
                0.0
            } else {
                (0..n - k).map(|i| c[i] * c[i + k]).sum::<f64>() / c0
            }
        })
        .collect()
}

/// Per-margin lag after which the autocorrelations look negligible: the
/// first `m` such that `ρ̂(m..m+K_N-1)` all lie inside `±2 √(log₁₀ n / n)`,
/// with `K_N = max(5, ⌈√log₁₀ n⌉)` and lags scanned up to `⌈√n⌉ + K_N`.
/// Falls back to the largest significant lag, or 1.
pub fn select_lag_truncation_margin(x: &[f64]) -> usize {
    let n = x.len();
    let log_n = (n as f64).log10();
    let kn = 5usize.max(log_n.sqrt().ceil() as usize);
    let mmax = ((n as f64).sqrt().ceil() as usize + kn).min(n.saturating_sub(1)).max(1);
    let rho = autocorrelations(x, mmax);
    let crit = 2.0 * (log_n / n as f64).sqrt();
    let insignificant: Vec<bool> = rho.iter().map(|r| r.abs() < crit).collect();
    if mmax >= kn {
        for j in 0..=(mmax - kn) {
            if insignificant[j..j + kn].iter().all(|&b| b) {
                return j + 1;
            }
        }
    }
    insignificant.iter().rposition(|&b| !b).map_or(1, |idx| idx + 1)
}

/// `L = round(2 ψ(L_1, …, L_d))`, at least 1 and at most `n - 1`.
pub fn select_lag_truncation(data: &DataMatrix, psi: Aggregation) -> Result<usize> {
    let n = data.n();
    if n < 8 {
        return Err(Error::SampleTooSmall { n, min: 8 });
    }
    let lj: Vec<usize> = (0..data.d())
        .map(|j| select_lag_truncation_margin(&data.column(j)))
        .collect();
    let l = (2.0 * psi.apply(&lj)).round() as usize;
    Ok(l.clamp(1, n - 1))
}

/// `ℓ̂_opt` with an explicit truncation `L`.
pub fn estimate_ell_opt_with_l(
    data: &DataMatrix,
    phi: &KernelSpec,
    grid: &EvalGrid,
    l: usize,
) -> Result<BandwidthEstimate> {
    let phi_constants = phi.phi_constants()?;
    let n = data.n();
    let pobs = PseudoObsWindow::full(data);
    let series = IndicatorSeries::from_grid(&pobs, grid);
    let (sigma, kmat) = series.lag_window(l.min(n - 1));
    let g = grid.len();
    let g2 = (g * g) as f64;
    let phi2 = phi_constants.second_derivative_at_zero;
    let gamma_bar_sq = phi2 * phi2 / 4.0 * kmat.iter().map(|k| k * k).sum::<f64>() / g2;
    let diag_mean = (0..g).map(|i| sigma[i * g + i]).sum::<f64>() / g as f64;
    let sq_mean = sigma.iter().map(|s| s * s).sum::<f64>() / g2;
    let delta_bar = phi_constants.integral_of_square * (diag_mean * diag_mean + sq_mean);
    let ell_raw = ell_from_constants(gamma_bar_sq, delta_bar, n)?;
    Ok(BandwidthEstimate {
        ell_opt: (ell_raw.round() as usize).max(1),
        ell_raw,
        l_used: l,
        gamma_bar_sq,
        delta_bar,
        phi_constants,
        grid_size: g,
    })
}

/// `ℓ̂_opt` on an open lattice of `g` points (`g` a perfect `d`-th power).
pub fn estimate_ell_opt(data: &DataMatrix, phi: &KernelSpec, g: usize, psi: Aggregation) -> Result<BandwidthEstimate> {
    phi.second_derivative_at_zero()?;
    let grid = EvalGrid::open_lattice_with_size(g, data.d())?;
    let l = select_lag_truncation(data, psi)?;
    estimate_ell_opt_with_l(data, phi, &grid, l)
}

/// Multiplier-conditional covariance of the oracle replicate process:
/// `n^{-1} Σ_i Σ_j φ((i-j)/ℓ) {1(U_i ≤ u) - C(u)} {1(U_j ≤ v) - C(v)}`.
pub fn oracle_sigma_tilde(
    uniforms: &DataMatrix,
    phi: &KernelSpec,
    ell: usize,
    u: &[f64],
    v: &[f64],
    c_true: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let n = uniforms.n();
    let centered = |w: &[f64]| -> Vec<f64> {
        let c = c_true(w);
        uniforms
            .rows()
            .map(|r| f64::from(u8::from(r.iter().zip(w).all(|(x, y)| x <= y))) - c)
            .collect()
    };
    let a = centered(u);
    let b = centered(v);
    let weights: Vec<f64> = (0..ell.min(n)).map(|h| phi.value(h as f64 / ell as f64)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for (h, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            if i + h < n {
                total += w * a[i] * b[i + h];
            }
            if h > 0 && i >= h {
                total += w * a[i] * b[i - h];
            }
        }
    }
    total / n as f64
}
