//! Multiplier replicates of the sequential empirical copula process and
//! finite-difference estimators of the copula partial derivatives.
//!
//! With full-sample pseudo-observations `Û_i`, empirical copula `C_n` and
//! estimated partials `Ċ_{j,n}`, define for each grid point
//!
//! ```text
//! A_i(u) = {1(Û_i ≤ u) - C_n(u)} - Σ_j Ċ_{j,n}(u) {1(Û_ij ≤ u_j) - C_n(u^{(j)})}
//! ```
//!
//! Then `Ĉ^{(m)}(s,t,u) = n^{-1/2} Σ_{⌊ns⌋ < i ≤ ⌊nt⌋} ξ_i^{(m)} A_i(u)` and the
//! change-point replicate reduces to `D̂^{(m)}(k/n,u) = P_k(u) - (k/n) P_n(u)`
//! with `P_k` the running sum of `n^{-1/2} ξ_i A_i(u)`. [`ReplicateDesign`]
//! stores the `n × G` matrix `A` once per data set so every replicate is a
//! single pass over it.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::empirical::{floor_index, margin_point, EvalGrid, PseudoObsWindow, RankIndex};
use crate::error::{Error, Result};
use crate::multipliers::{gemm, MultiplierBatch};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialDerivEstimator {
    /// Central difference over `2h`, arguments clamped to `[0, 1]`.
    #[default]
    RemillardScaillet,
    /// Central difference divided by the clamped increment.
    BoundaryCorrected,
    /// One-sided difference within `h` of the boundary, central elsewhere.
    BucherRuppert,
}

impl std::str::FromStr for PartialDerivEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "rs" | "remillard-scaillet" | "remillardscaillet" => Ok(Self::RemillardScaillet),
            "bc" | "boundary-corrected" | "boundarycorrected" => Ok(Self::BoundaryCorrected),
            "br" | "bucher-ruppert" | "bucherruppert" => Ok(Self::BucherRuppert),
            other => Err(Error::InvalidArgument(format!(
                "unknown partial-derivative estimator '{other}'"
            ))),
        }
    }
}

/// `Ċ_{j,n}(u)` from the window's empirical copula with step `h = m^{-1/2}`,
/// clipped to `[0, 1]`.
pub fn partial_derivative(pobs: &PseudoObsWindow, j: usize, u: &[f64], estimator: PartialDerivEstimator) -> f64 {
    let h = 1.0 / (pobs.m() as f64).sqrt();
    let at = |x: f64| {
        let mut v = u.to_vec();
        v[j] = x;
        pobs.empirical_copula(&v)
    };
    let uj = u[j];
    let lo = (uj - h).max(0.0);
    let hi = (uj + h).min(1.0);
    let est = match estimator {
        PartialDerivEstimator::RemillardScaillet => (at(hi) - at(lo)) / (2.0 * h),
        PartialDerivEstimator::BoundaryCorrected => (at(hi) - at(lo)) / (hi - lo),
        PartialDerivEstimator::BucherRuppert => {
            if uj < h {
                (at(uj + h) - at(uj)) / h
            } else if uj > 1.0 - h {
                (at(uj) - at(uj - h)) / h
            } else {
                (at(hi) - at(lo)) / (2.0 * h)
            }
        }
    };
    est.clamp(0.0, 1.0)
}

/// `B̂^{(m)}(s,u) = n^{-1/2} Σ_{i≤⌊ns⌋} ξ_i {1(Û_i ≤ u) - C_n(u)}` for one
/// multiplier row.
pub fn replicate_bhat(pobs: &PseudoObsWindow, xi: &[f64], s: f64, u: &[f64]) -> f64 {
    let n = pobs.m();
    let ks = floor_index(n, s);
    let ind = pobs.indicators(u);
    let c = pobs.empirical_copula(u);
    let sum: f64 = (0..ks).map(|i| xi[i] * (f64::from(u8::from(ind[i])) - c)).sum();
    sum / (n as f64).sqrt()
}

/// `Ĉ^{(m)}(s,t,u)` for one multiplier row.
pub fn replicate_chat(
    pobs: &PseudoObsWindow,
    xi: &[f64],
    estimator: PartialDerivEstimator,
    s: f64,
    t: f64,
    u: &[f64],
) -> f64 {
    let diff = |v: &[f64]| replicate_bhat(pobs, xi, t, v) - replicate_bhat(pobs, xi, s, v);
    let mut value = diff(u);
    for j in 0..u.len() {
        value -= partial_derivative(pobs, j, u, estimator) * diff(&margin_point(u, j));
    }
    value
}

/// `Ẑ^{(m)}(s,x) = n^{-1/2} Σ_{i≤⌊ns⌋} ξ_i {1(X_i ≤ x) - F_n(x)}` on the raw
/// observations.
pub fn replicate_zhat(data: &DataMatrix, xi: &[f64], s: f64, x: &[f64]) -> f64 {
    let n = data.n();
    let ks = floor_index(n, s);
    let ind: Vec<f64> = data
        .rows()
        .map(|r| f64::from(u8::from(r.iter().zip(x).all(|(a, b)| a <= b))))
        .collect();
    let f = ind.iter().sum::<f64>() / n as f64;
    let sum: f64 = (0..ks).map(|i| xi[i] * (ind[i] - f)).sum();
    sum / (n as f64).sqrt()
}

/// Smallest and largest change-point index scanned, `⌊ns⌋ ∈ [2, n-2]`.
pub fn changepoint_range(n: usize) -> std::ops::RangeInclusive<usize> {
    2..=n.saturating_sub(2)
}

/// Precomputed replicate design for one data set and grid.
#[derive(Debug, Clone)]
pub struct ReplicateDesign {
    n: usize,
    g: usize,
    /// `n × G`, `A_i(u_g)`.
    a: Vec<f64>,
    /// `n × G`, `1(Û_i ≤ u_g) - C_n(u_g)`.
    b: Vec<f64>,
    /// `G × d`.
    partials: Vec<f64>,
    estimator: PartialDerivEstimator,
}

impl ReplicateDesign {
    pub fn new(pobs: &PseudoObsWindow, grid: &EvalGrid, estimator: PartialDerivEstimator) -> Result<Self> {
        let (n, d, g) = (pobs.m(), pobs.d(), grid.len());
        if grid.d() != d {
            return Err(Error::InvalidArgument(format!(
                "grid dimension {} does not match data dimension {d}",
                grid.d()
            )));
        }
        let partials: Vec<f64> = par::map_range(g, |p| {
            let u = grid.point(p);
            (0..d)
                .map(|j| partial_derivative(pobs, j, u, estimator))
                .collect::<Vec<f64>>()
        })
        .concat();
        let cn = pobs.empirical_copula_on(grid);
        let mut a = vec![0.0; n * g];
        let mut b = vec![0.0; n * g];
        for p in 0..g {
            let u = grid.point(p);
            let t = pobs.thresholds(u);
            let margin_c: Vec<f64> = (0..d)
                .map(|j| {
                    let count = (0..n).filter(|&i| i64::from(pobs.doubled_rank(i, j)) <= t[j]).count();
                    count as f64 / n as f64
                })
                .collect();
            for i in 0..n {
                let ranks = pobs.doubled_ranks_row(i);
                let full = f64::from(u8::from(pobs.below(i, &t))) - cn[p];
                let mut v = full;
                for j in 0..d {
                    let ind = f64::from(u8::from(i64::from(ranks[j]) <= t[j]));
                    v -= partials[p * d + j] * (ind - margin_c[j]);
                }
                a[i * g + p] = v;
                b[i * g + p] = full;
            }
        }
        Ok(Self {
            n,
            g,
            a,
            b,
            partials,
            estimator,
        })
    }

    pub fn from_data(data: &DataMatrix, grid: &EvalGrid, estimator: PartialDerivEstimator) -> Result<Self> {
        Self::new(&PseudoObsWindow::full(data), grid, estimator)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_len(&self) -> usize {
        self.g
    }

    pub fn estimator(&self) -> PartialDerivEstimator {
        self.estimator
    }

    /// `Ċ_{j,n}(u_p)` at grid point `p`.
    pub fn partial(&self, p: usize, j: usize) -> f64 {
        let d = self.partials.len() / self.g;
        self.partials[p * d + j]
    }

    fn check_batch(&self, batch: &MultiplierBatch) -> Result<()> {
        if batch.n() != self.n {
            return Err(Error::InvalidArgument(format!(
                "multiplier length {} does not match sample size {}",
                batch.n(),
                self.n
            )));
        }
        Ok(())
    }

    fn window_sum(&self, mat: &[f64], xi: &[f64], s: f64, t: f64) -> Vec<f64> {
        let (ks, kt) = (floor_index(self.n, s), floor_index(self.n, t));
        let mut out = vec![0.0; self.g];
        for i in ks..kt {
            let w = xi[i];
            for (o, a) in out.iter_mut().zip(&mat[i * self.g..(i + 1) * self.g]) {
                *o += w * a;
            }
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }

    /// `B̂(s,·)` over the grid for one multiplier row.
    pub fn bhat(&self, xi: &[f64], s: f64) -> Vec<f64> {
        self.window_sum(&self.b, xi, 0.0, s)
    }

    /// `Ĉ(s,t,·)` over the grid for one multiplier row.
    pub fn chat(&self, xi: &[f64], s: f64, t: f64) -> Vec<f64> {
        self.window_sum(&self.a, xi, s, t)
    }

    /// `Ĉ^{(m)}(0,1,u_p)` for all replicates, `M × G` row-major.
    pub fn chat_full(&self, batch: &MultiplierBatch) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let mm = batch.replicates();
        let mut out = vec![0.0; mm * self.g];
        gemm(mm, self.n, self.g, batch.values(), &self.a, &mut out);
        let scale = 1.0 / (self.n as f64).sqrt();
        out.iter_mut().for_each(|o| *o *= scale);
        Ok(out)
    }

    /// `D̂(k/n, u_p)` for `k` in [`changepoint_range`], `|k| × G` row-major.
    pub fn changepoint_surface(&self, xi: &[f64]) -> Vec<f64> {
        let (n, g) = (self.n, self.g);
        let total = self.chat(xi, 0.0, 1.0);
        let mut prefix = vec![0.0; g];
        let scale = 1.0 / (n as f64).sqrt();
        let range = changepoint_range(n);
        let mut out = Vec::with_capacity(range.clone().count() * g);
        for k in 1..=n.saturating_sub(2) {
            let w = xi[k - 1] * scale;
            for (p, a) in prefix.iter_mut().zip(&self.a[(k - 1) * g..k * g]) {
                *p += w * a;
            }
            if range.contains(&k) {
                let lam = k as f64 / n as f64;
                out.extend(prefix.iter().zip(&total).map(|(p, t)| p - lam * t));
            }
        }
        out
    }

    /// `(sup |D̂|, mean D̂²)` over the change-point range and the grid,
    /// without materializing the surface.
    pub fn changepoint_functionals(&self, xi: &[f64]) -> (f64, f64) {
        let (n, g) = (self.n, self.g);
        let total = self.chat(xi, 0.0, 1.0);
        let mut prefix = vec![0.0; g];
        let scale = 1.0 / (n as f64).sqrt();
        let range = changepoint_range(n);
        let (mut sup, mut sq, mut count) = (0.0f64, 0.0f64, 0usize);
        for k in 1..=n.saturating_sub(2) {
            let w = xi[k - 1] * scale;
            for (p, a) in prefix.iter_mut().zip(&self.a[(k - 1) * g..k * g]) {
                *p += w * a;
            }
            if range.contains(&k) {
                let lam = k as f64 / n as f64;
                for (p, t) in prefix.iter().zip(&total) {
                    let v = p - lam * t;
                    sup = sup.max(v.abs());
                    sq += v * v;
                }
                count += g;
            }
        }
        (sup, if count == 0 { 0.0 } else { sq / count as f64 })
    }
}

/// Observed change-point surface
/// `D_n(k/n,u) = √n (k/n)((n-k)/n) {C_{1:k}(u) - C_{k+1:n}(u)}` for `k` in
/// [`changepoint_range`], `|k| × G` row-major.
pub fn changepoint_observed(data: &DataMatrix, grid: &EvalGrid) -> Result<Vec<f64>> {
    let n = data.n();
    if grid.d() != data.d() {
        return Err(Error::InvalidArgument("grid and data dimensions differ".into()));
    }
    let index = RankIndex::new(data);
    let ks: Vec<usize> = changepoint_range(n).collect();
    let rows: Vec<Result<Vec<f64>>> = par::map_range(ks.len(), |r| {
        let k = ks[r];
        let left = index.window(1, k)?.empirical_copula_on(grid);
        let right = index.window(k + 1, n)?.empirical_copula_on(grid);
        let f = (n as f64).sqrt() * (k as f64 / n as f64) * ((n - k) as f64 / n as f64);
        Ok(left.iter().zip(&right).map(|(l, r)| f * (l - r)).collect())
    });
    let mut out = Vec::with_capacity(ks.len() * grid.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Observed surface and dense replicate surfaces (`M × |k| × G` reals).
#[derive(Debug, Clone)]
pub struct ChangePointSurfaces {
    pub ks: Vec<usize>,
    pub observed: Vec<f64>,
    pub replicates: Vec<f64>,
}

/// Dense change-point surfaces. Memory grows as `M n G`; the test itself
/// uses [`ReplicateDesign::changepoint_functionals`] instead.
pub fn changepoint_processes(
    data: &DataMatrix,
    batch: &MultiplierBatch,
    estimator: PartialDerivEstimator,
    grid: &EvalGrid,
) -> Result<ChangePointSurfaces> {
    let design = ReplicateDesign::from_data(data, grid, estimator)?;
    design.check_batch(batch)?;
    let observed = changepoint_observed(data, grid)?;
    let reps: Vec<Vec<f64>> = par::map_range(batch.replicates(), |m| design.changepoint_surface(batch.row(m)));
    Ok(ChangePointSurfaces {
        ks: changepoint_range(data.n()).collect(),
        observed,
        replicates: reps.concat(),
    })
}
