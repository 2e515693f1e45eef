//! Dependent multiplier sequences.
//!
//! A batch holds `M` independent copies `ξ^{(m)}` of an `ℓ`-dependent,
//! mean-zero, unit-variance sequence of length `n`. Two constructions:
//!
//! - moving average: `ξ_i = Σ_{j=1}^{ℓ} w̃_j Z_{j+i-1}` with
//!   `w_j = κ((j - b)/b)`, `ℓ = 2b - 1`, and `w̃ = w / ‖w‖₂`;
//! - covariance matrix: `ξ = Σ^{1/2} Z` with `Σ_{ij} = φ((i - j)/ℓ)`.
//!
//! Replicate `m` is drawn from its own stream `(seed, MULTIPLIERS, m)`, so a
//! batch is bit-for-bit reproducible whatever the thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelRole, KernelSpec};
use crate::par;
use crate::rng::{self, StreamRng};

/// Law of the i.i.d. variables `Z` the multipliers are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseLaw {
    #[default]
    #[serde(alias = "normal")]
    StandardNormal,
    /// Symmetric `±1`.
    Rademacher,
}

impl BaseLaw {
    #[inline]
    fn draw(self, rng: &mut StreamRng) -> f64 {
        match self {
            BaseLaw::StandardNormal => rng.sample(StandardNormal),
            BaseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl std::str::FromStr for BaseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "standardnormal" | "gaussian" => Ok(BaseLaw::StandardNormal),
            "rademacher" => Ok(BaseLaw::Rademacher),
            other => Err(Error::InvalidArgument(format!("unknown base law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MultiplierMethod {
    MovingAverage(KernelSpec),
    CovarianceMatrix(KernelSpec),
}

impl MultiplierMethod {
    pub fn kernel(&self) -> KernelSpec {
        match self {
            MultiplierMethod::MovingAverage(k) | MultiplierMethod::CovarianceMatrix(k) => *k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MultiplierMethod::MovingAverage(_) => "moving-average",
            MultiplierMethod::CovarianceMatrix(_) => "covariance-matrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierConfig {
    pub method: MultiplierMethod,
    pub ell: usize,
    pub n: usize,
    /// Number of replicates `M`.
    pub replicates: usize,
    pub seed: u64,
    pub base_law: BaseLaw,
}

impl MultiplierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::InvalidArgument("bandwidth must be at least 1".into()));
        }
        if self.n == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "need a positive sequence length and replicate count".into(),
            ));
        }
        match self.method {
            MultiplierMethod::MovingAverage(k) => {
                if k.role != KernelRole::WeightKappa {
                    return Err(Error::InvalidArgument(format!(
                        "moving-average weights need a weight kernel, got {k} as a covariance"
                    )));
                }
                if self.ell.is_multiple_of(2) {
                    return Err(Error::InvalidArgument(format!(
                        "moving-average bandwidth must be odd, got {}",
                        self.ell
                    )));
                }
                if self.ell >= 2 * self.n {
                    log::warn!(
                        "bandwidth {} is at least twice the sequence length {}",
                        self.ell,
                        self.n
                    );
                }
            }
            MultiplierMethod::CovarianceMatrix(k) => {
                if k.role != KernelRole::CovariancePhi {
                    return Err(Error::KernelRoleMismatch { kernel: k.to_string() });
                }
            }
        }
        Ok(())
    }
}

/// `M × n` multipliers, row `m` being replicate `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierBatch {
    xi: Vec<f64>,
    n: usize,
    replicates: usize,
    config: Option<MultiplierConfig>,
}

impl MultiplierBatch {
    /// Wraps externally supplied multipliers (row-major, `M × n`).
    pub fn from_values(replicates: usize, n: usize, xi: Vec<f64>) -> Result<Self> {
        if xi.len() != replicates * n || n == 0 || replicates == 0 {
            return Err(Error::InvalidArgument(format!(
                "expected {replicates} x {n} multipliers, got {}",
                xi.len()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multiplier value".into()));
        }
        Ok(Self {
            xi,
            n,
            replicates,
            config: None,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn replicates(&self) -> usize {
        self.replicates
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.xi[m * self.n..(m + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.xi
    }

    pub fn config(&self) -> Option<&MultiplierConfig> {
        self.config.as_ref()
    }
}

/// Draws a batch with the configured method.
pub fn generate(config: &MultiplierConfig) -> Result<MultiplierBatch> {
    match config.method {
        MultiplierMethod::MovingAverage(_) => generate_moving_average(config),
        MultiplierMethod::CovarianceMatrix(_) => generate_covariance_matrix(config),
    }
}

/// Normalized moving-average weights `w̃_1..w̃_ℓ`.
pub fn moving_average_weights(kappa: &KernelSpec, ell: usize) -> Result<Vec<f64>> {
    if ell == 0 || ell.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "moving-average bandwidth must be odd, got {ell}"
        )));
    }
    let b = ell.div_ceil(2);
    let w: Vec<f64> = (1..=ell)
        .map(|j| kappa.value((j as f64 - b as f64) / b as f64))
        .collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(Error::InvalidKernel(format!(
            "kernel {kappa} gives all-zero weights at bandwidth {ell}"
        )));
    }
    Ok(w.into_iter().map(|x| x / norm).collect())
}

pub fn generate_moving_average(config: &MultiplierConfig) -> Result<MultiplierBatch> {
    config.validate()?;
    let MultiplierMethod::MovingAverage(kappa) = config.method else {
        return Err(Error::InvalidArgument("expected a moving-average config".into()));
    };
    let weights = moving_average_weights(&kappa, config.ell)?;
    let (n, ell) = (config.n, config.ell);
    let mut xi = vec![0.0; config.replicates * n];
    par::for_each_chunk_mut(&mut xi, n, |m, row| {
        let mut rng = rng::stream(config.seed, rng::domain::MULTIPLIERS, m as u64);
        let z: Vec<f64> = (0..n + ell - 1).map(|_| config.base_law.draw(&mut rng)).collect();
        for (i, out) in row.iter_mut().enumerate() {
            *out = weights.iter().zip(&z[i..i + ell]).map(|(w, z)| w * z).sum();
        }
    });
    Ok(MultiplierBatch {
        xi,
        n,
        replicates: config.replicates,
        config: Some(*config),
    })
}

pub fn generate_covariance_matrix(config: &MultiplierConfig) -> Result<MultiplierBatch> {
    config.validate()?;
    let MultiplierMethod::CovarianceMatrix(phi) = config.method else {
        return Err(Error::InvalidArgument("expected a covariance-matrix config".into()));
    };
    let n = config.n;
    let root = covariance_root(n, config.ell, &phi)?;
    let mut z = vec![0.0; config.replicates * n];
    par::for_each_chunk_mut(&mut z, n, |m, row| {
        let mut rng = rng::stream(config.seed, rng::domain::MULTIPLIERS, m as u64);
        for v in row.iter_mut() {
            *v = config.base_law.draw(&mut rng);
        }
    });
    // Ξ = Z Rᵀ = Z R (R symmetric)
    let mut xi = vec![0.0; config.replicates * n];
    gemm(config.replicates, n, n, &z, &root, &mut xi);
    Ok(MultiplierBatch {
        xi,
        n,
        replicates: config.replicates,
        config: Some(*config),
    })
}

/// `C = A B` for row-major `A (m×k)`, `B (k×n)`, `C (m×n)`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // row blocks of A are independent
    let block = 64usize;
    par::for_each_chunk_mut(c, block * n, |bi, cblock| {
        let rows = cblock.len() / n;
        let a0 = bi * block * k;
        // SAFETY: slices are sized rows×k, k×n and rows×n with unit column
        // stride and row strides k, n, n.
        unsafe {
            matrixmultiply::dgemm(
                rows,
                k,
                n,
                1.0,
                a[a0..].as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                n as isize,
                1,
                0.0,
                cblock.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    });
}

/// Toeplitz matrix `[φ((i - j)/ℓ)]`, row-major.
pub fn covariance_matrix(n: usize, ell: usize, phi: &KernelSpec) -> Vec<f64> {
    let lag: Vec<f64> = (0..n).map(|h| phi.value(h as f64 / ell as f64)).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = lag[i.abs_diff(j)];
        }
    }
    s
}

type RootKey = (usize, usize, String);

fn root_cache() -> &'static Mutex<HashMap<RootKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<RootKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const ROOT_CACHE_CAPACITY: usize = 8;
const NEGATIVE_EIGEN_TOL: f64 = 1e-6;
const EIGEN_CLIP_REL: f64 = 1e-10;

/// Symmetric square root of `[φ((i - j)/ℓ)]`, cached per `(n, ℓ, φ)`.
pub fn covariance_root(n: usize, ell: usize, phi: &KernelSpec) -> Result<Arc<Vec<f64>>> {
    if phi.role != KernelRole::CovariancePhi {
        return Err(Error::KernelRoleMismatch {
            kernel: phi.to_string(),
        });
    }
    let key = (n, ell, phi.to_string());
    if let Some(r) = root_cache().lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(r));
    }
    let root = Arc::new(symmetric_root(n, &covariance_matrix(n, ell, phi))?);
    let mut cache = root_cache().lock().expect("cache lock");
    if cache.len() >= ROOT_CACHE_CAPACITY {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&root));
    Ok(root)
}

fn symmetric_root(n: usize, sigma: &[f64]) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, sigma));
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin < -NEGATIVE_EIGEN_TOL * lmax.max(1.0) {
        return Err(Error::NotPositiveSemiDefinite { min_eigenvalue: lmin });
    }
    let sqrt_l: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < EIGEN_CLIP_REL * lmax { 0.0 } else { l.sqrt() })
        .collect();
    let v = &eig.eigenvectors;
    // R = V diag(√λ) Vᵀ
    let mut scaled = v.clone();
    for (c, s) in sqrt_l.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*s);
    }
    let r = scaled * v.transpose();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = 0.5 * (r[(i, j)] + r[(j, i)]);
        }
    }
    Ok(out)
}
