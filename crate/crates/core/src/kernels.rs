//! Kernel and covariance functions used for multiplier generation and for
//! lag-window estimation.
//!
//! A [`KernelSpec`] pairs a [`KernelFamily`] with the role it plays: a
//! moving-average weight function `κ`, or the covariance function `φ` of a
//! dependent multiplier sequence. Every family is symmetric, equals 1 at the
//! origin, lies in `[0, 1]` and vanishes outside `[-1, 1]`.
//!
//! The uniform-sum family `κ_{U,p}` is the density of a sum of `p` centered
//! uniforms, rescaled to `(-1, 1)` and normalized to 1 at the origin. It is
//! evaluated as a divided difference of truncated powers over the sorted knot
//! sequence, which for unit knot spacing stays accurate up to `p = 16`.
//!
//! Numerical constants for `φ` that have no closed form here, computed by the
//! routines below (absolute quadrature tolerance `1e-10`):
//!
//! | `φ`        | `φ''(0)`  | `∫ φ²`     |
//! |------------|-----------|------------|
//! | `usum:6`   | -180/11   | 0.434078   |
//! | `usum:8`   | -3360/151 | 0.372339   |
//!
//! (See the `constants_table` test for the frozen values.)

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_piecewise;

/// Absolute tolerance for all kernel integrals.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Largest supported number of summands for [`KernelFamily::UniformSum`].
pub const MAX_UNIFORM_SUM: u32 = 16;

/// Flat-top plateau used by the lag-window estimators.
pub const FLAT_TOP_LAG_WINDOW: f64 = 0.5;

/// Flat-top plateau suggested for moving-average multiplier weights.
pub const FLAT_TOP_MULTIPLIER: f64 = 0.14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelFamily {
    Truncated,
    Bartlett,
    Parzen,
    /// Trapezoid equal to 1 on `[-c, c]`.
    FlatTop {
        c: f64,
    },
    /// Normalized density of a sum of `p` uniforms.
    UniformSum {
        p: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelRole {
    WeightKappa,
    CovariancePhi,
}

/// A validated kernel together with its role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub role: KernelRole,
}

/// `(φ''(0), ∫ φ²)`, the two kernel constants entering the optimal bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiConstants {
    pub second_derivative_at_zero: f64,
    pub integral_of_square: f64,
}

impl KernelFamily {
    fn validate(self) -> Result<Self> {
        match self {
            KernelFamily::FlatTop { c } if !(0.0..=1.0).contains(&c) => {
                Err(Error::InvalidKernel(format!("flat-top plateau c = {c} outside [0, 1]")))
            }
            KernelFamily::UniformSum { p } if p == 0 || p > MAX_UNIFORM_SUM => Err(Error::InvalidKernel(format!(
                "uniform-sum order p = {p} outside 1..={MAX_UNIFORM_SUM}"
            ))),
            other => Ok(other),
        }
    }

    /// Whether the Toeplitz matrices `[φ((i-j)/ℓ)]` built from this family
    /// are positive semi-definite.
    pub fn admissible_as_covariance(self) -> bool {
        match self {
            KernelFamily::Truncated | KernelFamily::FlatTop { .. } => false,
            KernelFamily::UniformSum { p } => p >= 2,
            KernelFamily::Bartlett | KernelFamily::Parzen => true,
        }
    }

    /// Kernel value. Non-finite input propagates as NaN.
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        let a = x.abs();
        if a.is_nan() {
            return f64::NAN;
        }
        match self {
            KernelFamily::Truncated => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Bartlett => (1.0 - a).max(0.0),
            KernelFamily::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else if a <= 1.0 {
                    let b = 1.0 - a;
                    2.0 * b * b * b
                } else {
                    0.0
                }
            }
            KernelFamily::FlatTop { c } => {
                if a > 1.0 {
                    0.0
                } else if c >= 1.0 || a <= c {
                    1.0
                } else {
                    ((1.0 - a) / (1.0 - c)).clamp(0.0, 1.0)
                }
            }
            KernelFamily::UniformSum { p } => {
                if a >= 1.0 {
                    return if p == 1 && a == 1.0 { 1.0 } else { 0.0 };
                }
                let half = p as f64 / 2.0;
                uniform_sum_density(p, a * half, 0) / uniform_sum_density(p, 0.0, 0)
            }
        }
    }

    /// Points of `[-1, 1]` where the kernel is not a single polynomial.
    pub fn knots(self) -> Vec<f64> {
        match self {
            KernelFamily::Truncated => vec![-1.0, 1.0],
            KernelFamily::Bartlett => vec![-1.0, 0.0, 1.0],
            KernelFamily::Parzen => vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            KernelFamily::FlatTop { c } => vec![-1.0, -c, c, 1.0],
            KernelFamily::UniformSum { p } => (0..=p).map(|k| -1.0 + 2.0 * k as f64 / p as f64).collect(),
        }
    }

    /// Lipschitz constant on `[-1, 1]` where a finite one is known.
    pub fn lipschitz_constant(self) -> Option<f64> {
        match self {
            KernelFamily::Bartlett => Some(1.0),
            KernelFamily::Parzen => Some(2.0),
            KernelFamily::FlatTop { c } if c < 1.0 => Some(1.0 / (1.0 - c)),
            KernelFamily::UniformSum { p: 2 } => Some(1.0),
            _ => None,
        }
    }

    fn name(self) -> String {
        match self {
            KernelFamily::Truncated => "truncated".into(),
            KernelFamily::Bartlett => "bartlett".into(),
            KernelFamily::Parzen => "parzen".into(),
            KernelFamily::FlatTop { c } => format!("flattop:{c}"),
            KernelFamily::UniformSum { p } => format!("usum:{p}"),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let family = match s.split_once(':') {
            None => match s.as_str() {
                "truncated" => KernelFamily::Truncated,
                "bartlett" => KernelFamily::Bartlett,
                "parzen" => KernelFamily::Parzen,
                "flattop" => KernelFamily::FlatTop { c: FLAT_TOP_LAG_WINDOW },
                _ => return Err(Error::InvalidKernel(format!("unknown kernel '{s}'"))),
            },
            Some(("flattop", c)) => KernelFamily::FlatTop {
                c: c.parse()
                    .map_err(|_| Error::InvalidKernel(format!("bad flat-top plateau '{c}'")))?,
            },
            Some(("usum", p)) => KernelFamily::UniformSum {
                p: p.parse()
                    .map_err(|_| Error::InvalidKernel(format!("bad uniform-sum order '{p}'")))?,
            },
            _ => return Err(Error::InvalidKernel(format!("unknown kernel '{s}'"))),
        };
        family.validate()
    }
}

impl TryFrom<String> for KernelFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelFamily> for String {
    fn from(k: KernelFamily) -> String {
        k.name()
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, role: KernelRole) -> Result<Self> {
        let family = family.validate()?;
        if role == KernelRole::CovariancePhi && !family.admissible_as_covariance() {
            return Err(Error::KernelRoleMismatch {
                kernel: family.to_string(),
            });
        }
        Ok(Self { family, role })
    }

    pub fn weight(family: KernelFamily) -> Result<Self> {
        Self::new(family, KernelRole::WeightKappa)
    }

    pub fn covariance(family: KernelFamily) -> Result<Self> {
        Self::new(family, KernelRole::CovariancePhi)
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.family.value(x)
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("kernel argument {x}")));
        }
        Ok(self.family.value(x))
    }

    /// `κ⋆κ(2x) / κ⋆κ(0)`: the covariance function induced by moving-average
    /// weights `κ`.
    pub fn self_convolution_normalized(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("kernel argument {x}")));
        }
        if self.role != KernelRole::WeightKappa {
            return Err(Error::InvalidArgument(
                "self-convolution is defined for moving-average weights".into(),
            ));
        }
        let y = 2.0 * x;
        if y.abs() >= 2.0 {
            return Ok(0.0);
        }
        Ok(self_convolution(self.family, y) / self_convolution(self.family, 0.0))
    }

    /// `φ''(0)`.
    pub fn second_derivative_at_zero(&self) -> Result<f64> {
        match self.family {
            KernelFamily::Parzen => Ok(-12.0),
            KernelFamily::UniformSum { p } if p >= 4 => {
                let half = p as f64 / 2.0;
                Ok(uniform_sum_density(p, 0.0, 2) * half * half / uniform_sum_density(p, 0.0, 0))
            }
            f if !f.admissible_as_covariance() => Err(Error::KernelRoleMismatch { kernel: f.to_string() }),
            f => Err(Error::BandwidthKernelNotSmooth(f.to_string())),
        }
    }

    /// `∫_{-1}^{1} φ(x)² dx`.
    pub fn integral_of_square(&self) -> Result<f64> {
        match self.family {
            KernelFamily::Bartlett => Ok(2.0 / 3.0),
            KernelFamily::Parzen => Ok(151.0 / 280.0),
            f if !f.admissible_as_covariance() => Err(Error::KernelRoleMismatch { kernel: f.to_string() }),
            f => {
                let g = |x: f64| {
                    let v = f.value(x);
                    v * v
                };
                Ok(integrate_piecewise(&g, -1.0, 1.0, &f.knots(), QUADRATURE_TOL))
            }
        }
    }

    pub fn phi_constants(&self) -> Result<PhiConstants> {
        Ok(PhiConstants {
            second_derivative_at_zero: self.second_derivative_at_zero()?,
            integral_of_square: self.integral_of_square()?,
        })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.family.fmt(f)
    }
}

/// `κ⋆κ(y) = ∫ κ(t) κ(y - t) dt`.
fn self_convolution(family: KernelFamily, y: f64) -> f64 {
    let lo = (-1.0f64).max(y - 1.0);
    let hi = 1.0f64.min(y + 1.0);
    let knots = family.knots();
    let mut breaks = knots.clone();
    breaks.extend(knots.iter().map(|k| y - k));
    let f = |t: f64| family.value(t) * family.value(y - t);
    integrate_piecewise(&f, lo, hi, &breaks, QUADRATURE_TOL)
}

/// `r`-th derivative (r ∈ {0, 2}) of the density of a sum of `p` uniforms on
/// `(-1/2, 1/2)`, evaluated at `y`, as `p` times the divided difference of
/// `t ↦ (t - y)_+^{p-1}` over the knots `-p/2, .., p/2`.
fn uniform_sum_density(p: u32, y: f64, derivative: u32) -> f64 {
    debug_assert!(derivative == 0 || derivative == 2);
    let y = y.abs();
    let half = p as f64 / 2.0;
    if y >= half {
        return 0.0;
    }
    if derivative > 0 && p < derivative + 1 {
        return 0.0;
    }
    let degree = (p - 1 - derivative) as i32;
    let scale: f64 = (0..derivative).map(|i| (p - 1 - i) as f64).product();
    let mut table: Vec<f64> = (0..=p)
        .map(|k| {
            let d = -half + k as f64 - y;
            if d <= 0.0 {
                0.0
            } else if degree == 0 {
                1.0
            } else {
                d.powi(degree)
            }
        })
        .collect();
    // Unit knot spacing: the order-r divided difference divides by r.
    for order in 1..=p as usize {
        for i in 0..=(p as usize - order) {
            table[i] = (table[i + 1] - table[i]) / order as f64;
        }
    }
    p as f64 * scale * table[0]
}
