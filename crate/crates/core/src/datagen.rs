//! Copula samplers and the serially dependent data models.
//!
//! Innovations are `ε_i = (Φ^{-1}(U_i1), …, Φ^{-1}(U_id))` with `U_i` drawn
//! i.i.d. from the copula. Series start at `X_{-B} = ε_{-B}` (B = burn-in)
//! and run the recursion up to `X_n`; the last `n` values are returned.
//!
//! | model | recursion |
//! |-------|-----------|
//! | iid   | `X_i = ε_i` |
//! | ar1   | `X_i = 0.5 X_{i-1} + ε_i` |
//! | nar   | `X_i = 0.6 sin(X_{i-1}) + ε_i` |
//! | expar | `X_i = {0.8 - 1.1 exp(-50 X_{i-1}²)} X_{i-1} + 0.1 ε_i` |
//! | garch | `σ_i² = ω + β σ_{i-1}² + α ε_{i-1}²`, `X_i = σ_i ε_i` |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Parametric copula with closed-form cdf and partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CopulaSpec {
    Independence,
    /// `θ > 0`.
    Clayton {
        theta: f64,
    },
    /// `θ ≥ 1`.
    Gumbel {
        theta: f64,
    },
}

impl CopulaSpec {
    pub fn validate(self) -> Result<Self> {
        match self {
            CopulaSpec::Clayton { theta } if !(theta > 0.0 && theta.is_finite()) => Err(Error::InvalidArgument(
                format!("Clayton parameter must be positive, got {theta}"),
            )),
            CopulaSpec::Gumbel { theta } if !(theta >= 1.0 && theta.is_finite()) => Err(Error::InvalidArgument(
                format!("Gumbel parameter must be at least 1, got {theta}"),
            )),
            c => Ok(c),
        }
    }

    pub fn kendall_tau(self) -> f64 {
        match self {
            CopulaSpec::Independence => 0.0,
            CopulaSpec::Clayton { theta } => theta / (theta + 2.0),
            CopulaSpec::Gumbel { theta } => 1.0 - 1.0 / theta,
        }
    }

    /// `C(u)`; callers guarantee `u ∈ [0,1]^d`.
    pub fn cdf_unchecked(self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        match self {
            CopulaSpec::Independence => u.iter().product(),
            CopulaSpec::Clayton { theta } => {
                let s: f64 = u.iter().map(|&x| x.powf(-theta) - 1.0).sum::<f64>() + 1.0;
                s.powf(-1.0 / theta)
            }
            CopulaSpec::Gumbel { theta } => {
                let a: f64 = u.iter().map(|&x| (-x.ln()).powf(theta)).sum();
                (-a.powf(1.0 / theta)).exp()
            }
        }
    }

    pub fn cdf(self, u: &[f64]) -> Result<f64> {
        check_unit(u)?;
        Ok(self.cdf_unchecked(u))
    }

    /// `∂C/∂u_j`, set to zero where `u_j ∈ {0, 1}`.
    pub fn partial_unchecked(self, j: usize, u: &[f64]) -> f64 {
        let uj = u[j];
        if uj <= 0.0 || uj >= 1.0 {
            return 0.0;
        }
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        match self {
            CopulaSpec::Independence => u.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, x)| x).product(),
            CopulaSpec::Clayton { theta } => {
                let c = self.cdf_unchecked(u);
                c.powf(1.0 + theta) * uj.powf(-theta - 1.0)
            }
            CopulaSpec::Gumbel { theta } => {
                let a: f64 = u.iter().map(|&x| (-x.ln()).powf(theta)).sum();
                let c = (-a.powf(1.0 / theta)).exp();
                c * a.powf(1.0 / theta - 1.0) * (-uj.ln()).powf(theta - 1.0) / uj
            }
        }
    }

    pub fn partial(self, j: usize, u: &[f64]) -> Result<f64> {
        check_unit(u)?;
        if j >= u.len() {
            return Err(Error::InvalidArgument(format!("axis {j} out of range")));
        }
        Ok(self.partial_unchecked(j, u))
    }

    /// One draw from the copula in dimension `d`.
    pub fn draw(self, d: usize, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            CopulaSpec::Independence => (0..d).map(|_| open_unit(rng)).collect(),
            CopulaSpec::Clayton { theta } => {
                let v: f64 = Gamma::new(1.0 / theta, 1.0).expect("validated parameter").sample(rng);
                (0..d)
                    .map(|_| {
                        let e: f64 = Exp1.sample(rng);
                        (1.0 + e / v).powf(-1.0 / theta)
                    })
                    .collect()
            }
            CopulaSpec::Gumbel { theta } => {
                if theta == 1.0 {
                    return (0..d).map(|_| open_unit(rng)).collect();
                }
                let alpha = 1.0 / theta;
                let v = positive_stable(alpha, rng);
                (0..d)
                    .map(|_| {
                        let e: f64 = Exp1.sample(rng);
                        (-(e / v).powf(alpha)).exp()
                    })
                    .collect()
            }
        }
    }

    /// `count × d` i.i.d. draws.
    pub fn sample(self, count: usize, d: usize, seed: u64) -> Result<DataMatrix> {
        let spec = self.validate()?;
        let mut r = rng::stream(seed, rng::domain::DATA, 0);
        let mut values = Vec::with_capacity(count * d);
        for _ in 0..count {
            values.extend(spec.draw(d, &mut r).into_iter().map(clamp_open));
        }
        DataMatrix::new(count, d, values)
    }
}

fn check_unit(u: &[f64]) -> Result<()> {
    if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument(format!("point {u:?} outside [0,1]^d")));
    }
    Ok(())
}

/// Keeps draws strictly inside (0,1) so that `Φ^{-1}` stays finite.
fn clamp_open(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn open_unit(rng: &mut StreamRng) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

/// Positive stable variable with Laplace transform `exp(-s^α)`, `0 < α < 1`
/// (Chambers–Mallows–Stuck).
fn positive_stable(alpha: f64, rng: &mut StreamRng) -> f64 {
    let theta = std::f64::consts::PI * open_unit(rng);
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * theta).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CopulaSpec::Independence => write!(f, "independence"),
            CopulaSpec::Clayton { theta } => write!(f, "clayton:{theta}"),
            CopulaSpec::Gumbel { theta } => write!(f, "gumbel:{theta}"),
        }
    }
}

impl FromStr for CopulaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a.to_string(), Some(b.to_string())),
            None => (s.clone(), None),
        };
        let theta = || -> Result<f64> {
            param
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument(format!("copula '{s}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad copula parameter: {e}")))
        };
        let spec = match name.as_str() {
            "independence" | "indep" | "pi" => CopulaSpec::Independence,
            "clayton" => CopulaSpec::Clayton { theta: theta()? },
            "gumbel" | "gumbel-hougaard" => CopulaSpec::Gumbel { theta: theta()? },
            other => return Err(Error::InvalidArgument(format!("unknown copula '{other}'"))),
        };
        spec.validate()
    }
}

impl TryFrom<String> for CopulaSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CopulaSpec> for String {
    fn from(c: CopulaSpec) -> Self {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Iid,
    Ar1,
    Nar,
    Expar,
    Garch,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" => Ok(Self::Iid),
            "ar1" => Ok(Self::Ar1),
            "nar" => Ok(Self::Nar),
            "expar" => Ok(Self::Expar),
            "garch" => Ok(Self::Garch),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Iid => "iid",
            ModelKind::Ar1 => "ar1",
            ModelKind::Nar => "nar",
            ModelKind::Expar => "expar",
            ModelKind::Garch => "garch",
        };
        f.write_str(s)
    }
}

/// GARCH(1,1) parameters `(ω, β, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl GarchParams {
    pub const fn new(omega: f64, beta: f64, alpha: f64) -> Self {
        Self { omega, beta, alpha }
    }

    pub fn stationary_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

pub const DEFAULT_GARCH: [GarchParams; 2] = [
    GarchParams::new(0.012, 0.919, 0.072),
    GarchParams::new(0.037, 0.868, 0.115),
];

pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataModel {
    pub kind: ModelKind,
    pub copula: CopulaSpec,
    pub n: usize,
    pub d: usize,
    pub burn_in: usize,
    /// One triple per margin; margins beyond the list reuse the last one.
    pub garch: Vec<GarchParams>,
}

impl DataModel {
    pub fn new(kind: ModelKind, copula: CopulaSpec, n: usize) -> Self {
        Self {
            kind,
            copula,
            n,
            d: 2,
            burn_in: DEFAULT_BURN_IN,
            garch: DEFAULT_GARCH.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.copula.validate()?;
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidArgument("model needs n >= 1 and d >= 1".into()));
        }
        if self.kind == ModelKind::Garch {
            if self.garch.is_empty() {
                return Err(Error::InvalidArgument("missing GARCH parameters".into()));
            }
            for g in &self.garch {
                if !(g.omega > 0.0 && g.alpha >= 0.0 && g.beta >= 0.0 && g.alpha + g.beta < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "GARCH parameters {g:?} violate stationarity"
                    )));
                }
            }
        }
        Ok(())
    }

    fn garch_for(&self, j: usize) -> GarchParams {
        self.garch[j.min(self.garch.len() - 1)]
    }

    /// Copula sample `U_{-B}, …, U_n` (`n + B + 1` rows).
    pub fn innovation_uniforms(&self, seed: u64) -> Result<DataMatrix> {
        self.copula.sample(self.n + self.burn_in + 1, self.d, seed)
    }

    pub fn simulate(&self, seed: u64) -> Result<DataMatrix> {
        self.validate()?;
        let u = self.innovation_uniforms(seed)?;
        self.run_recursion(&u)
    }

    /// Applies the model recursion to given innovation uniforms.
    pub fn run_recursion(&self, uniforms: &DataMatrix) -> Result<DataMatrix> {
        let total = uniforms.n();
        if total < self.n || uniforms.d() != self.d {
            return Err(Error::InvalidArgument("innovation sample has the wrong shape".into()));
        }
        let normal = Normal::standard();
        let d = self.d;
        let eps: Vec<f64> = uniforms.values().iter().map(|&p| normal.inverse_cdf(p)).collect();
        let mut x = vec![0.0; total * d];
        for j in 0..d {
            let g = self.garch_for(j);
            let mut sigma2 = g.stationary_variance();
            for i in 0..total {
                let e = eps[i * d + j];
                let v = if i == 0 {
                    match self.kind {
                        ModelKind::Garch => sigma2.sqrt() * e,
                        _ => e,
                    }
                } else {
                    let prev = x[(i - 1) * d + j];
                    match self.kind {
                        ModelKind::Iid => e,
                        ModelKind::Ar1 => 0.5 * prev + e,
                        ModelKind::Nar => 0.6 * prev.sin() + e,
                        ModelKind::Expar => (0.8 - 1.1 * (-50.0 * prev * prev).exp()) * prev + 0.1 * e,
                        ModelKind::Garch => {
                            let e_prev = eps[(i - 1) * d + j];
                            sigma2 = g.omega + g.beta * sigma2 + g.alpha * e_prev * e_prev;
                            sigma2.sqrt() * e
                        }
                    }
                };
                x[i * d + j] = v;
            }
        }
        let start = total - self.n;
        DataMatrix::new(self.n, d, x[start * d..].to_vec())
    }

    /// Marginal cdf when known in closed form (i.i.d. and AR1).
    pub fn marginal_cdf(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let sd = match self.kind {
            ModelKind::Iid => 1.0,
            ModelKind::Ar1 => (1.0f64 / (1.0 - 0.25)).sqrt(),
            _ => return None,
        };
        let normal = Normal::new(0.0, sd).expect("positive sd");
        Some(Box::new(move |x| normal.cdf(x)))
    }

    /// Probability-integral transform of a simulated sample with the known
    /// margins.
    pub fn to_uniforms(&self, data: &DataMatrix) -> Option<DataMatrix> {
        let f = self.marginal_cdf()?;
        let values = data.values().iter().map(|&x| f(x)).collect();
        DataMatrix::new(data.n(), data.d(), values).ok()
    }
}

/// Independent samples of length `n/2` (rounded) from two copulas, stacked;
/// an abrupt copula change at the midpoint.
pub fn simulate_with_break(
    kind: ModelKind,
    before: CopulaSpec,
    after: CopulaSpec,
    n: usize,
    seed: u64,
) -> Result<DataMatrix> {
    let k = n / 2;
    let a = DataModel::new(kind, before, k).simulate(rng::derive_seed(seed, rng::domain::DATA, 0))?;
    let b = DataModel::new(kind, after, n - k).simulate(rng::derive_seed(seed, rng::domain::DATA, 1))?;
    a.concat(&b)
}
