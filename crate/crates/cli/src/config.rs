use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use seqcop::experiments::{default_ell_sweep, EllChoice};
use seqcop::inference::{StatisticKind, DEFAULT_ORDERS};
use seqcop::{
    Aggregation, BaseLaw, CopulaSpec, DataModel, EllPolicy, KernelFamily, KernelSpec, ModelKind, MultiplierMethod,
    PartialDerivEstimator,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CpdTest,
    Table1,
    QuantileMse,
    MseSweep,
    ImseSweep,
    Simulate,
}

/// Everything a run depends on. Stored as flat `key = value` TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    /// Worker threads; 0 uses the default pool.
    pub threads: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub dump_surfaces: Option<PathBuf>,

    pub method: String,
    pub kernel: String,
    /// `auto` or a positive integer.
    pub ell: String,
    pub phi: Option<String>,
    pub g: usize,
    pub psi: String,
    pub replicates: usize,
    pub base_law: String,
    pub estimator: String,
    pub grid: usize,
    pub statistic: Option<String>,

    pub model: String,
    pub copula: String,
    /// Copula after the midpoint, for simulated change-point alternatives.
    pub break_to: Option<String>,
    pub n: usize,
    pub datasets: usize,
    pub orders: Vec<f64>,
    pub ells: Vec<usize>,

    pub thetas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub phis: Vec<String>,
    pub table_seeds: usize,

    pub reference_length: usize,
    pub reference_reps: usize,
    pub reference_n: usize,
    pub oracle_reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            threads: 0,
            input: None,
            output: None,
            manifest: None,
            dump_surfaces: None,
            method: "moving-average".into(),
            kernel: "parzen".into(),
            ell: "auto".into(),
            phi: None,
            g: 25,
            psi: "median".into(),
            replicates: 1000,
            base_law: "normal".into(),
            estimator: "rs".into(),
            grid: 20,
            statistic: None,
            model: "ar1".into(),
            copula: "gumbel:1.5".into(),
            break_to: None,
            n: 200,
            datasets: 300,
            orders: DEFAULT_ORDERS.to_vec(),
            ells: default_ell_sweep(),
            thetas: vec![1.5, 3.0],
            sizes: vec![100, 200, 400],
            phis: vec!["parzen".into(), "usum:8".into()],
            table_seeds: 300,
            reference_length: 4_000_000,
            reference_reps: 20_000,
            reference_n: 500,
            oracle_reps: 20_000,
        }
    }
}

fn lib<T>(r: seqcop::Result<T>) -> CliResult<T> {
    r.map_err(CliError::from)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parses every textual field so that bad values fail before any work.
    pub fn validate(&self) -> CliResult<()> {
        self.multiplier_method()?;
        self.ell_policy()?;
        self.base_law()?;
        self.estimator()?;
        self.data_model()?;
        if let Some(b) = &self.break_to {
            lib(b.parse::<CopulaSpec>().and_then(CopulaSpec::validate))?;
        }
        for p in &self.phis {
            covariance_kernel(p)?;
        }
        if let Some(s) = &self.statistic {
            lib(s.parse::<StatisticKind>())?;
        }
        if self.replicates == 0 || self.datasets == 0 || self.table_seeds == 0 {
            return Err(CliError::Config(
                "replicate and data-set counts must be positive".into(),
            ));
        }
        if self.ells.contains(&0) {
            return Err(CliError::Config("bandwidths in 'ells' must be at least 1".into()));
        }
        if self.orders.iter().any(|p| !(0.0..1.0).contains(p) || *p == 0.0) {
            return Err(CliError::Config("quantile orders must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn multiplier_method(&self) -> CliResult<MultiplierMethod> {
        let family: KernelFamily = lib(self.kernel.parse())?;
        match self.method.trim().to_ascii_lowercase().as_str() {
            "moving-average" | "ma" => Ok(MultiplierMethod::MovingAverage(lib(KernelSpec::weight(family))?)),
            "covariance-matrix" | "cov" => Ok(MultiplierMethod::CovarianceMatrix(lib(KernelSpec::covariance(family))?)),
            other => Err(CliError::Config(format!("unknown multiplier method '{other}'"))),
        }
    }

    pub fn phi(&self) -> CliResult<Option<KernelSpec>> {
        self.phi.as_deref().map(covariance_kernel).transpose()
    }

    pub fn psi(&self) -> CliResult<Aggregation> {
        lib(self.psi.parse())
    }

    pub fn ell_policy(&self) -> CliResult<EllPolicy> {
        if self.ell.trim().eq_ignore_ascii_case("auto") {
            return Ok(EllPolicy::Auto {
                phi: self.phi()?,
                g: self.g,
                psi: self.psi()?,
            });
        }
        match self.ell.trim().parse::<usize>() {
            Ok(l) if l > 0 => Ok(EllPolicy::Fixed(l)),
            _ => Err(CliError::Config(format!(
                "ell must be 'auto' or a positive integer, got '{}'",
                self.ell
            ))),
        }
    }

    /// Single bandwidth choice for `quantile-mse`.
    pub fn ell_choice(&self) -> CliResult<EllChoice> {
        match self.ell_policy()? {
            EllPolicy::Fixed(l) => Ok(EllChoice::Fixed(l)),
            EllPolicy::Auto { phi, .. } => Ok(EllChoice::Auto(match phi {
                Some(p) => p,
                None => lib(seqcop::experiments::auto_phi(&self.multiplier_method()?))?,
            })),
        }
    }

    pub fn base_law(&self) -> CliResult<BaseLaw> {
        lib(self.base_law.parse())
    }

    pub fn estimator(&self) -> CliResult<PartialDerivEstimator> {
        lib(self.estimator.parse())
    }

    pub fn statistic_or(&self, default: StatisticKind) -> CliResult<StatisticKind> {
        match &self.statistic {
            Some(s) => lib(s.parse()),
            None => Ok(default),
        }
    }

    pub fn data_model(&self) -> CliResult<DataModel> {
        let kind: ModelKind = lib(self.model.parse())?;
        let copula: CopulaSpec = lib(self.copula.parse())?;
        let model = DataModel::new(kind, copula, self.n);
        lib(model.validate())?;
        Ok(model)
    }
}

pub fn covariance_kernel(name: &str) -> CliResult<KernelSpec> {
    lib(name.parse::<KernelFamily>().and_then(KernelSpec::covariance))
}

/// Command-line overrides, applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Long-format TSV of the observed and replicate change-point processes.
    #[arg(long, global = true)]
    pub dump_surfaces: Option<PathBuf>,

    #[arg(long, visible_alias = "mult-method", global = true)]
    pub method: Option<String>,
    #[arg(long, visible_alias = "mult-kernel", global = true)]
    pub kernel: Option<String>,
    #[arg(long, global = true)]
    pub ell: Option<String>,
    #[arg(long, global = true)]
    pub phi: Option<String>,
    #[arg(long, global = true)]
    pub g: Option<usize>,
    #[arg(long, global = true)]
    pub psi: Option<String>,
    #[arg(long, visible_alias = "M", global = true)]
    pub replicates: Option<usize>,
    #[arg(long, global = true)]
    pub base_law: Option<String>,
    #[arg(long, global = true)]
    pub estimator: Option<String>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub statistic: Option<String>,

    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub copula: Option<String>,
    /// Replaces the copula parameter.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub break_to: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub datasets: Option<usize>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub orders: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub ells: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',', global = true)]
    pub thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub phis: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub table_seeds: Option<usize>,

    #[arg(long, global = true)]
    pub reference_length: Option<usize>,
    #[arg(long, global = true)]
    pub reference_reps: Option<usize>,
    #[arg(long, global = true)]
    pub reference_n: Option<usize>,
    #[arg(long, global = true)]
    pub oracle_reps: Option<usize>,
}

macro_rules! set {
    ($cfg:ident, $ov:ident; $($f:ident),* ; $($o:ident),*) => {
        $(if let Some(v) = $ov.$f { $cfg.$f = v; })*
        $(if let Some(v) = $ov.$o { $cfg.$o = Some(v); })*
    };
}

impl Overrides {
    pub fn apply(self, cfg: &mut RunConfig) {
        let ov = self;
        set!(cfg, ov;
            seed, threads, method, kernel, ell, g, psi, replicates, base_law, estimator, grid,
            model, copula, n, datasets, orders, ells, thetas, sizes, phis, table_seeds,
            reference_length, reference_reps, reference_n, oracle_reps;
            output, manifest, dump_surfaces, phi, statistic, break_to);
        if let Some(theta) = ov.theta {
            let family = cfg.copula.split(':').next().unwrap_or("").trim().to_string();
            cfg.copula = format!("{family}:{theta}");
        }
    }
}
