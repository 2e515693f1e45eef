use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use log::info;

use seqcop::bootstrap::changepoint_processes;
use seqcop::datagen::simulate_with_break;
use seqcop::experiments::{
    imse_experiment, oracle_sigma_c, quantile_mse_experiment, reference_quantiles, table1_cell, EllChoice, ImseConfig,
    QuantileMseConfig,
};
use seqcop::inference::StatisticKind;
use seqcop::multipliers::generate;
use seqcop::{
    changepoint_test, BandwidthEstimate, ChangePointConfig, CopulaSpec, DataMatrix, EvalGrid, MultiplierConfig,
};

use crate::config::{covariance_kernel, Command, RunConfig};
use crate::error::{CliError, CliResult};

/// What a command produced: the bytes of its main output plus anything the
/// manifest should record.
pub struct Report {
    pub body: Vec<u8>,
    pub bandwidth: Option<BandwidthEstimate>,
}

impl Report {
    fn table(body: String) -> Self {
        Report {
            body: body.into_bytes(),
            bandwidth: None,
        }
    }
}

struct Tsv(String);

impl Tsv {
    fn new(header: &[&str]) -> Self {
        Tsv(header.join("\t") + "\n")
    }

    fn row(&mut self, cells: &[&dyn Display]) {
        let cells: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
        self.0.push_str(&cells.join("\t"));
        self.0.push('\n');
    }
}

pub const CPD_COLUMNS: [&str; 10] = [
    "statistic_kind",
    "n",
    "statistic",
    "ell",
    "replicates",
    "p_value",
    "method",
    "kernel",
    "estimator",
    "seed",
];
pub const TABLE1_COLUMNS: [&str; 6] = ["theta", "n", "phi", "mean", "sd", "seeds"];
pub const MSE_COLUMNS: [&str; 9] = [
    "scenario", "n", "ell", "mean_ell", "kernel", "p", "target", "bias", "mse",
];
pub const IMSE_COLUMNS: [&str; 5] = ["scenario", "n", "ell", "kernel", "imse"];

pub fn run(command: Command, cfg: &RunConfig) -> CliResult<Report> {
    match command {
        Command::CpdTest => cpd_test(cfg),
        Command::Table1 => table1(cfg),
        Command::QuantileMse => {
            let choice = cfg.ell_choice()?;
            quantile_mse(cfg, vec![choice])
        }
        Command::MseSweep => {
            let mut choices: Vec<EllChoice> = cfg.ells.iter().map(|&l| EllChoice::Fixed(l)).collect();
            choices.push(auto_choice(cfg)?);
            quantile_mse(cfg, choices)
        }
        Command::ImseSweep => imse_sweep(cfg),
        Command::Simulate => simulate(cfg),
    }
}

fn auto_choice(cfg: &RunConfig) -> CliResult<EllChoice> {
    let phi = match cfg.phi()? {
        Some(p) => p,
        None => seqcop::experiments::auto_phi(&cfg.multiplier_method()?)?,
    };
    Ok(EllChoice::Auto(phi))
}

pub fn read_input(path: &Path) -> CliResult<DataMatrix> {
    DataMatrix::from_path(path).map_err(|source| CliError::Input {
        path: path.display().to_string(),
        source,
    })
}

fn cpd_test(cfg: &RunConfig) -> CliResult<Report> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("cpd-test needs an input file".into()))?;
    let data = read_input(path)?;
    let test = ChangePointConfig {
        method: cfg.multiplier_method()?,
        ell: cfg.ell_policy()?,
        replicates: cfg.replicates,
        seed: cfg.seed,
        base_law: cfg.base_law()?,
        estimator: cfg.estimator()?,
        grid_per_axis: cfg.grid,
        statistic: cfg.statistic_or(StatisticKind::ChangePointKs)?,
    };
    if !matches!(
        test.statistic,
        StatisticKind::ChangePointKs | StatisticKind::ChangePointCvm
    ) {
        return Err(CliError::Config(
            "cpd-test needs a change-point statistic (cp-ks or cp-cvm)".into(),
        ));
    }
    let result = changepoint_test(&data, &test)?;
    let meta = &result.meta;
    if let Some(b) = &meta.bandwidth {
        info!(
            "bandwidth: ell_raw {:.3}, L {}, gamma^2 {:.4e}, delta {:.4e}, grid {}",
            b.ell_raw, b.l_used, b.gamma_bar_sq, b.delta_bar, b.grid_size
        );
    }
    let mut out = Tsv::new(&CPD_COLUMNS);
    let kind = match test.statistic {
        StatisticKind::ChangePointCvm => "cp-cvm",
        _ => "cp-ks",
    };
    out.row(&[
        &kind,
        &data.n(),
        &result.statistic,
        &meta.ell,
        &meta.replicates,
        &result.p_value,
        &meta.method,
        &meta.kernel,
        &cfg.estimator,
        &meta.seed,
    ]);

    if let Some(dump) = &cfg.dump_surfaces {
        let batch = generate(&MultiplierConfig {
            method: test.method,
            ell: meta.ell,
            n: data.n(),
            replicates: test.replicates,
            seed: test.seed,
            base_law: test.base_law,
        })?;
        let grid = EvalGrid::lattice(test.grid_per_axis, data.d(), true)?;
        let surfaces = changepoint_processes(&data, &batch, test.estimator, &grid)?;
        write_surfaces(dump, &surfaces, &grid)?;
        info!("wrote change-point surfaces to {}", dump.display());
    }
    Ok(Report {
        body: out.0.into_bytes(),
        bandwidth: meta.bandwidth,
    })
}

fn write_surfaces(path: &Path, s: &seqcop::bootstrap::ChangePointSurfaces, grid: &EvalGrid) -> CliResult<()> {
    let points: Vec<String> = grid
        .points()
        .map(|u| u.iter().map(f64::to_string).collect::<Vec<_>>().join("\t"))
        .collect();
    let coords: Vec<String> = (1..=grid.d()).map(|j| format!("u{j}")).collect();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "replicate\tk\t{}\tvalue", coords.join("\t"))?;
    let block = s.ks.len() * points.len();
    let labels = std::iter::once("observed".to_string()).chain((1..).map(|m: usize| m.to_string()));
    let surfaces = std::iter::once(&s.observed[..]).chain(s.replicates.chunks_exact(block));
    for (label, surface) in labels.zip(surfaces) {
        for (row, &k) in surface.chunks_exact(points.len()).zip(&s.ks) {
            for (u, v) in points.iter().zip(row) {
                writeln!(w, "{label}\t{k}\t{u}\t{v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn table1(cfg: &RunConfig) -> CliResult<Report> {
    let psi = cfg.psi()?;
    let mut out = Tsv::new(&TABLE1_COLUMNS);
    for &theta in &cfg.thetas {
        for &n in &cfg.sizes {
            for name in &cfg.phis {
                let phi = covariance_kernel(name)?;
                let row = table1_cell(theta, n, &phi, cfg.table_seeds, cfg.g, psi, cfg.seed)?;
                info!(
                    "table1 theta {theta} n {n} phi {name}: mean {:.3} sd {:.3}",
                    row.mean, row.sd
                );
                out.row(&[&row.theta, &row.n, &row.phi, &row.mean, &row.sd, &row.seeds]);
            }
        }
    }
    Ok(Report::table(out.0))
}

fn quantile_mse(cfg: &RunConfig, choices: Vec<EllChoice>) -> CliResult<Report> {
    let mut q = QuantileMseConfig::new(cfg.data_model()?, cfg.multiplier_method()?);
    q.choices = choices;
    q.replicates = cfg.replicates;
    q.datasets = cfg.datasets;
    q.orders = cfg.orders.clone();
    q.kind = cfg.statistic_or(StatisticKind::Cvm)?;
    q.estimator = cfg.estimator()?;
    q.grid_per_axis = cfg.grid;
    q.bandwidth_grid = cfg.g;
    q.psi = cfg.psi()?;
    q.seed = cfg.seed;
    q.reference_length = cfg.reference_length;
    q.reference_reps = cfg.reference_reps;
    q.reference_n = cfg.reference_n;
    if !matches!(q.kind, StatisticKind::Cvm | StatisticKind::Ks) {
        return Err(CliError::Config("quantile sweeps use the cvm or ks statistic".into()));
    }
    let grid = EvalGrid::lattice(q.grid_per_axis, q.model.d, true)?;
    let (_, targets) = reference_quantiles(&q, &grid)?;
    info!("reference quantiles {targets:?}");
    let rows = quantile_mse_experiment(&q, &targets)?;
    let mut out = Tsv::new(&MSE_COLUMNS);
    for r in rows {
        out.row(&[
            &r.scenario,
            &r.n,
            &r.ell,
            &r.mean_ell,
            &r.kernel,
            &r.p,
            &r.target,
            &r.bias,
            &r.mse,
        ]);
    }
    Ok(Report::table(out.0))
}

fn imse_sweep(cfg: &RunConfig) -> CliResult<Report> {
    let phi = match cfg.phi()? {
        Some(p) => p,
        None => covariance_kernel(&cfg.kernel)?,
    };
    let model = cfg.data_model()?;
    let grid = EvalGrid::open_lattice_with_size(cfg.g, model.d)?;
    let imse = ImseConfig {
        model,
        phi,
        ells: cfg.ells.clone(),
        replicates: cfg.replicates,
        datasets: cfg.datasets,
        grid_size: cfg.g,
        oracle_reps: cfg.oracle_reps,
        seed: cfg.seed,
    };
    let sigma = oracle_sigma_c(&imse, &grid)?;
    let mut out = Tsv::new(&IMSE_COLUMNS);
    for r in imse_experiment(&imse, &sigma)? {
        out.row(&[&r.scenario, &r.n, &r.ell, &r.kernel, &r.imse]);
    }
    Ok(Report::table(out.0))
}

fn simulate(cfg: &RunConfig) -> CliResult<Report> {
    let model = cfg.data_model()?;
    let data = match &cfg.break_to {
        None => model.simulate(cfg.seed)?,
        Some(after) => {
            let after: CopulaSpec = after.parse()?;
            simulate_with_break(model.kind, model.copula, after.validate()?, model.n, cfg.seed)?
        }
    };
    let header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    let mut body = Vec::new();
    data.write_delimited(&mut body, Some(&header))?;
    Ok(Report { body, bandwidth: None })
}
