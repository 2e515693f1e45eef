mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use config::{Command, Overrides, RunConfig};
use error::{CliError, CliResult};
use seqcop::BandwidthEstimate;

/// Dependent multiplier bootstrap for sequential empirical copula processes.
#[derive(Debug, Parser)]
#[command(name = "seqcop", version)]
struct Cli {
    #[command(subcommand)]
    action: Action,

    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,

    /// Print the effective config and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Action {
    /// Test for a change in the copula of a delimited data file.
    CpdTest { input: Option<PathBuf> },
    /// Mean and sd of the estimated bandwidth over simulated AR1 samples.
    Table1,
    /// Bias and MSE of bootstrap quantiles for one bandwidth choice.
    QuantileMse,
    /// Bias and MSE of bootstrap quantiles across `ells` plus `auto`.
    MseSweep,
    /// IMSE of the multiplier covariance across `ells`.
    ImseSweep,
    /// Simulate one data set in the delimited format `cpd-test` reads.
    Simulate,
    /// Run the command named in the config file.
    Run,
    /// Re-run a recorded manifest.
    Replay {
        #[arg(value_name = "MANIFEST")]
        recorded: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    command: Command,
    version: String,
    parallel: bool,
    seed: u64,
    threads: usize,
    config: RunConfig,
    config_sha256: String,
    output: Option<PathBuf>,
    output_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<BandwidthEstimate>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve(cli: Cli) -> CliResult<(RunConfig, bool)> {
    let mut cfg = match (&cli.action, &cli.config) {
        (Action::Replay { recorded: manifest }, _) => {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
            let m: Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
            let mut cfg = m.config;
            cfg.command = Some(m.command);
            // never overwrite the manifest being replayed
            cfg.manifest = None;
            cfg
        }
        (_, Some(path)) => RunConfig::load(path)?,
        (_, None) => RunConfig::default(),
    };
    let named = match cli.action {
        Action::CpdTest { input } => {
            if input.is_some() {
                cfg.input = input;
            }
            Some(Command::CpdTest)
        }
        Action::Table1 => Some(Command::Table1),
        Action::QuantileMse => Some(Command::QuantileMse),
        Action::MseSweep => Some(Command::MseSweep),
        Action::ImseSweep => Some(Command::ImseSweep),
        Action::Simulate => Some(Command::Simulate),
        Action::Run | Action::Replay { .. } => None,
    };
    if named.is_some() {
        cfg.command = named;
    }
    cli.overrides.apply(&mut cfg);
    Ok((cfg, cli.print_config))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(CliError::from)
}

fn execute(cfg: RunConfig) -> CliResult<()> {
    let command = cfg
        .command
        .ok_or_else(|| CliError::Config("no command given (set 'command' in the config file)".into()))?;
    cfg.validate()?;
    let report = seqcop::par::with_threads(cfg.threads, || commands::run(command, &cfg))?;

    let manifest = Manifest {
        command,
        version: seqcop::VERSION.to_string(),
        parallel: seqcop::par::is_parallel(),
        seed: cfg.seed,
        threads: cfg.threads,
        config_sha256: sha256_hex(cfg.to_toml()?.as_bytes()),
        output: cfg.output.clone(),
        output_sha256: sha256_hex(&report.body),
        bandwidth: report.bandwidth,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";

    match &manifest.output {
        Some(path) => write_file(path, &report.body)?,
        None => std::io::stdout().lock().write_all(&report.body)?,
    }
    let manifest_path = manifest.config.manifest.clone().or_else(|| {
        manifest.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    match manifest_path {
        Some(path) => write_file(&path, json.as_bytes())?,
        None => std::io::stderr().lock().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = resolve(cli).and_then(|(cfg, print)| {
        if print {
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        } else {
            execute(cfg)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
