//! Command-line front end for the RVT and non-ergodic engine.
//!
//! Every run writes its CSV outputs and a `manifest.json` recording input
//! digests, the effective configuration, the seed and the outputs' digests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nergrvt_core::nonergodic::FACTOR_JITTER;
use nergrvt_core::residuals::FIXED_POINT_TOL;
use nergrvt_core::CorrelationModel;

use crate::commands::NergSource;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, EXIT_VALIDATION};
use crate::manifest::{digest_file, sha256_hex, FileDigest, RunManifest, Tolerances, MANIFEST_NAME};

#[derive(Debug, Parser)]
#[command(
    name = "nergrvt",
    version,
    about = "Random-vibration PSA with non-ergodic source, path and site effects"
)]
pub struct Cli {
    /// JSON run configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for stochastic commands; drawn and recorded when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PSA spectrum of one EAS.
    Psa {
        #[arg(long)]
        eas: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// EAS extended to the configured band.
    Extrapolate {
        #[arg(long)]
        eas: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Non-ergodic PSA factor from a pair of spectra or a sampled field.
    Fnerg {
        #[arg(long)]
        erg: PathBuf,
        #[arg(long, conflicts_with = "field", required_unless_present = "field")]
        nerg: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        /// Correlation descriptor as inline JSON; overrides the config.
        #[arg(long, requires = "field")]
        correlation: Option<String>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Realizations of a non-ergodic EAS adjustment field.
    Sample {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        correlation: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Between-event and within-event partition of residuals.
    Decompose {
        #[arg(long)]
        residuals: PathBuf,
        /// Single period; all periods in the table when absent.
        #[arg(long)]
        period: Option<f64>,
    },
    /// Logic-tree hazard at one period.
    Hazard {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        branches: PathBuf,
        #[arg(long)]
        fnerg: Option<PathBuf>,
        #[arg(long)]
        aleatory: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Psa { .. } => "psa",
            Command::Extrapolate { .. } => "extrapolate",
            Command::Fnerg { .. } => "fnerg",
            Command::Sample { .. } => "sample",
            Command::Decompose { .. } => "decompose",
            Command::Hazard { .. } => "hazard",
        }
    }

    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = Vec::new();
        match self {
            Command::Psa { eas, scenario } | Command::Extrapolate { eas, scenario } => {
                v.push(("eas", eas));
                v.push(("scenario", scenario));
            }
            Command::Fnerg {
                erg,
                nerg,
                field,
                scenario,
                ..
            } => {
                v.push(("erg", erg));
                if let Some(p) = nerg {
                    v.push(("nerg", p));
                }
                if let Some(p) = field {
                    v.push(("field", p));
                }
                v.push(("scenario", scenario));
            }
            Command::Sample { field, .. } => v.push(("field", field)),
            Command::Decompose { residuals, .. } => v.push(("residuals", residuals)),
            Command::Hazard {
                scenarios,
                branches,
                fnerg,
                aleatory,
            } => {
                v.push(("scenarios", scenarios));
                v.push(("branches", branches));
                if let Some(p) = fnerg {
                    v.push(("fnerg", p));
                }
                if let Some(p) = aleatory {
                    v.push(("aleatory", p));
                }
            }
        }
        v
    }

    fn is_stochastic(&self) -> bool {
        matches!(self, Command::Fnerg { field: Some(_), .. } | Command::Sample { .. })
    }
}

/// Paths written by a successful run, manifest last.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn parse_correlation(arg: Option<&str>, fallback: &CorrelationModel) -> CliResult<CorrelationModel> {
    let c = match arg {
        Some(s) => {
            serde_json::from_str::<CorrelationModel>(s).map_err(|e| CliError::Usage(format!("--correlation: {e}")))?
        }
        None => *fallback,
    };
    c.validate()
        .map_err(|e| CliError::Usage(format!("--correlation: {e}")))?;
    Ok(c)
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> CliResult<RunReport> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let (seed, seed_source) = match (cli.command.is_stochastic(), cli.seed) {
        (false, _) => (None, None),
        (true, Some(s)) => (Some(s), Some("flag")),
        (true, None) => (Some(rand::random::<u64>()), Some("generated")),
    };
    let seed_value = seed.unwrap_or(0);

    let mut inputs: Vec<FileDigest> = Vec::new();
    for (role, path) in cli.command.inputs() {
        inputs.push(digest_file(role, path)?);
    }
    if let Some(p) = &cli.config {
        inputs.push(digest_file("config", p)?);
    }

    let csvs = match &cli.command {
        Command::Psa { eas, scenario } => commands::psa(eas, scenario, &cfg)?,
        Command::Extrapolate { eas, scenario } => commands::extrapolate(eas, scenario, &cfg)?,
        Command::Fnerg {
            erg,
            nerg,
            field,
            correlation,
            scenario,
            samples,
        } => {
            let source = match (nerg, field) {
                (Some(p), _) => NergSource::Spectrum(p),
                (None, Some(p)) => NergSource::Field {
                    path: p,
                    correlation: parse_correlation(correlation.as_deref(), &cfg.correlation)?,
                    samples: *samples,
                    seed: seed_value,
                },
                (None, None) => return Err(CliError::Usage("one of --nerg or --field is required".into())),
            };
            commands::fnerg(erg, source, scenario, &cfg)?
        }
        Command::Sample {
            field,
            correlation,
            samples,
        } => commands::sample(
            field,
            parse_correlation(correlation.as_deref(), &cfg.correlation)?,
            *samples,
            seed_value,
        )?,
        Command::Decompose { residuals, period } => commands::decompose_cmd(residuals, *period, &cfg)?,
        Command::Hazard {
            scenarios,
            branches,
            fnerg,
            aleatory,
        } => commands::hazard(scenarios, branches, fnerg.as_deref(), aleatory.as_deref(), &cfg)?,
    };

    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let mut written = Vec::with_capacity(csvs.len());
    let mut outputs = Vec::with_capacity(csvs.len());
    for csv in &csvs {
        let bytes = csv.to_bytes();
        let path = io::write_file(&cli.out, csv.name, &bytes)?;
        outputs.push(FileDigest {
            role: csv.name.trim_end_matches(".csv").to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        written.push(path);
    }

    let config_json = cfg.canonical_json();
    let manifest = RunManifest {
        command: cli.command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs,
        config_digest: sha256_hex(config_json.as_bytes()),
        config: serde_json::from_str(&config_json).expect("canonical config is JSON"),
        seed,
        seed_source,
        tolerances: Tolerances {
            peak_factor_abs: cfg.pf_tolerance,
            variance_fixed_point: FIXED_POINT_TOL,
            factor_jitter: FACTOR_JITTER,
        },
        outputs,
        timestamp: manifest::timestamp(),
    };
    let mut body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    body.push(b'\n');
    let manifest_path = io::write_file(&cli.out, MANIFEST_NAME, &body)?;
    Ok(RunReport {
        outputs: written,
        manifest: manifest_path,
    })
}

/// Parse `args`, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
