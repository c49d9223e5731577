//! Command-line front end: scenario files in, reports and plots out.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 gamma infeasible,
//! 3 not stabilizable or detectable, 4 non-finite state, 5 a verification
//! check (or a sweep sub-run) failed.

mod config;
mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{
    AutoKeyword, ControllerKind, DisturbanceSection, EnsembleSection, GammaSetting, GridSection, InitialSection,
    InitialShape, ModelSection, ScenarioConfig, SimSection, VerifySection,
};
pub use plot::{verdict_strip, LinePlot, Scale, Series};
pub use run::{
    exit_code, simulate_artifacts, sweep_artifacts, synth_artifacts, verify_artifacts, Artifact, Check, GainSection,
    Scenario, SweepAxis, SweepRow, SynthReport, VerifyReport,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "stresscontrol", version, about = "Robust feedback design for a reaction-diffusion stress field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Omit wall-clock timestamps so outputs are byte-identical across runs.
    #[arg(long)]
    pub reproducible: bool,
    /// Overrides `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati equation and write `riccati.json`.
    Synth(CommonArgs),
    /// Simulate the configured loop and write `trajectory.csv`.
    Simulate(CommonArgs),
    /// Run the enabled checks and write `verify.json`.
    Verify(CommonArgs),
    /// Repeat synthesis or simulation over one parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// gamma | amplitude | grid
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::Sweep { .. } => "sweep",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth(c) | Command::Simulate(c) | Command::Verify(c) => c,
            Command::Sweep { common, .. } => common,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    scenario_hash: String,
    toolkit_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    started_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finished_unix: Option<u64>,
    outputs: Vec<String>,
    pass: bool,
    exit_code: i32,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_artifacts(dir: &Path, files: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

struct Outcome {
    files: Vec<Artifact>,
    exit: i32,
    error: Option<Error>,
}

impl Outcome {
    fn failed(err: Error) -> Self {
        Self {
            files: Vec::new(),
            exit: exit_code(&err),
            error: Some(err),
        }
    }
}

fn execute(command: &Command, config: &ScenarioConfig, timestamp: Option<u64>) -> Outcome {
    let scenario = || Scenario::new(config.clone());
    match command {
        Command::Synth(_) => match scenario().and_then(|s| synth_artifacts(&s)) {
            Ok((_, files)) => Outcome {
                files,
                exit: EXIT_OK,
                error: None,
            },
            Err(e) => Outcome::failed(e),
        },
        Command::Simulate(_) => match scenario().and_then(|s| simulate_artifacts(&s, timestamp)) {
            Ok((_, files)) => Outcome {
                files,
                exit: EXIT_OK,
                error: None,
            },
            Err(e) => Outcome::failed(e),
        },
        Command::Verify(_) => {
            let s = match scenario() {
                Ok(s) => s,
                Err(e) => return Outcome::failed(e),
            };
            let (report, files) = verify_artifacts(&s, timestamp);
            Outcome {
                files,
                exit: if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED },
                error: None,
            }
        }
        Command::Sweep { axis, values, .. } => {
            let outcome = axis
                .parse::<SweepAxis>()
                .and_then(|axis| sweep_artifacts(config, axis, values, timestamp));
            match outcome {
                Ok((rows, files)) => Outcome {
                    files,
                    exit: if rows.iter().all(|r| r.exit_code == 0) {
                        EXIT_OK
                    } else {
                        EXIT_CHECK_FAILED
                    },
                    error: None,
                },
                Err(e) => Outcome::failed(e),
            }
        }
    }
}

/// Runs one command end to end and returns the process exit code. Errors
/// are printed to stderr as `error[Kind]: message`.
pub fn run(cli: Cli) -> i32 {
    let command = &cli.command;
    let common = command.common();
    let started = (!common.reproducible).then(now);
    let mut config = match ScenarioConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = common.seed {
        config.sim.seed = seed;
    }
    let outcome = execute(command, &config, started);
    if let Some(e) = &outcome.error {
        eprintln!("error[{}]: {e}", e.kind());
    }
    let manifest = RunManifest {
        command: command.name(),
        scenario_hash: config.scenario_hash(),
        toolkit_version: env!("CARGO_PKG_VERSION"),
        started_unix: started,
        finished_unix: (!common.reproducible).then(now),
        outputs: outcome.files.iter().map(|f| f.name.clone()).collect(),
        pass: outcome.exit == EXIT_OK,
        exit_code: outcome.exit,
    };
    let mut files = outcome.files;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    files.push(Artifact {
        name: "manifest.json".into(),
        contents: text,
    });
    if let Err(e) = write_artifacts(&common.out, &files) {
        eprintln!("error[{}]: {e}", e.kind());
        return EXIT_USAGE;
    }
    outcome.exit
}

fn common(config_path: &Path, out_dir: &Path) -> CommonArgs {
    CommonArgs {
        config: config_path.to_path_buf(),
        out: out_dir.to_path_buf(),
        reproducible: false,
        seed: None,
    }
}

/// `stresscontrol synth`: writes `riccati.json`, `P.csv`, `K.csv`.
pub fn cmd_synth(config_path: &Path, out_dir: &Path) -> i32 {
    run(Cli {
        command: Command::Synth(common(config_path, out_dir)),
    })
}

/// `stresscontrol simulate`: writes `trajectory.csv`, `trajectory.svg` and
/// optionally `state_dump.csv`.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> i32 {
    run(Cli {
        command: Command::Simulate(common(config_path, out_dir)),
    })
}

/// `stresscontrol verify`: writes `verify.json` and plots.
pub fn cmd_verify(config_path: &Path, out_dir: &Path) -> i32 {
    run(Cli {
        command: Command::Verify(common(config_path, out_dir)),
    })
}

/// `stresscontrol sweep`: writes `sweep.csv` and `sweep.svg`.
pub fn cmd_sweep(config_path: &Path, out_dir: &Path, axis: &str, values: &[f64]) -> i32 {
    run(Cli {
        command: Command::Sweep {
            common: common(config_path, out_dir),
            axis: axis.to_string(),
            values: values.to_vec(),
        },
    })
}

/// Parses `args` (including the program name) and runs.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
