use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use wplap::config::{Experiment, RunConfig};
use wplap::experiment::{self, MANIFEST};
use wplap::Error;

/// Weighted p-Laplacian lab: simulations, bounds and pullback attractors.
#[derive(Parser)]
#[command(name = "wplap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(value_parser = parse_experiment)]
        experiment: Experiment,
        config: PathBuf,
        /// Output directory (beats the config's `out_dir`).
        #[arg(long, env = "WPLAP_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Re-run a manifest and compare every output byte for byte.
    Replay {
        manifest: PathBuf,
        #[arg(long, env = "WPLAP_OUT_DIR")]
        out: Option<PathBuf>,
    },
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_PARSE: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_REPLAY_MISMATCH: u8 = 6;

fn classify(err: &Error) -> (&'static str, u8) {
    match err {
        Error::Parse(_) => ("parse-error", EXIT_PARSE),
        Error::InnerNonConvergence { .. } => ("solver-nonconvergence", EXIT_NONCONVERGENCE),
        Error::Io(_) => ("io-error", EXIT_IO),
        _ => ("invariant-violation", EXIT_INVARIANT),
    }
}

fn fail(err: Error) -> ExitCode {
    let (kind, code) = classify(&err);
    let field = match &err {
        Error::InvalidParameter { name, .. } => Some(name.clone()),
        _ => None,
    };
    let report = json!({
        "status": "error",
        "kind": kind,
        "exit_code": code,
        "field": field,
        "message": err.to_string(),
    });
    eprintln!("{report}");
    ExitCode::from(code)
}

fn run(
    experiment: Experiment,
    config: &Path,
    out: Option<PathBuf>,
) -> Result<serde_json::Value, Error> {
    let cfg = RunConfig::load(config)?;
    let base_dir = config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let mut notes = Vec::new();
    if let Some(declared) = cfg.experiment.filter(|e| *e != experiment) {
        notes.push(format!(
            "config declares experiment `{}`, running `{}`",
            declared.name(),
            experiment.name()
        ));
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.as_ref().map(|d| base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    let res = experiment::run(&cfg, experiment, &out_dir, &base_dir)?;
    Ok(json!({
        "status": "ok",
        "experiment": experiment.name(),
        "out_dir": res.dir,
        "outputs": res.manifest.outputs,
        "warnings": res.manifest.warnings,
        "notes": notes,
    }))
}

fn replay(manifest: &Path, out: Option<PathBuf>) -> Result<(serde_json::Value, bool), Error> {
    let out_dir = out.unwrap_or_else(|| {
        manifest
            .parent()
            .unwrap_or(Path::new("."))
            .with_extension("replay")
    });
    let report = experiment::replay(manifest, &out_dir)?;
    let ok = report.is_identical();
    Ok((
        json!({
            "status": if ok { "ok" } else { "mismatch" },
            "out_dir": out_dir,
            "identical": report.identical,
            "differing": report.differing,
        }),
        ok,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            experiment,
            config,
            out,
        } => match run(experiment, &config, out) {
            Ok(v) => {
                println!("{v}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Replay { manifest, out } => {
            let manifest = if manifest.is_dir() {
                manifest.join(MANIFEST)
            } else {
                manifest
            };
            match replay(&manifest, out) {
                Ok((v, ok)) => {
                    println!("{v}");
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_REPLAY_MISMATCH)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
