//! Batch driver: reads a run config, dispatches one task and writes a
//! versioned JSON report.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::Task;

pub const SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<carnot_hconv::Error> for CliError {
    fn from(e: carnot_hconv::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hconv-lab", version, about = "Monotone operators and H-convergence experiments on Carnot groups")]
struct Args {
    /// solve, check-class, verify-estimates, hconv, divcurl or effective;
    /// defaults to `task` from the config.
    task: Option<String>,
    #[arg(long)]
    config: PathBuf,
    /// Report path (default `report.json`, or `output.report`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override, repeatable; the last one wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV dump of the nodal solution (solve only).
    #[arg(long, value_name = "PATH")]
    dump_field: Option<PathBuf>,
    /// Probe vectors for `effective`, e.g. "1,0;0,1;1,1".
    #[arg(long)]
    probes: Option<String>,
}

fn run(args: Args) -> Result<u8, CliError> {
    let started = Instant::now();
    let mut overrides = args.set.clone();
    if let Some(t) = &args.task {
        overrides.push(format!("task=\"{}\"", Task::parse(t)?.name()));
    }
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(p) = &args.probes {
        overrides.push(format!("effective.probes=\"{p}\""));
    }
    if let Some(d) = &args.dump_field {
        overrides.push(format!("output.dump_field=\"{}\"", d.display()));
    }
    let mut cfg = config::load(&args.config, &overrides)?;
    cfg.validate()?;
    let task = cfg.task()?;
    let dump = cfg.output.dump_field.clone();
    if dump.is_some() && task != Task::Solve {
        return Err(CliError::Config("--dump-field is only supported by the solve task".into()));
    }
    let report_path =
        args.out.clone().or_else(|| cfg.output.report.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("report.json"));
    cfg.output.report = Some(report_path.display().to_string());
    log::info!("running {} with {}", task.name(), args.config.display());

    let out = tasks::run(&cfg, dump.is_some(), None)?;
    let report = json!({
        "schema": SCHEMA,
        "version": concat!("carnot-hconv ", env!("CARGO_PKG_VERSION")),
        "task": task.name(),
        "status": if out.numerical_failure { "numerical_failure" } else { "ok" },
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "result": out.result,
        "timing": { "wall_seconds": started.elapsed().as_secs_f64() },
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(&report_path, text)?;
    if let (Some(path), Some(csv)) = (&cfg.output.csv, &out.csv) {
        std::fs::write(path, csv)?;
    }
    if let (Some(path), Some(field)) = (&dump, &out.field) {
        std::fs::write(path, field)?;
    }
    println!("{}", out.summary);
    Ok(if out.numerical_failure { 2 } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
