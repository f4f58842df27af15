//! `whitenoise`: batch front end. Exit status 0 when every check passes,
//! 1 when a check fails or a computation breaks down, 2 on a bad config.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use whitenoise::Error;

use config::{Command, Overrides, RunConfig, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "whitenoise",
    version,
    about = "Hermite-basis Gaussian process toolkit: covariance, Wick-Itô and local-time checks"
)]
#[command(
    after_help = "Every run writes report.json (schema_version, resolved config, pass flag, results) plus the CSV tables listed under each subcommand's --help into --out."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    steps: Option<usize>,
    #[arg(long = "hermite-order", global = true, value_name = "K")]
    hermite_order: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg: RunConfig = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => RunConfig::default(),
    };
    let o = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        steps: cli.steps,
        order: cli.hermite_order,
        out: cli.out.clone(),
    };
    cfg.apply(cli.command, &o)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Errors that trace back to the configuration rather than to a computation.
fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter { .. } | Error::OutOfDomain { .. } | Error::Grid(_) | Error::NonPositiveVarianceMeasure { .. }
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let model = match cfg.model.build() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run::execute(cli.command, &cfg, &model) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", if is_config_error(&e) { "config error" } else { "error" });
            return ExitCode::from(if is_config_error(&e) { 2 } else { 1 });
        }
    };
    let dir = &cfg.output.dir;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cli.command.name(),
        "pass": outcome.pass,
        "config": cfg,
        "tables": outcome.tables.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
        "result": outcome.result,
    });
    let written = fs::create_dir_all(dir).and_then(|_| {
        for (name, bytes) in &outcome.tables {
            fs::write(dir.join(name), bytes)?;
        }
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(dir.join("report.json"), text)
    });
    if let Err(e) = written {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    eprintln!(
        "{} {} -> {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        cli.command.name(),
        dir.join("report.json").display()
    );
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
