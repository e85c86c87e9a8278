use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use alphamod_cli::{run, CliError, ExperimentConfig, EXPERIMENTS};
use clap::Parser;

/// Run one experiment from a TOML config and write `report.json` plus `tables/*.csv`.
#[derive(Parser, Debug)]
#[command(name = "alphamod", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "list")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config experiment id.
    #[arg(long)]
    experiment: Option<String>,
    /// Print cross-field diagnostics and exit without running.
    #[arg(long)]
    validate: bool,
    /// List experiment ids.
    #[arg(long)]
    list: bool,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let path = args.config.as_ref().expect("clap enforces --config");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(id) = &args.experiment {
        cfg.experiment = id.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for id in EXPERIMENTS {
            println!("{id}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if args.validate {
        let diags = cfg.validate();
        for d in &diags {
            println!("{d}");
        }
        return if diags.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        };
    }
    let start = Instant::now();
    let out = match run(&cfg).and_then(|o| o.write(&args.out).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for c in &out.report.checks {
        println!(
            "{} {} = {:.6e} {} {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.limit
        );
    }
    eprintln!(
        "{}: {} in {:.2?}",
        cfg.experiment,
        if out.report.pass { "pass" } else { "fail" },
        start.elapsed()
    );
    if out.report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
