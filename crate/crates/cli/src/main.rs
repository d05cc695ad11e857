use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyturb::experiments::{emit_report, run, ExperimentConfig, ExperimentKind};

/// FENE dumbbells in synthetic turbulence: convergence experiments.
#[derive(Parser)]
#[command(name = "polyturb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrector matrix convergence in the shell index.
    Corrector(Common),
    /// Stationary elongation histogram against the reference marginal.
    Stationary(Common),
    /// Singular-limit sweep of the limit Fokker-Planck equation.
    SingularLimit(Common),
    /// Single flow realization against the limit equation.
    Pathwise(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Refuse to run outside the validated parameter regime.
    #[arg(long)]
    strict: bool,
}

fn resolve(kind: ExperimentKind, args: &Common) -> polyturb::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.strict |= args.strict;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    cfg.out_dir = Some(out.clone());
    Ok((cfg, out))
}

fn execute(cli: &Cli) -> u8 {
    let (kind, args) = match &cli.command {
        Command::Corrector(a) => (ExperimentKind::Corrector, a),
        Command::Stationary(a) => (ExperimentKind::Stationary, a),
        Command::SingularLimit(a) => (ExperimentKind::SingularLimit, a),
        Command::Pathwise(a) => (ExperimentKind::Pathwise, a),
    };
    let result = resolve(kind, args).and_then(|(cfg, out)| {
        let report = run(&cfg)?;
        emit_report(&report, &out, cfg.format)?;
        Ok((report, out))
    });
    match result {
        Ok((report, out)) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("results written to {}", out.display());
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
