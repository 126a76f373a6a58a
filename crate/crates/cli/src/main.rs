use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quantlab::spectral::Backend;

use quantlab_cli::config::{self, Overrides};
use quantlab_cli::output::CommandOutput;
use quantlab_cli::{context_from, report, verdict_code, CliError, CliResult};

#[derive(Parser)]
#[command(name = "quantlab", version, about = "Numerical experiments on Berezin-Toeplitz quantization of surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides run.out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel (model, k) jobs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run seed; overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Spectral backend for sphere models.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Fd,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Command {
    /// Band dimensions, the spectral gap, determinism.
    Spectrum,
    /// Pullback rates, holomorphy, density, kernel decay, injectivity, oracle.
    Embed,
    /// Wick symbols, tangential angle, variance law.
    Dynamics,
    /// Random hyperplane sections.
    Hyperplane,
    /// Consolidate the summaries of a run directory.
    Report,
}

fn print_output(o: &CommandOutput) {
    println!("{} (seed {})", o.command, o.seed);
    for c in &o.criteria {
        println!("  [{}] criterion {:>2} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.model, c.summary);
    }
    for a in &o.audit {
        println!("  [AUDIT] {} {}: {}", a.name, a.model, a.summary);
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    let overrides = Overrides {
        out: cli.out.clone(),
        workers: cli.workers,
        seed: cli.seed,
        backend: cli.backend.map(|b| match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Fd => Backend::Fd,
        }),
    };
    if cli.command == Command::Report {
        let root = match (&cli.out, &cli.config) {
            (Some(o), _) => o.clone(),
            (None, Some(c)) => config::load(c)?.run.out,
            (None, None) => return Err(CliError::Usage("report needs --out or --config".into())),
        };
        let r = report::cmd_report(&root)?;
        println!("report (seed {})", r.seed);
        for c in &r.criteria {
            let status = if c.missing { "MISSING" } else if c.pass { "PASS" } else { "FAIL" };
            println!("  [{status}] criterion {:>2} {}", c.id, c.title);
        }
        return Ok(verdict_code(r.all_pass));
    }
    let path = cli.config.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let ctx = context_from(&path, &overrides)?;
    let out = match cli.command {
        Command::Spectrum => quantlab_cli::spectrum::cmd_spectrum(&ctx)?,
        Command::Embed => quantlab_cli::embed::cmd_embed(&ctx)?,
        Command::Dynamics => quantlab_cli::dynamics::cmd_dynamics(&ctx)?,
        Command::Hyperplane => quantlab_cli::hyperplane::cmd_hyperplane(&ctx)?,
        Command::Report => unreachable!(),
    };
    print_output(&out);
    Ok(verdict_code(out.all_pass()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("quantlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
