use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lambda_ob_cli::commands::{self, Outcome};
use lambda_ob_cli::{load_config, CliError, Format, RunConfig};

/// Optical bistability of Lambda atoms in a ring cavity with two feedback loops.
#[derive(Parser, Debug)]
#[command(name = "lambda-ob", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for maps, 0 for one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stationary density matrix, susceptibilities and absorption factors.
    Steady {
        #[arg(long, allow_hyphen_values = true)]
        omega1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        omega2: Option<f64>,
    },
    /// All operating points at one input.
    Point {
        #[arg(long, allow_hyphen_values = true)]
        i1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        i2: Option<f64>,
    },
    /// Region map over the input grid with its boundary chains.
    Map,
    /// Forward and backward passes along the configured trajectory.
    Sweep,
    /// Exact against two-level closed forms.
    Approx,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format {s:?}, expected csv or json")),
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.common.out {
        cfg.output_dir = o;
    }
    if let Some(t) = cli.common.threads {
        cfg.threads = t;
    }
    if let Some(f) = cli.common.format {
        cfg.format = f;
    }
    match &cli.command {
        Command::Steady { omega1, omega2 } => {
            cfg.steady.omega1 = omega1.unwrap_or(cfg.steady.omega1);
            cfg.steady.omega2 = omega2.unwrap_or(cfg.steady.omega2);
        }
        Command::Point { i1, i2 } => {
            cfg.point.i1 = i1.unwrap_or(cfg.point.i1);
            cfg.point.i2 = i2.unwrap_or(cfg.point.i2);
        }
        _ => {}
    }
    cfg.validate()?;
    match cli.command {
        Command::Steady { .. } => commands::cmd_steady(&cfg),
        Command::Point { .. } => commands::cmd_point(&cfg, cfg.point.i1, cfg.point.i2),
        Command::Map => commands::cmd_map(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Approx => commands::cmd_approx(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
