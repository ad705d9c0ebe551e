use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tnqc_cli::{commands, CliError, CliResult, Context, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "tnqc", version, about = "Robust pulse optimization for qubit chains with parasitic couplings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads for ensemble evaluation (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Optimization ensemble seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the warm-start ladder and verify every cell.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Verify a saved schedule on a fresh verification ensemble.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        schedule: PathBuf,
    },
    /// Robust against non-robust infidelity over the configured sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resume: bool,
    },
    /// Write amplitude matrices of a saved schedule.
    Heatmap {
        #[arg(long, short)]
        schedule: PathBuf,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients (n <= 5).
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn setup(common: &Common, resume: bool) -> CliResult<(RunConfig, Context)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let opts = RunOptions {
        out: common.out.clone(),
        workers: common.workers,
        resume,
    };
    let ctx = Context::new(&cfg, &opts)?;
    Ok((cfg, ctx))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Optimize { common, resume } => {
            let (cfg, ctx) = setup(&common, resume)?;
            let summary = commands::optimize(&cfg, &ctx)?;
            for c in &summary.cells {
                println!(
                    "n={:<3} ΔJ={:<6} optimization {:.4e}  verification {:.4e} ± {:.1e}{}",
                    c.n,
                    c.delta_j,
                    c.optimization_infidelity,
                    c.verification.mean_infidelity,
                    c.verification.std_error,
                    if c.flagged { "  (flagged: no improvement over seed)" } else { "" }
                );
            }
            println!("summary written to {}", ctx.out.join("summary.toml").display());
        }
        Command::Evaluate { common, schedule } => {
            let (cfg, ctx) = setup(&common, false)?;
            let r = commands::evaluate(&cfg, &ctx, &schedule)?;
            print!("{}", toml::to_string(&r).map_err(|e| CliError::Config(e.to_string()))?);
        }
        Command::Sweep { common, resume } => {
            let (cfg, ctx) = setup(&common, resume)?;
            commands::sweep(&cfg, &ctx)?;
            print!("{}", std::fs::read_to_string(ctx.out.join("sweep.csv")).map_err(|e| CliError::Config(e.to_string()))?);
        }
        Command::Heatmap { schedule, out } => {
            for p in commands::heatmap(&schedule, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Gradcheck { common } => {
            let (cfg, ctx) = setup(&common, false)?;
            let r = commands::gradcheck(&cfg, &ctx)?;
            if r.components == 0 {
                println!("no parameters: vacuous pass");
            } else {
                println!("max relative error {:.3e} over {} components (worst index {:?})", r.max_rel_error, r.components, r.worst_index);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
