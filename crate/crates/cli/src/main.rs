use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wavefuse_cli::{cmd_compare, cmd_gen_dataset, cmd_run};

/// Pool-based active learning experiments with multi-strategy fusion.
#[derive(Parser)]
#[command(name = "wavefuse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix described by a TOML config.
    Run {
        /// Path to the run configuration.
        config: PathBuf,
        /// Output directory (overrides config and WAVEFUSE_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel runs (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Paired-t-test comparison of two curves files.
    Compare {
        curves_a: PathBuf,
        curves_b: PathBuf,
        /// Metric column to compare (e.g. accuracy or f1).
        #[arg(long)]
        metric: String,
    },
    /// Sample a blob-spec TOML into a dataset CSV.
    GenDataset {
        spec: PathBuf,
        out: PathBuf,
        /// Replace the spec's seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed_override,
        } => cmd_run(&config, out.as_deref(), workers, seed_override).map(|paths| {
            for path in paths {
                println!("wrote {}", path.display());
            }
        }),
        Command::Compare {
            curves_a,
            curves_b,
            metric,
        } => cmd_compare(&curves_a, &curves_b, &metric).map(|report| {
            print!("{}", report.render());
        }),
        Command::GenDataset {
            spec,
            out,
            seed_override,
        } => cmd_gen_dataset(&spec, &out, seed_override).map(|()| {
            println!("wrote {}", out.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
