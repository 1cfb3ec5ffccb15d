use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pin_cli::commands::{self, Overrides};
use pin_cli::config::RunConfig;
use pin_cli::Result;

#[derive(Parser)]
#[command(name = "pin", version, about = "Progressive implicit networks: fit, evaluate and analyse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Seed for sampling, initialisation and batching.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of levels (fit) or truncation level (eval).
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Marching-cubes grid resolution per axis.
    #[arg(long)]
    grid_res: Option<usize>,
    /// Iso level of the extracted surface.
    #[arg(long)]
    iso: Option<f64>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides { seed: f.seed, levels: f.levels, out: f.out, grid_res: f.grid_res, iso: f.iso }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and export checkpoint, metrics and per-level outputs.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Evaluate a checkpoint, optionally truncated to fewer levels.
    Eval {
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Train across a grid of values and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Train with a learnable base component from several initial values.
    LearnC {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// DFT of an image with the checkpoint's encoding frequencies overlaid.
    DftAnalysis {
        checkpoint: PathBuf,
        /// Image to analyse; defaults to the checkpoint's training image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
}

fn fmt_metric(name: &str, v: f64) -> String {
    format!("{name} = {v:.6}")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { config, flags } => {
            let r = commands::fit(RunConfig::load(&config)?, &flags.into())?;
            println!("{}", fmt_metric(r.metric_name, r.metric));
            println!("final loss = {:.6e}, parameters = {}", r.final_loss, r.num_params);
            println!("wrote {} files to {}", r.files.len(), r.out_dir.display());
        }
        Command::Eval { checkpoint, flags } => {
            let r = commands::eval(&checkpoint, &flags.into())?;
            println!("levels = {}, parameters = {}", r.levels, r.num_params);
            println!("{}", fmt_metric(r.metric_name, r.metric));
            if let Some(m) = r.held_out_mse {
                println!("{}", fmt_metric("mse", m));
            }
        }
        Command::Sweep { config, flags } => {
            let r = commands::sweep_cmd(RunConfig::load(&config)?, &flags.into())?;
            for s in r.summary() {
                println!("{} = {}: {} = {:.4} ± {:.4} (n = {})", r.kind, s.value, r.metric_name, s.mean, s.std, s.count);
            }
        }
        Command::LearnC { config, flags } => {
            let r = commands::learn_c(RunConfig::load(&config)?, &flags.into())?;
            println!("target mean = {:?}", r.target);
            for (init, c) in &r.runs {
                println!("init {init}: learned c = {c:?}");
            }
        }
        Command::DftAnalysis { checkpoint, image, flags } => {
            let r = commands::dft_analysis(&checkpoint, image.as_deref(), &flags.into())?;
            println!("{} frequencies, {} outside the DFT grid", r.bins, r.clamped);
            println!("level spectral centroids = {:?}", r.centroids);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
