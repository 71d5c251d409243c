use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use smartaug::cli::{
    cmd_dump_aug, cmd_export_curves, cmd_gen_synthetic, cmd_train, default_augmenter_checkpoint, grid_configs, run_dir,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "smartaug", version, about = "Joint augmenter/classifier training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config (or every config in a grid directory).
    Train {
        #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
        config: Option<PathBuf>,
        /// Directory of config files, run one after another in name order.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Write augmenter outputs next to the images they were made from.
    DumpAug {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the first augmenter of the config's run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Run output root; images go to `<run dir>/aug` unless `--dump-dir` is given.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Plot training and validation loss from a metrics CSV as SVG.
    ExportCurves {
        metrics: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic rectangles-vs-discs image tree.
    GenSynthetic {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Images per class.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn train_one(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let dir = run_dir(out, config);
    let manifest = cmd_train(config, out).with_context(|| format!("run {} failed", dir.display()))?;
    println!(
        "{}: test accuracy {:.4} (best epoch {})",
        dir.display(),
        manifest.test_accuracy.unwrap_or(f64::NAN),
        manifest.best_epoch.map_or("none".into(), |e| e.to_string())
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, grid, seed, out } => match grid {
            Some(dir) => {
                let mut failed = Vec::new();
                for path in grid_configs(&dir)? {
                    let outcome = load_config(Some(&path), seed).and_then(|c| train_one(&c, &out));
                    if let Err(e) = outcome {
                        eprintln!("{}: {e:#}", path.display());
                        failed.push(path);
                    }
                }
                if !failed.is_empty() {
                    bail!("{} of the grid's configs failed", failed.len());
                }
                Ok(())
            }
            None => train_one(&load_config(config.as_deref(), seed)?, &out),
        },
        Command::DumpAug {
            config,
            checkpoint,
            seed,
            count,
            out,
            dump_dir,
        } => {
            let config = load_config(Some(&config), seed)?;
            let ckpt = checkpoint.unwrap_or_else(|| default_augmenter_checkpoint(&out, &config));
            let dir = dump_dir.unwrap_or_else(|| run_dir(&out, &config).join("aug"));
            let files = cmd_dump_aug(&config, &ckpt, count, &dir)?;
            println!("wrote {} images to {}", files.len(), dir.display());
            Ok(())
        }
        Command::ExportCurves { metrics, out } => {
            let out = out.unwrap_or_else(|| metrics.with_extension("svg"));
            cmd_export_curves(&metrics, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::GenSynthetic { config, seed, count, out } => {
            let config = load_config(config.as_deref(), seed)?;
            let ds = cmd_gen_synthetic(&config, count, &out)?;
            println!("wrote {} images to {}", ds.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
