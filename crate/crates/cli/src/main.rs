use std::path::PathBuf;
use std::process::ExitCode;

use apnea_cli::pipeline::{cmd_build, format_ingest_summary, ingest, record_names};
use apnea_cli::run::{cmd_evaluate, cmd_plot, cmd_train, SplitName};
use apnea_cli::{preset, CliError, ExperimentConfig, PRESET_NAMES};
use apnea_core::dataset::WINDOW_SIZES;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "apnea", version, about = "Sleep apnoea detection from single-lead ECG windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key-value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bundled configuration to start from
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    /// Directory holding the .hea/.dat/.apn files (default: $APNEA_ECG_DIR)
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Window size in samples
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Seed for splitting, initialisation and shuffling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Split(s) to evaluate: train, test, val or all
    #[arg(long, global = true, default_value = "all")]
    split: String,
}

#[derive(Subcommand)]
enum Command {
    /// Read every record and print per-record and per-group minute counts
    Ingest,
    /// Build windowed dataset containers (all window sizes unless --window)
    Build,
    /// Train a model and write a complete run directory
    Train,
    /// Score a checkpoint on the split(s) it was trained with
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset container; defaults to the configured dataset directory
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Redraw the charts of a run directory (given by --out)
    Plot,
    /// Print the bundled presets
    Presets,
}

/// Resolves the configuration. Outside `build`, a bare `--window W` selects
/// the preset `wW`.
fn config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let window = match cli.command {
        Command::Build => None,
        _ => cli.window,
    };
    let mut cfg = match (&cli.config, &cli.preset, window) {
        (Some(path), _, _) => {
            let mut c = ExperimentConfig::load(path)?;
            if let Some(p) = &cli.preset {
                return Err(CliError::Config(format!("--preset {p} conflicts with --config {}", path.display())));
            }
            if let Some(w) = window {
                c.model.window_size = w;
            }
            c
        }
        (None, Some(p), _) => {
            let c = preset(p).expect("clap restricts preset names");
            if let Some(w) = window.filter(|&w| w != c.model.window_size) {
                return Err(CliError::Config(format!("--window {w} conflicts with preset {p}")));
            }
            c
        }
        (None, None, Some(w)) => {
            preset(&format!("w{w}")).ok_or_else(|| CliError::Config(format!("no preset for window {w}; pass --config")))?
        }
        (None, None, None) => ExperimentConfig::default(),
    };
    if let Some(d) = &cli.data_dir {
        cfg.data_directory = Some(d.clone());
    }
    if let Some(s) = cli.seed {
        cfg.model.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Presets => {
            let names: Vec<&str> = match &cli.preset {
                Some(p) => vec![p.as_str()],
                None => PRESET_NAMES.to_vec(),
            };
            for name in names {
                println!("# preset {name}\n{}", preset(name).expect("known preset").to_text());
            }
        }
        Command::Ingest => {
            let cfg = config(cli)?;
            let ing = ingest(&cfg.resolve_data_directory()?, &record_names(&cfg)?)?;
            print!("{}", format_ingest_summary(&ing));
        }
        Command::Build => {
            let cfg = config(cli)?;
            let windows: Vec<usize> = match cli.window {
                Some(w) => vec![w],
                None => WINDOW_SIZES.to_vec(),
            };
            let out = cli.out.clone().unwrap_or_else(|| cfg.dataset_directory.clone());
            for b in cmd_build(&cfg, &windows, &out)? {
                println!("{}\n{}", b.path.display(), b.report);
            }
        }
        Command::Train => {
            let mut cfg = config(cli)?;
            if let Some(o) = &cli.out {
                cfg.output_directory = Some(o.clone());
            }
            let outcome = cmd_train(&cfg, &cfg.run_directory())?;
            println!("{}\n{}", outcome.run_dir.display(), outcome.summary);
        }
        Command::Evaluate { checkpoint, dataset } => {
            let splits = SplitName::parse_selector(&cli.split)?;
            let dataset = match dataset {
                Some(d) => d.clone(),
                None => {
                    let model = apnea_core::nn::read_checkpoint(checkpoint)?;
                    config(cli)?.dataset_path(model.config.window_size)
                }
            };
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| checkpoint.parent().map(|p| p.join("evaluation")).unwrap_or_default());
            for r in cmd_evaluate(checkpoint, &dataset, &splits, &out)? {
                println!("{}", r.to_text());
            }
        }
        Command::Plot => {
            let dir = cli
                .out
                .clone()
                .ok_or_else(|| CliError::Config("plot needs --out <run directory>".into()))?;
            for p in cmd_plot(&dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
