use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adlkit::harness::{
    emit_report, load_windows, parse_report, run_experiment, train_pipeline, ExperimentConfig, ReportFormat, SynthPreset,
};
use adlkit::ingest::{parse_window, write_dataset};
use adlkit::recognizer::{recognize, PipelineModel};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adlkit", version, about = "Hierarchical activity and environment recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scales the iteration budget (1 = full budget).
    #[arg(long, global = true)]
    iters_scale: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Standing,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Train a single pipeline on every labelled window and save the bundle.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; synthesizes one when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the training grid. Writes report.json, report.txt, and the best
    /// pipeline under --out.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Classify window files with a saved pipeline; prints one JSON line each.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        windows: Vec<PathBuf>,
    },
    /// Re-render a saved JSON report.
    Report {
        #[command(flatten)]
        common: Common,
        report: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(scale) = common.iters_scale {
        config.train.iters_scale = scale;
    }
    config.validate()?;
    Ok(config)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, out, count, preset } => {
            let mut config = load_config(&common)?;
            if let Some(count) = count {
                config.synth.count = count;
            }
            if let Some(preset) = preset {
                config.synth.preset = match preset {
                    Preset::Standing => SynthPreset::Standing,
                    Preset::Full => SynthPreset::Full,
                };
            }
            config.experiment.data = None;
            let windows = load_windows(&config)?;
            write_dataset(&out, &windows)?;
            eprintln!("wrote {} windows to {}", windows.len(), out.display());
        }
        Command::Train { common, data, out } => {
            let mut config = load_config(&common)?;
            if data.is_some() {
                config.experiment.data = data;
            }
            let windows = load_windows(&config)?;
            let pipeline = train_pipeline(&config, &windows)?;
            pipeline.save(&out)?;
            eprintln!("saved pipeline to {}", out.display());
        }
        Command::Experiment { common, data, out, format } => {
            let mut config = load_config(&common)?;
            if data.is_some() {
                config.experiment.data = data;
            }
            let outcome = run_experiment(&config)?;
            if let Some(out) = &out {
                fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
                write(&out.join("report.json"), &emit_report(&outcome.report, ReportFormat::Json))?;
                write(&out.join("report.txt"), &emit_report(&outcome.report, ReportFormat::Text))?;
                if let Some(pipeline) = &outcome.pipeline {
                    pipeline.save(&out.join("pipeline"))?;
                }
            }
            print!("{}", emit_report(&outcome.report, format.into()));
        }
        Command::Classify { common: _, model, windows } => {
            let pipeline = PipelineModel::load(&model)?;
            for path in windows {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let window = parse_window(&text).with_context(|| format!("parsing {}", path.display()))?;
                let result = recognize(&window, &pipeline)?;
                println!("{}", serde_json::to_string(&result)?);
            }
        }
        Command::Report { common: _, report, format } => {
            let text = fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            print!("{}", emit_report(&parse_report(&text)?, format.into()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().find_map(|c| c.downcast_ref::<adlkit::Error>()).is_some_and(|e| e.is_validation());
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
