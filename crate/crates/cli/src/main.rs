use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imfx::emd::decompose;
use imfx::fixtures;
use imfx::pipeline::{
    self, explain, load_csv, predict, read_json, read_predictions_csv, render_plots, train_model, write_attribution,
    write_decomposition_csv, write_json, write_predictions_csv, write_series_csv, AttributionFile, Checkpoint,
    DecompositionSummary, Predictions, Prepared, PipelineConfig, TrainingSummary,
};

/// Explainable forecasting on empirical mode decompositions.
#[derive(Parser)]
#[command(name = "imfx", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose → train → predict → explain (→ ablate) in one go.
    Run(Common),
    /// Write `decomposition.csv` for the input series.
    Decompose(Common),
    /// Train from a decomposition file and write `checkpoint_<model>.json`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        decomposition: PathBuf,
    },
    /// Forecast the validation block with a checkpoint.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        decomposition: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// DeepSHAP attributions of the validation forecasts to each channel.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        decomposition: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Render SVG charts from the predictions and attributions in `--out`.
    Plot {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic series as a `t,Close` CSV.
    Synth {
        #[arg(long, value_enum)]
        fixture: Fixture,
        #[arg(long, default_value_t = 2000)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Constant,
    TwoTone,
    TrendTones,
    TrendNoise,
    RandomWalk,
}

/// Flags shared by the stage subcommands; they override `--config`.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    column: Option<String>,
    /// mlp, lstm or both.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of baseline windows for DeepSHAP.
    #[arg(long)]
    background: Option<usize>,
    /// One-based channels to drop in an ablation rerun, e.g. `1,2`.
    #[arg(long)]
    exclude_imfs: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                cfg.set(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
            Ok(())
        };
        set("input", self.input.as_ref().map(|p| p.display().to_string()))?;
        set("column", self.column.clone())?;
        set("model", self.model.clone())?;
        set("window", self.window.map(|v| v.to_string()))?;
        set("split", self.split.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("background", self.background.map(|v| v.to_string()))?;
        set("exclude_imfs", self.exclude_imfs.clone())?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{kv}`");
            };
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn load_checkpoint(path: &Path, cfg: &PipelineConfig) -> Result<Checkpoint> {
    let ckpt: Checkpoint = read_json(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    if ckpt.config_digest != cfg.digest() {
        log::warn!("checkpoint was trained under a different config (digest {})", ckpt.config_digest);
    }
    Ok(ckpt)
}

fn print_metrics(tag: &str, p: &Predictions) {
    let d = &p.metrics.display;
    println!(
        "{tag}: MSE {} RMSE {} MAE {} MAPE {} R2 {} ({} samples)",
        d.mse, d.rmse, d.mae, d.mape, d.r2, p.metrics.samples
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let run = pipeline::run_pipeline(&cfg)?;
            for (tag, m) in &run.metrics.models {
                let d = &m.metrics.display;
                println!("{tag}: MSE {} RMSE {} MAE {} MAPE {} R2 {}", d.mse, d.rmse, d.mae, d.mape, d.r2);
                let r = &run.reports[tag];
                if let Some(percent) = &r.percent {
                    for &k in &r.ranking {
                        println!("  {:<10} {:>8.2}%", r.channel_names[k], percent[k]);
                    }
                }
            }
            if let Some(a) = &run.metrics.ablation {
                for (tag, m) in &a.models {
                    println!("{tag} without {:?}: MSE change {:+.6}", a.excluded_names, m.mse_change);
                }
            }
            println!("artifacts in {}", run.out_dir.display());
        }
        Command::Decompose(common) => {
            let cfg = common.config()?;
            let input = cfg.input.clone().context("--input is required")?;
            let series = load_csv(&input, &cfg.column)?;
            let d = decompose(&series, &cfg.sift)?;
            let dir = out_dir(&cfg)?;
            write_decomposition_csv(&dir.join("decomposition.csv"), &series, &d)?;
            write_json(&dir.join("decomposition.json"), &DecompositionSummary::new(&series, &d))?;
            println!("{} IMFs plus residual → {}", d.num_imfs(), dir.join("decomposition.csv").display());
        }
        Command::Train { common, decomposition } => {
            let cfg = common.config()?;
            let prepared = Prepared::from_decomposition_csv(&decomposition, &cfg)?;
            let dir = out_dir(&cfg)?;
            for kind in cfg.model.kinds() {
                let ckpt = train_model(&prepared, &cfg, kind, &cfg.exclude_imfs)?;
                let path = dir.join(format!("checkpoint_{}.json", ckpt.tag()));
                write_json(&path, &ckpt)?;
                let s = TrainingSummary::from(&ckpt.history);
                println!(
                    "{}: {} epochs, best monitor loss {:.4e} → {}",
                    ckpt.tag(),
                    s.epochs,
                    s.best_monitor_loss,
                    path.display()
                );
            }
        }
        Command::Predict {
            common,
            decomposition,
            checkpoint,
        } => {
            let cfg = common.config()?;
            let prepared = Prepared::from_decomposition_csv(&decomposition, &cfg)?;
            let ckpt = load_checkpoint(&checkpoint, &cfg)?;
            let p = predict(&prepared, &ckpt)?;
            let dir = out_dir(&cfg)?;
            let tag = ckpt.tag();
            write_predictions_csv(&dir.join(format!("predictions_{tag}.csv")), &p.times, &p.actual, &p.predicted)?;
            write_json(&dir.join(format!("metrics_{tag}.json")), &p.metrics)?;
            print_metrics(&tag, &p);
        }
        Command::Explain {
            common,
            decomposition,
            checkpoint,
        } => {
            let cfg = common.config()?;
            let prepared = Prepared::from_decomposition_csv(&decomposition, &cfg)?;
            let ckpt = load_checkpoint(&checkpoint, &cfg)?;
            let e = explain(&prepared, &ckpt, &cfg)?;
            write_attribution(out_dir(&cfg)?, &ckpt.tag(), &cfg, &e)?;
            match &e.report.percent {
                Some(percent) => {
                    for &k in &e.report.ranking {
                        println!("{:<10} {:>14.6} {:>8.2}%", e.report.channel_names[k], e.report.mean_shap[k], percent[k]);
                    }
                }
                None => println!("all attributions are zero; percentages undefined"),
            }
        }
        Command::Plot { out } => plot(&out)?,
        Command::Synth {
            fixture,
            length,
            seed,
            output,
        } => {
            let values = match fixture {
                Fixture::Constant => fixtures::constant(length, 1.0),
                Fixture::TwoTone => fixtures::two_tone(length),
                Fixture::TrendTones => fixtures::trend_tones(length, seed),
                Fixture::TrendNoise => fixtures::trend_noise(length, seed),
                Fixture::RandomWalk => fixtures::random_walk(length, seed),
            };
            write_series_csv(&output, &fixtures::as_series("Close", values)?)?;
            println!("{length} points → {}", output.display());
        }
    }
    Ok(())
}

/// Re-renders charts for every `predictions_<tag>.csv` with a matching
/// `attribution_<tag>.json`.
fn plot(dir: &Path) -> Result<()> {
    let mut tags: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("predictions_")?.strip_suffix(".csv").map(str::to_string)
        })
        .collect();
    tags.sort();
    if tags.is_empty() {
        bail!("no predictions_<model>.csv files in {}", dir.display());
    }
    for tag in tags {
        let (_, actual, predicted) = read_predictions_csv(&dir.join(format!("predictions_{tag}.csv")))?;
        let attribution = dir.join(format!("attribution_{tag}.json"));
        if !attribution.exists() {
            log::warn!("no {} for {tag}; skipping its charts", attribution.display());
            continue;
        }
        let file: AttributionFile = read_json(&attribution)?;
        let metrics = imfx::metrics::compute_metrics(&actual, &predicted)?;
        let p = Predictions {
            times: Vec::new(),
            actual,
            predicted,
            metrics,
        };
        for name in render_plots(dir, &tag, &p, &file.report) {
            println!("{}", dir.join(name).display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
