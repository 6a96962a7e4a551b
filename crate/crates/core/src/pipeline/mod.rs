//! End-to-end runs: decompose, train, predict, explain and ablate, writing
//! every artifact plus a manifest of content hashes.

mod config;
mod io;
pub mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{parse_channel_list, ModelChoice, PipelineConfig};
pub use io::{
    load_csv, read_decomposition_csv, read_json, read_predictions_csv, sha256_file, write_decomposition_csv,
    write_json, write_predictions_csv, write_series_csv, write_text,
};

use crate::attribution::{aggregate_importance, explain_dataset, AttributionMatrix, AttributionReport, BaselineSet};
use crate::emd::{decompose, Decomposition, SiftStop};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsBundle};
use crate::nn::{predict_series, train, ForecastModel, ModelKind, TrainHistory};
use crate::series::{
    chronological_split, fit_scaler, make_windows, ChannelMatrix, Scaler, Series, SplitSpec, Timestamp,
    WindowedDataset,
};

pub const SCHEMA_VERSION: u32 = 1;

/// A series with its channels and split, ready for windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub series: Series,
    /// Every IMF, then the residual when configured.
    pub channels: ChannelMatrix,
    pub split: SplitSpec,
}

impl Prepared {
    pub fn from_decomposition(series: Series, decomposition: &Decomposition, cfg: &PipelineConfig) -> Result<Self> {
        let channels = decomposition.channel_matrix(cfg.include_residual)?;
        Self::new(series, channels, cfg)
    }

    /// Reads the CSV written by the decompose stage.
    pub fn from_decomposition_csv(path: &Path, cfg: &PipelineConfig) -> Result<Self> {
        let (series, mut channels) = read_decomposition_csv(path, &cfg.column)?;
        if !cfg.include_residual {
            let last = channels.num_channels() - 1;
            channels = channels.without_channels(&[last])?;
        }
        Self::new(series, channels, cfg)
    }

    fn new(series: Series, channels: ChannelMatrix, cfg: &PipelineConfig) -> Result<Self> {
        let split = chronological_split(series.len(), cfg.split)?;
        Ok(Prepared {
            series,
            channels,
            split,
        })
    }

    /// Channel matrix without the given one-based channels.
    pub fn matrix_without(&self, excluded: &[usize]) -> Result<ChannelMatrix> {
        let k = self.channels.num_channels();
        if let Some(&bad) = excluded.iter().find(|&&c| c == 0 || c > k) {
            return Err(Error::Config(format!(
                "excluded channel {bad} is outside 1..={k}"
            )));
        }
        if excluded.len() >= k {
            return Err(Error::Config("cannot exclude every channel".into()));
        }
        let zero_based: Vec<usize> = excluded.iter().map(|c| c - 1).collect();
        self.channels.without_channels(&zero_based)
    }
}

/// Trained model plus everything needed to rebuild its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config_digest: String,
    pub window: usize,
    pub channel_names: Vec<String>,
    /// One-based indices into the full channel list.
    pub excluded: Vec<usize>,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
    pub model: ForecastModel,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn tag(&self) -> String {
        tag(self.model.kind(), &self.excluded)
    }
}

fn tag(kind: ModelKind, excluded: &[usize]) -> String {
    if excluded.is_empty() {
        kind.to_string()
    } else {
        let list: Vec<String> = excluded.iter().map(usize::to_string).collect();
        format!("{kind}_without_{}", list.join("_"))
    }
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
}

fn datasets(
    prepared: &Prepared,
    matrix: &ChannelMatrix,
    input_scaler: &Scaler,
    target_scaler: &Scaler,
    window: usize,
) -> Result<Datasets> {
    let scaled = input_scaler.transform(matrix)?;
    let split = &prepared.split;
    Ok(Datasets {
        train: make_windows(&scaled, &prepared.series, split.train_range.clone(), window)?
            .with_target_scaler(target_scaler)?,
        val: make_windows(&scaled, &prepared.series, split.val_range.clone(), window)?
            .with_target_scaler(target_scaler)?,
    })
}

impl Checkpoint {
    pub fn datasets(&self, prepared: &Prepared) -> Result<Datasets> {
        let matrix = prepared.matrix_without(&self.excluded)?;
        if matrix.names() != self.channel_names.as_slice() {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects channels {:?}, data has {:?}",
                self.channel_names,
                matrix.names()
            )));
        }
        datasets(prepared, &matrix, &self.input_scaler, &self.target_scaler, self.window)
    }
}

/// Fits scalers on the train rows and trains one model.
pub fn train_model(prepared: &Prepared, cfg: &PipelineConfig, kind: ModelKind, excluded: &[usize]) -> Result<Checkpoint> {
    let matrix = prepared.matrix_without(excluded)?;
    let train_range = prepared.split.train_range.clone();
    let input_scaler = fit_scaler(&matrix, train_range.clone(), cfg.scaling)?;
    // train targets are the original values at rows window..train_end
    let target_matrix = ChannelMatrix::new(vec!["target".into()], vec![prepared.series.values().to_vec()])?;
    let target_start = cfg.window.min(train_range.end.saturating_sub(1));
    let target_scaler = fit_scaler(&target_matrix, target_start..train_range.end, cfg.scaling)?;
    let data = datasets(prepared, &matrix, &input_scaler, &target_scaler, cfg.window)?;
    let model = ForecastModel::init(kind, cfg.window, matrix.num_channels(), cfg.width(kind), cfg.seed)?;
    let (model, history) = train(model, &data.train, &cfg.train_config(kind))?;
    log::info!(
        "{}: {} epochs, best monitor loss {:.4e} at epoch {}",
        tag(kind, excluded),
        history.stopped_epoch,
        history.best_monitor_loss(),
        history.best_epoch + 1
    );
    Ok(Checkpoint {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        window: cfg.window,
        channel_names: matrix.names().to_vec(),
        excluded: excluded.to_vec(),
        input_scaler,
        target_scaler,
        model,
        history,
    })
}

/// Validation-block forecasts in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub times: Vec<Timestamp>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub metrics: MetricsBundle,
}

pub fn predict(prepared: &Prepared, checkpoint: &Checkpoint) -> Result<Predictions> {
    let val = checkpoint.datasets(prepared)?.val;
    let predicted = predict_series(&checkpoint.model, &val, &checkpoint.target_scaler)?;
    let metrics = compute_metrics(val.targets(), &predicted)?;
    Ok(Predictions {
        times: val
            .sample_time_index()
            .iter()
            .map(|&t| prepared.series.timestamps()[t])
            .collect(),
        actual: val.targets().to_vec(),
        predicted,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub baselines: BaselineSet,
    /// One per validation sample, in original price units.
    pub matrices: Vec<AttributionMatrix>,
    pub times: Vec<Timestamp>,
    pub report: AttributionReport,
}

/// DeepSHAP over the validation block against train-window baselines.
pub fn explain(prepared: &Prepared, checkpoint: &Checkpoint, cfg: &PipelineConfig) -> Result<Explanation> {
    let data = checkpoint.datasets(prepared)?;
    let baselines = BaselineSet::sample(&data.train, cfg.background, cfg.seed)?;
    // unscaling is affine, so attributions map to price units by the slope
    let slope = checkpoint.target_scaler.scales[0];
    let matrices: Vec<AttributionMatrix> = explain_dataset(&checkpoint.model, &data.val, &baselines)?
        .into_iter()
        .map(|m| m.scaled(slope))
        .collect();
    let report = aggregate_importance(&matrices, &checkpoint.channel_names, cfg.channel_score)?;
    let times = data
        .val
        .sample_time_index()
        .iter()
        .map(|&t| prepared.series.timestamps()[t])
        .collect();
    Ok(Explanation {
        baselines,
        matrices,
        times,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub early_stopped: bool,
    pub best_monitor_loss: f64,
    pub update_samples: usize,
    pub monitor_samples: usize,
}

impl From<&TrainHistory> for TrainingSummary {
    fn from(h: &TrainHistory) -> Self {
        TrainingSummary {
            epochs: h.stopped_epoch,
            best_epoch: h.best_epoch,
            early_stopped: h.early_stopped,
            best_monitor_loss: h.best_monitor_loss(),
            update_samples: h.update_samples,
            monitor_samples: h.monitor_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub metrics: MetricsBundle,
    pub training: TrainingSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationModel {
    pub metrics: MetricsBundle,
    pub training: TrainingSummary,
    /// Ablated minus full-model validation MSE.
    pub mse_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationBlock {
    pub excluded: Vec<usize>,
    pub excluded_names: Vec<String>,
    pub models: BTreeMap<String, AblationModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub imfs: usize,
    pub sift_iterations: Vec<usize>,
    pub sift_stops: Vec<SiftStop>,
    pub max_reconstruction_error: f64,
}

impl DecompositionSummary {
    pub fn new(series: &Series, d: &Decomposition) -> Self {
        let max_reconstruction_error = d
            .reconstruct()
            .iter()
            .zip(series.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        DecompositionSummary {
            imfs: d.num_imfs(),
            sift_iterations: d.sift_iterations.clone(),
            sift_stops: d.sift_stops.clone(),
            max_reconstruction_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema_version: u32,
    pub config_digest: String,
    pub series: String,
    pub series_length: usize,
    pub channels: Vec<String>,
    pub train_rows: usize,
    pub val_rows: usize,
    pub models: BTreeMap<String, ModelMetrics>,
    pub ablation: Option<AblationBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionFile {
    pub schema_version: u32,
    pub model: String,
    pub config_digest: String,
    pub baselines: usize,
    pub baseline_samples: Vec<usize>,
    #[serde(flatten)]
    pub report: AttributionReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub input: Option<FileRecord>,
    pub files: Vec<FileRecord>,
}

/// What a run left on disk, plus the in-memory results.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub metrics: MetricsFile,
    pub reports: BTreeMap<String, AttributionReport>,
    pub checkpoints: BTreeMap<String, Checkpoint>,
}

/// Collects written files and stage timings for one run.
struct Writer {
    dir: PathBuf,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {stage}");
        let out = f(self).map_err(|e| e.in_stage(stage))?;
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

fn file_record(dir: &Path, name: &str) -> Result<FileRecord> {
    let path = dir.join(name);
    let bytes = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
    Ok(FileRecord {
        name: name.to_string(),
        sha256: sha256_file(&path)?,
        bytes,
    })
}

pub fn write_attribution(dir: &Path, tag: &str, cfg: &PipelineConfig, explanation: &Explanation) -> Result<Vec<String>> {
    let report = &explanation.report;
    let json_name = format!("attribution_{tag}.json");
    write_json(
        &dir.join(&json_name),
        &AttributionFile {
            schema_version: SCHEMA_VERSION,
            model: tag.to_string(),
            config_digest: cfg.digest(),
            baselines: explanation.baselines.len(),
            baseline_samples: explanation.baselines.source_samples.clone(),
            report: report.clone(),
        },
    )?;
    let mut csv = String::from("channel,mean_shap,percent\n");
    for (k, name) in report.channel_names.iter().enumerate() {
        let pct = report.percent.as_ref().map(|p| p[k].to_string()).unwrap_or_default();
        csv.push_str(&format!("{name},{},{pct}\n", report.mean_shap[k]));
    }
    let csv_name = format!("attribution_{tag}.csv");
    write_text(&dir.join(&csv_name), &csv)?;

    let mut samples = format!("t,{}\n", report.channel_names.join(","));
    for (t, m) in explanation.times.iter().zip(&explanation.matrices) {
        samples.push_str(&t.to_string());
        for v in m.channel_sums() {
            samples.push_str(&format!(",{v}"));
        }
        samples.push('\n');
    }
    let samples_name = format!("attribution_{tag}_samples.csv");
    write_text(&dir.join(&samples_name), &samples)?;
    Ok(vec![json_name, csv_name, samples_name])
}

/// Renders the overlay and importance charts; failures are logged only.
pub fn render_plots(dir: &Path, tag: &str, predictions: &Predictions, report: &AttributionReport) -> Vec<String> {
    let mut written = Vec::new();
    let overlay = plot::overlay_svg(
        &format!("{tag}: validation actual vs predicted"),
        &predictions.actual,
        &predictions.predicted,
    );
    let name = format!("overlay_{tag}.svg");
    match write_text(&dir.join(&name), &overlay) {
        Ok(()) => written.push(name),
        Err(e) => log::warn!("plot {name} skipped: {e}"),
    }
    if let Some(percent) = &report.percent {
        let bars = plot::importance_svg(&format!("{tag}: channel importance (%)"), &report.channel_names, percent);
        let name = format!("importance_{tag}.svg");
        match write_text(&dir.join(&name), &bars) {
            Ok(()) => written.push(name),
            Err(e) => log::warn!("plot {name} skipped: {e}"),
        }
    } else {
        log::warn!("importance plot for {tag} skipped: attributions are all zero");
    }
    written
}

/// Runs every stage for `cfg` and writes the artifacts to `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::Config("no input file configured".into()))?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut w = Writer {
        dir: cfg.out.clone(),
        files: Vec::new(),
        timings: Vec::new(),
    };

    let series = w.time("load", |_| load_csv(&input, &cfg.column))?;
    let (prepared, summary) = w.time("decompose", |w| {
        let d = decompose(&series, &cfg.sift)?;
        write_decomposition_csv(&w.path("decomposition.csv"), &series, &d)?;
        let summary = DecompositionSummary::new(&series, &d);
        write_json(&w.path("decomposition.json"), &summary)?;
        Ok((Prepared::from_decomposition(series.clone(), &d, cfg)?, summary))
    })?;
    log::info!(
        "{} IMFs (+ residual), max reconstruction error {:.3e}",
        summary.imfs,
        summary.max_reconstruction_error
    );
    write_text(&w.path("config.txt"), &cfg.digest_text())?;

    let mut models = BTreeMap::new();
    let mut reports = BTreeMap::new();
    let mut checkpoints = BTreeMap::new();
    for kind in cfg.model.kinds() {
        let tag = kind.to_string();
        let ckpt = w.time("train", |w| {
            let c = train_model(&prepared, cfg, kind, &[])?;
            write_json(&w.path(&format!("checkpoint_{tag}.json")), &c)?;
            Ok(c)
        })?;
        let predictions = w.time("predict", |w| {
            let p = predict(&prepared, &ckpt)?;
            write_predictions_csv(&w.path(&format!("predictions_{tag}.csv")), &p.times, &p.actual, &p.predicted)?;
            Ok(p)
        })?;
        let explanation = w.time("explain", |w| {
            let e = explain(&prepared, &ckpt, cfg)?;
            for name in write_attribution(&w.dir, &tag, cfg, &e)? {
                w.files.push(name);
            }
            Ok(e)
        })?;
        if cfg.plots {
            let names = render_plots(&w.dir, &tag, &predictions, &explanation.report);
            w.files.extend(names);
        }
        models.insert(
            tag.clone(),
            ModelMetrics {
                metrics: predictions.metrics.clone(),
                training: TrainingSummary::from(&ckpt.history),
            },
        );
        reports.insert(tag.clone(), explanation.report);
        checkpoints.insert(tag, ckpt);
    }

    let ablation = if cfg.exclude_imfs.is_empty() {
        None
    } else {
        Some(w.time("ablate", |_| ablate(&prepared, cfg, &models, &cfg.exclude_imfs))?)
    };

    let metrics = MetricsFile {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        series: prepared.series.name().to_string(),
        series_length: prepared.series.len(),
        channels: prepared.channels.names().to_vec(),
        train_rows: prepared.split.train_range.len(),
        val_rows: prepared.split.val_range.len(),
        models,
        ablation,
    };
    write_json(&w.path("metrics.json"), &metrics)?;

    let mut files = w
        .files
        .iter()
        .map(|name| file_record(&w.dir, name))
        .collect::<Result<Vec<_>>>()?;
    files.sort_by(|a, b| a.name.cmp(&b.name));
    let input_record = {
        let name = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let bytes = std::fs::metadata(&input).map_err(|e| Error::io(&input, e))?.len();
        FileRecord {
            name,
            sha256: sha256_file(&input)?,
            bytes,
        }
    };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        input: Some(input_record),
        files,
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    let timings: BTreeMap<String, f64> = w.timings.iter().fold(BTreeMap::new(), |mut acc, (k, v)| {
        *acc.entry(k.clone()).or_insert(0.0) += v;
        acc
    });
    write_json(&cfg.out.join("timings.json"), &timings)?;

    Ok(RunArtifacts {
        out_dir: cfg.out.clone(),
        manifest,
        metrics,
        reports,
        checkpoints,
    })
}

/// Retrains every configured model without `excluded` (one-based) and
/// compares validation MSE with the full models.
pub fn ablate(
    prepared: &Prepared,
    cfg: &PipelineConfig,
    full: &BTreeMap<String, ModelMetrics>,
    excluded: &[usize],
) -> Result<AblationBlock> {
    let names = prepared.channels.names();
    let mut models = BTreeMap::new();
    for kind in cfg.model.kinds() {
        let ckpt = train_model(prepared, cfg, kind, excluded)?;
        let p = predict(prepared, &ckpt)?;
        let base = full
            .get(&kind.to_string())
            .map(|m| m.metrics.mse)
            .ok_or_else(|| Error::InvalidArgument(format!("no full-model metrics for {kind}")))?;
        models.insert(
            kind.to_string(),
            AblationModel {
                mse_change: p.metrics.mse - base,
                metrics: p.metrics,
                training: TrainingSummary::from(&ckpt.history),
            },
        );
    }
    Ok(AblationBlock {
        excluded: excluded.to_vec(),
        excluded_names: excluded.iter().map(|&k| names[k - 1].clone()).collect(),
        models,
    })
}

/// Validation MSE of `kind` with and without `excluded`, for direct
/// comparisons outside a full run.
pub fn ablation_mse_change(prepared: &Prepared, cfg: &PipelineConfig, kind: ModelKind, excluded: &[usize]) -> Result<f64> {
    let full = predict(prepared, &train_model(prepared, cfg, kind, &[])?)?.metrics.mse;
    let ablated = predict(prepared, &train_model(prepared, cfg, kind, excluded)?)?.metrics.mse;
    Ok(ablated - full)
}
