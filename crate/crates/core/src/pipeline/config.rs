use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribution::{BaselineSet, ChannelScore};
use crate::emd::{BoundaryPolicy, SiftConfig};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, LstmModel, MlpModel, ModelKind, TrainConfig};
use crate::series::ScalingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    #[default]
    Mlp,
    Lstm,
    Both,
}

impl ModelChoice {
    pub fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelChoice::Mlp => vec![ModelKind::Mlp],
            ModelChoice::Lstm => vec![ModelKind::Lstm],
            ModelChoice::Both => vec![ModelKind::Mlp, ModelKind::Lstm],
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelChoice::Mlp => "mlp",
            ModelChoice::Lstm => "lstm",
            ModelChoice::Both => "both",
        })
    }
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelChoice::Mlp),
            "lstm" => Ok(ModelChoice::Lstm),
            "both" => Ok(ModelChoice::Both),
            other => Err(Error::Config(format!("unknown model `{other}` (expected mlp, lstm or both)"))),
        }
    }
}

/// Everything a run depends on besides the input file's bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub column: String,
    pub model: ModelChoice,
    pub window: usize,
    pub split: f64,
    pub scaling: ScalingKind,
    pub include_residual: bool,
    pub sift: SiftConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mlp_epochs: usize,
    pub lstm_epochs: usize,
    pub patience: usize,
    pub monitor_fraction: f64,
    pub mlp_hidden: usize,
    pub lstm_units: usize,
    pub seed: u64,
    pub background: usize,
    pub channel_score: ChannelScore,
    /// One-based channel indices dropped in the ablation rerun.
    pub exclude_imfs: Vec<usize>,
    pub out: PathBuf,
    pub plots: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mlp = TrainConfig::for_model(ModelKind::Mlp);
        let lstm = TrainConfig::for_model(ModelKind::Lstm);
        PipelineConfig {
            input: None,
            column: "Close".into(),
            model: ModelChoice::Mlp,
            window: 10,
            split: 0.75,
            scaling: ScalingKind::MinMax,
            include_residual: true,
            sift: SiftConfig::default(),
            learning_rate: mlp.adam.learning_rate,
            batch_size: mlp.batch_size,
            mlp_epochs: mlp.max_epochs,
            lstm_epochs: lstm.max_epochs,
            patience: mlp.patience,
            monitor_fraction: mlp.monitor_fraction,
            mlp_hidden: MlpModel::DEFAULT_HIDDEN,
            lstm_units: LstmModel::DEFAULT_UNITS,
            seed: 0,
            background: BaselineSet::DEFAULT_SIZE,
            channel_score: ChannelScore::AbsOfSum,
            exclude_imfs: Vec::new(),
            out: PathBuf::from("out"),
            plots: true,
        }
    }
}

/// Keys that locate data rather than define the experiment; they are kept
/// out of the digest so relocated runs stay comparable.
const LOCATION_KEYS: [&str; 2] = ["input", "out"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse `{value}` for key `{key}` as a boolean"))),
    }
}

/// Parses `1,3,5` (or an empty string) into one-based channel indices.
pub fn parse_channel_list(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: usize = parse("exclude_imfs", part)?;
        if k == 0 {
            return Err(Error::Config("channel indices are one-based".into()));
        }
        out.push(k);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl PipelineConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "input" => self.input = (!v.is_empty()).then(|| PathBuf::from(v)),
            "column" => self.column = v.to_string(),
            "model" => self.model = v.parse()?,
            "window" => self.window = parse(key, v)?,
            "split" => self.split = parse(key, v)?,
            "scaling" => self.scaling = v.parse()?,
            "include_residual" => self.include_residual = parse_bool(key, v)?,
            "sift.sd_threshold" => self.sift.sd_threshold = parse(key, v)?,
            "sift.max_iterations" => self.sift.max_sift_iterations = parse(key, v)?,
            "sift.max_imfs" => self.sift.max_imfs = parse(key, v)?,
            "sift.boundary" => self.sift.boundary_policy = v.parse::<BoundaryPolicy>()?,
            "sift.envelope_tolerance" => self.sift.envelope_tolerance = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "mlp_epochs" => self.mlp_epochs = parse(key, v)?,
            "lstm_epochs" => self.lstm_epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "monitor_fraction" => self.monitor_fraction = parse(key, v)?,
            "mlp_hidden" => self.mlp_hidden = parse(key, v)?,
            "lstm_units" => self.lstm_units = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "background" => self.background = parse(key, v)?,
            "channel_score" => self.channel_score = v.parse()?,
            "exclude_imfs" => self.exclude_imfs = parse_channel_list(v)?,
            "out" => self.out = PathBuf::from(v),
            "plots" => self.plots = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    fn entries(&self) -> BTreeMap<&'static str, String> {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        BTreeMap::from([
            ("input", self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("column", self.column.clone()),
            ("model", self.model.to_string()),
            ("window", self.window.to_string()),
            ("split", self.split.to_string()),
            ("scaling", self.scaling.to_string()),
            ("include_residual", self.include_residual.to_string()),
            ("sift.sd_threshold", self.sift.sd_threshold.to_string()),
            ("sift.max_iterations", self.sift.max_sift_iterations.to_string()),
            ("sift.max_imfs", self.sift.max_imfs.to_string()),
            ("sift.boundary", self.sift.boundary_policy.to_string()),
            ("sift.envelope_tolerance", self.sift.envelope_tolerance.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("mlp_epochs", self.mlp_epochs.to_string()),
            ("lstm_epochs", self.lstm_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("monitor_fraction", self.monitor_fraction.to_string()),
            ("mlp_hidden", self.mlp_hidden.to_string()),
            ("lstm_units", self.lstm_units.to_string()),
            ("seed", self.seed.to_string()),
            ("background", self.background.to_string()),
            ("channel_score", self.channel_score.to_string()),
            ("exclude_imfs", list(&self.exclude_imfs)),
            ("out", self.out.display().to_string()),
            ("plots", self.plots.to_string()),
        ])
    }

    /// Canonical text form: every key, sorted, one per line.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Canonical text without the location keys.
    pub fn digest_text(&self) -> String {
        self.entries()
            .into_iter()
            .filter(|(k, _)| !LOCATION_KEYS.contains(k))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`Self::digest_text`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.digest_text()))
    }

    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            max_epochs: match kind {
                ModelKind::Mlp => self.mlp_epochs,
                ModelKind::Lstm => self.lstm_epochs,
            },
            patience: self.patience,
            monitor_fraction: self.monitor_fraction,
            seed: self.seed,
        }
    }

    pub fn width(&self, kind: ModelKind) -> usize {
        match kind {
            ModelKind::Mlp => self.mlp_hidden,
            ModelKind::Lstm => self.lstm_units,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sift.validate()?;
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config("split must lie in (0, 1)".into()));
        }
        if self.mlp_hidden == 0 || self.lstm_units == 0 || self.background == 0 {
            return Err(Error::Config("mlp_hidden, lstm_units and background must be positive".into()));
        }
        if self.column.is_empty() {
            return Err(Error::Config("column must not be empty".into()));
        }
        for kind in self.model.kinds() {
            self.train_config(kind).validate()?;
        }
        Ok(())
    }
}
