//! Univariate series, chronological splits, per-channel scaling and
//! sliding-window datasets.

use std::fmt;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Calendar date or plain integer tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timestamp {
    Date(NaiveDate),
    Tick(i64),
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Timestamp::Tick(t) => write!(f, "{t}"),
        }
    }
}

impl Timestamp {
    /// Parses an ISO-8601 `YYYY-MM-DD` date, falling back to an integer tick.
    pub fn parse(s: &str) -> Option<Timestamp> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Some(Timestamp::Date(d));
        }
        s.parse::<i64>().ok().map(Timestamp::Tick)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    name: String,
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
}

impl Series {
    pub const MIN_LEN: usize = 3;

    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<Timestamp>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidSeries {
            name: name.clone(),
            reason,
        };
        if timestamps.len() != values.len() {
            return Err(invalid(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if values.len() < Self::MIN_LEN {
            return Err(invalid(format!(
                "length {} is below the minimum of {}",
                values.len(),
                Self::MIN_LEN
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {i}")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Series {
            name,
            timestamps,
            values,
        })
    }

    /// Series indexed by integer ticks `0..values.len()`.
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let ticks = (0..values.len() as i64).map(Timestamp::Tick).collect();
        Series::new(name, ticks, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Contiguous train/validation partition of an index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub train_range: Range<usize>,
    pub val_range: Range<usize>,
}

impl SplitSpec {
    pub const DEFAULT_FRACTION: f64 = 0.75;
    pub const MIN_LEN: usize = 8;
}

/// Splits `0..length` at `floor(fraction * length)` without shuffling.
pub fn chronological_split(length: usize, fraction: f64) -> Result<SplitSpec> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if length < SplitSpec::MIN_LEN {
        return Err(Error::InvalidArgument(format!(
            "series of length {length} is too short to split (minimum {})",
            SplitSpec::MIN_LEN
        )));
    }
    let boundary = (fraction * length as f64).floor() as usize;
    if boundary == 0 || boundary >= length {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} leaves an empty side for length {length}"
        )));
    }
    Ok(SplitSpec {
        train_fraction: fraction,
        train_range: 0..boundary,
        val_range: boundary..length,
    })
}

/// Time-major view of K aligned channels (IMFs, optionally the residual).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl ChannelMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        ensure_len("channel names", columns.len(), names.len())?;
        if columns.is_empty() {
            return Err(Error::InvalidArgument(
                "channel matrix needs at least one channel".into(),
            ));
        }
        let len = columns[0].len();
        for c in &columns {
            ensure_len("channel length", len, c.len())?;
        }
        Ok(ChannelMatrix { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn num_channels(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.columns[k][t]
    }

    /// Rows restricted to `range`.
    pub fn slice_rows(&self, range: Range<usize>) -> ChannelMatrix {
        ChannelMatrix {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
        }
    }

    /// Drops the channels at the given zero-based indices.
    pub fn without_channels(&self, excluded: &[usize]) -> Result<ChannelMatrix> {
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (k, (n, c)) in self.names.iter().zip(&self.columns).enumerate() {
            if !excluded.contains(&k) {
                names.push(n.clone());
                columns.push(c.clone());
            }
        }
        ChannelMatrix::new(names, columns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    #[default]
    MinMax,
    Standard,
    None,
}

impl std::str::FromStr for ScalingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScalingKind::MinMax),
            "standard" => Ok(ScalingKind::Standard),
            "none" => Ok(ScalingKind::None),
            other => Err(Error::Config(format!("unknown scaling `{other}`"))),
        }
    }
}

impl fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingKind::MinMax => "minmax",
            ScalingKind::Standard => "standard",
            ScalingKind::None => "none",
        })
    }
}

/// Per-channel affine transform `(v - offset) / scale`.
///
/// For min-max scaling the offset is the train minimum and the scale the
/// train range; constant channels get the identity transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalingKind,
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
    pub fit_range: Range<usize>,
}

impl Scaler {
    pub fn num_channels(&self) -> usize {
        self.offsets.len()
    }

    pub fn scale_value(&self, k: usize, v: f64) -> f64 {
        (v - self.offsets[k]) / self.scales[k]
    }

    pub fn unscale_value(&self, k: usize, v: f64) -> f64 {
        v * self.scales[k] + self.offsets[k]
    }

    pub fn transform(&self, matrix: &ChannelMatrix) -> Result<ChannelMatrix> {
        ensure_len("scaler channels", self.num_channels(), matrix.num_channels())?;
        let columns = matrix
            .columns()
            .iter()
            .enumerate()
            .map(|(k, c)| c.iter().map(|&v| self.scale_value(k, v)).collect())
            .collect();
        ChannelMatrix::new(matrix.names().to_vec(), columns)
    }

    pub fn inverse_transform(&self, matrix: &ChannelMatrix) -> Result<ChannelMatrix> {
        ensure_len("scaler channels", self.num_channels(), matrix.num_channels())?;
        let columns = matrix
            .columns()
            .iter()
            .enumerate()
            .map(|(k, c)| c.iter().map(|&v| self.unscale_value(k, v)).collect())
            .collect();
        ChannelMatrix::new(matrix.names().to_vec(), columns)
    }
}

/// Fits per-channel scaling parameters on `train_range` rows only.
pub fn fit_scaler(
    matrix: &ChannelMatrix,
    train_range: Range<usize>,
    kind: ScalingKind,
) -> Result<Scaler> {
    if train_range.is_empty() || train_range.end > matrix.len() {
        return Err(Error::InvalidArgument(format!(
            "scaler fit range {train_range:?} is empty or exceeds {} rows",
            matrix.len()
        )));
    }
    let k = matrix.num_channels();
    let mut offsets = Vec::with_capacity(k);
    let mut scales = Vec::with_capacity(k);
    let mut constant = Vec::with_capacity(k);
    for (name, col) in matrix.names().iter().zip(matrix.columns()) {
        let rows = &col[train_range.clone()];
        let (offset, scale) = match kind {
            ScalingKind::MinMax => {
                let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
            ScalingKind::Standard => {
                let n = rows.len() as f64;
                let mean = rows.iter().sum::<f64>() / n;
                let var = rows.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            ScalingKind::None => (0.0, 1.0),
        };
        if kind != ScalingKind::None && !(scale > 0.0) {
            log::warn!("channel `{name}` is constant on the fit range; using identity scaling");
            offsets.push(0.0);
            scales.push(1.0);
            constant.push(true);
        } else {
            offsets.push(offset);
            scales.push(scale);
            constant.push(false);
        }
    }
    Ok(Scaler {
        kind,
        offsets,
        scales,
        constant,
        fit_range: train_range,
    })
}

/// Sliding windows over K channels with next-step targets from the original
/// series.
///
/// Sample `s` covers rows `t-N+1 ..= t` with `t = range.start + s + N - 1`
/// and targets the original value at `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    window: usize,
    channels: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    targets_scaled: Vec<f64>,
    sample_time_index: Vec<usize>,
}

impl WindowedDataset {
    /// Builds a dataset from pre-flattened windows (`num_samples * window *
    /// channels`, lag-major, oldest lag first).
    pub fn from_parts(
        window: usize,
        channels: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        sample_time_index: Vec<usize>,
    ) -> Result<Self> {
        if window == 0 || channels == 0 {
            return Err(Error::InvalidArgument(
                "window and channel counts must be positive".into(),
            ));
        }
        ensure_len("dataset inputs", targets.len() * window * channels, inputs.len())?;
        ensure_len("dataset time index", targets.len(), sample_time_index.len())?;
        Ok(WindowedDataset {
            window,
            channels,
            inputs,
            targets_scaled: targets.clone(),
            targets,
            sample_time_index,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn input_len(&self) -> usize {
        self.window * self.channels
    }

    pub fn num_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Flattened window for sample `s` (lag-major, oldest lag first).
    pub fn input(&self, s: usize) -> &[f64] {
        let d = self.input_len();
        &self.inputs[s * d..(s + 1) * d]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Targets in original units.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Targets in the space the model is trained in.
    pub fn targets_scaled(&self) -> &[f64] {
        &self.targets_scaled
    }

    pub fn sample_time_index(&self) -> &[usize] {
        &self.sample_time_index
    }

    /// Fills the scaled targets from a one-channel target scaler.
    pub fn with_target_scaler(mut self, scaler: &Scaler) -> Result<Self> {
        ensure_len("target scaler channels", 1, scaler.num_channels())?;
        self.targets_scaled = self.targets.iter().map(|&v| scaler.scale_value(0, v)).collect();
        Ok(self)
    }

    /// Samples `range` (indices into this dataset) as a new dataset.
    pub fn subset(&self, range: Range<usize>) -> WindowedDataset {
        let d = self.input_len();
        WindowedDataset {
            window: self.window,
            channels: self.channels,
            inputs: self.inputs[range.start * d..range.end * d].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            targets_scaled: self.targets_scaled[range.clone()].to_vec(),
            sample_time_index: self.sample_time_index[range].to_vec(),
        }
    }
}

/// Builds one-step-ahead windows of length `window` over `range`.
pub fn make_windows(
    matrix: &ChannelMatrix,
    original: &Series,
    range: Range<usize>,
    window: usize,
) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    ensure_len("matrix vs series length", original.len(), matrix.len())?;
    if range.end > matrix.len() || range.start > range.end {
        return Err(Error::InvalidArgument(format!(
            "range {range:?} exceeds series of length {}",
            matrix.len()
        )));
    }
    if range.len() < window + 1 {
        return Err(Error::InvalidArgument(format!(
            "range of length {} cannot hold a window of {window} plus a target",
            range.len()
        )));
    }
    let k = matrix.num_channels();
    let num_samples = range.len() - window;
    let mut inputs = Vec::with_capacity(num_samples * window * k);
    let mut targets = Vec::with_capacity(num_samples);
    let mut times = Vec::with_capacity(num_samples);
    for s in 0..num_samples {
        let first = range.start + s;
        for t in first..first + window {
            for c in 0..k {
                inputs.push(matrix.get(t, c));
            }
        }
        let target_t = first + window;
        targets.push(original.values()[target_t]);
        times.push(target_t);
    }
    WindowedDataset::from_parts(window, k, inputs, targets, times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(values: Vec<f64>) -> ChannelMatrix {
        ChannelMatrix::new(vec!["c".into()], vec![values]).unwrap()
    }

    #[test]
    fn split_examples() {
        let s = chronological_split(100, 0.75).unwrap();
        assert_eq!(s.train_range, 0..75);
        assert_eq!(s.val_range, 75..100);
        let s = chronological_split(5219, 0.75).unwrap();
        assert_eq!(s.train_range, 0..3914);
        assert_eq!(s.val_range, 3914..5219);
        assert!(chronological_split(10, 1.5).is_err());
        assert!(chronological_split(10, 0.0).is_err());
        assert!(chronological_split(7, 0.5).is_err());
    }

    #[test]
    fn series_rejects_bad_input() {
        assert!(Series::from_values("x", vec![1.0, 2.0]).is_err());
        assert!(Series::from_values("x", vec![1.0, f64::NAN, 2.0]).is_err());
        let ts = vec![Timestamp::Tick(0), Timestamp::Tick(0), Timestamp::Tick(1)];
        assert!(Series::new("x", ts, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn scaler_examples() {
        let m = single(vec![0.0, 1.0, 2.0, 3.0]);
        let s = fit_scaler(&m, 0..4, ScalingKind::MinMax).unwrap();
        assert_eq!(s.offsets, vec![0.0]);
        assert_eq!(s.offsets[0] + s.scales[0], 3.0);

        let m = single(vec![5.0, 5.0, 5.0]);
        let s = fit_scaler(&m, 0..3, ScalingKind::MinMax).unwrap();
        assert!(s.constant[0]);
        assert_eq!(s.scale_value(0, 5.0), 5.0);

        let m = ChannelMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 3.0, 9.0], vec![10.0, 20.0, 99.0]],
        )
        .unwrap();
        let s = fit_scaler(&m, 0..2, ScalingKind::MinMax).unwrap();
        assert_eq!(s.offsets, vec![1.0, 10.0]);
        assert_eq!(s.scales, vec![2.0, 10.0]);
        let scaled = s.transform(&m).unwrap();
        assert!(scaled.get(2, 0) > 1.0 && scaled.get(2, 1) > 1.0);

        assert!(fit_scaler(&m, 1..1, ScalingKind::MinMax).is_err());
    }

    #[test]
    fn window_examples() {
        let series = Series::from_values("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = single(series.values().to_vec());
        let d = make_windows(&m, &series, 0..4, 2).unwrap();
        assert_eq!(d.num_samples(), 2);
        assert_eq!(d.input(0), &[1.0, 2.0]);
        assert_eq!(d.input(1), &[2.0, 3.0]);
        assert_eq!(d.targets(), &[3.0, 4.0]);

        let d = make_windows(&m, &series, 0..4, 3).unwrap();
        assert_eq!(d.input(0), &[1.0, 2.0, 3.0]);
        assert_eq!(d.targets(), &[4.0]);

        assert!(make_windows(&m, &series, 0..4, 5).is_err());
        assert!(make_windows(&m, &series, 0..4, 4).is_err());
    }

    proptest! {
        #[test]
        fn scaler_round_trip(values in prop::collection::vec(-1e6f64..1e6, 4..40), split in 0.2f64..0.9) {
            let n = values.len();
            let other: Vec<f64> = values.iter().map(|v| v * 0.5 - 3.0).collect();
            let m = ChannelMatrix::new(vec!["a".into(), "b".into()], vec![values, other]).unwrap();
            let train = 0..((n as f64 * split) as usize).max(1);
            for kind in [ScalingKind::MinMax, ScalingKind::Standard, ScalingKind::None] {
                let s = fit_scaler(&m, train.clone(), kind).unwrap();
                let back = s.inverse_transform(&s.transform(&m).unwrap()).unwrap();
                for k in 0..2 {
                    for (a, b) in m.channel(k).iter().zip(back.channel(k)) {
                        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                    }
                }
                if kind == ScalingKind::MinMax {
                    let scaled = s.transform(&m).unwrap();
                    for k in 0..2 {
                        for &v in &scaled.channel(k)[train.clone()] {
                            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v) || s.constant[k]);
                        }
                    }
                }
            }
        }

        #[test]
        fn scaler_ignores_validation_rows(values in prop::collection::vec(-1e3f64..1e3, 10..50)) {
            let split = chronological_split(values.len(), 0.75).unwrap();
            let full = single(values.clone());
            let train_only = single(values[split.train_range.clone()].to_vec());
            let a = fit_scaler(&full, split.train_range.clone(), ScalingKind::MinMax).unwrap();
            let b = fit_scaler(&train_only, split.train_range.clone(), ScalingKind::MinMax).unwrap();
            prop_assert_eq!(a.offsets[0].to_bits(), b.offsets[0].to_bits());
            prop_assert_eq!(a.scales[0].to_bits(), b.scales[0].to_bits());
        }

        #[test]
        fn split_is_contiguous(len in 8usize..10_000, frac in 0.05f64..0.95) {
            if let Ok(s) = chronological_split(len, frac) {
                prop_assert_eq!(s.train_range.start, 0);
                prop_assert_eq!(s.train_range.end, s.val_range.start);
                prop_assert_eq!(s.val_range.end, len);
                prop_assert_eq!(s.train_range.len(), (frac * len as f64).floor() as usize);
                prop_assert_eq!(chronological_split(len, frac).unwrap(), s);
            }
        }

        #[test]
        fn windows_align_with_targets(values in prop::collection::vec(-10f64..10.0, 6..60), n in 1usize..5) {
            let series = Series::from_values("x", values.clone()).unwrap();
            let m = single(values.clone());
            let start = 1.min(values.len() - n - 1);
            let d = make_windows(&m, &series, start..values.len(), n).unwrap();
            prop_assert_eq!(d.num_samples(), values.len() - start - n);
            for s in 0..d.num_samples() {
                let t = d.sample_time_index()[s];
                prop_assert_eq!(series.values()[t].to_bits(), d.targets()[s].to_bits());
                prop_assert_eq!(d.input(s)[n - 1].to_bits(), values[t - 1].to_bits());
            }
        }
    }
}
