//! Empirical mode decomposition: envelopes, sifting and full decomposition
//! into intrinsic mode functions plus a residual.

mod extrema;
mod spline;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use extrema::{count_zero_crossings, find_extrema, ExtremaSet};
pub use spline::{solve_tridiagonal, NaturalCubicSpline};

use crate::error::{Error, Result};
use crate::series::{ChannelMatrix, Series};

/// How envelopes are continued past the outermost extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Reflect the two outermost extrema about each end sample.
    #[default]
    Mirror,
    /// Pin the envelope at each end sample to the nearest extremum value.
    Clamp,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mirror" => Ok(BoundaryPolicy::Mirror),
            "clamp" => Ok(BoundaryPolicy::Clamp),
            other => Err(Error::Config(format!("unknown boundary policy `{other}`"))),
        }
    }
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryPolicy::Mirror => "mirror",
            BoundaryPolicy::Clamp => "clamp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftConfig {
    pub sd_threshold: f64,
    pub max_sift_iterations: usize,
    pub max_imfs: usize,
    pub boundary_policy: BoundaryPolicy,
    /// Envelope-mean tolerance as a fraction of the candidate's RMS.
    pub envelope_tolerance: f64,
}

impl Default for SiftConfig {
    fn default() -> Self {
        SiftConfig {
            sd_threshold: 0.2,
            max_sift_iterations: 100,
            max_imfs: 16,
            boundary_policy: BoundaryPolicy::Mirror,
            envelope_tolerance: 0.05,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_threshold > 0.0) {
            return Err(Error::Config("sd_threshold must be positive".into()));
        }
        if self.max_sift_iterations == 0 || self.max_imfs == 0 {
            return Err(Error::Config(
                "sifting iteration and IMF caps must be at least 1".into(),
            ));
        }
        if !(self.envelope_tolerance > 0.0) {
            return Err(Error::Config("envelope_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Interpolates a natural cubic spline through `values` at `knots` and
/// evaluates it at every sample index.
///
/// Knots already touching an end of the signal suppress the boundary
/// extension on that side.
pub fn cubic_envelope(
    values: &[f64],
    knots: &[usize],
    policy: BoundaryPolicy,
) -> Result<Vec<f64>> {
    let n = values.len();
    if knots.is_empty() {
        return Err(Error::TooFewKnots(0));
    }
    let last = n - 1;
    let mut xs = Vec::with_capacity(knots.len() + 4);
    let mut ys = Vec::with_capacity(knots.len() + 4);
    if knots[0] != 0 {
        match policy {
            BoundaryPolicy::Mirror => {
                for &k in knots.iter().take(2).rev() {
                    xs.push(-(k as f64));
                    ys.push(values[k]);
                }
            }
            BoundaryPolicy::Clamp => {
                xs.push(0.0);
                ys.push(values[knots[0]]);
            }
        }
    }
    for &k in knots {
        xs.push(k as f64);
        ys.push(values[k]);
    }
    let tail = knots[knots.len() - 1];
    if tail != last {
        match policy {
            BoundaryPolicy::Mirror => {
                for &k in knots.iter().rev().take(2) {
                    xs.push((2 * last - k) as f64);
                    ys.push(values[k]);
                }
            }
            BoundaryPolicy::Clamp => {
                xs.push(last as f64);
                ys.push(values[tail]);
            }
        }
    }
    let spline = NaturalCubicSpline::new(xs, ys)?;
    Ok((0..n).map(|i| spline.eval(i as f64)).collect())
}

/// Upper and lower envelope mean, or `None` when either envelope is undefined.
fn envelope_mean(values: &[f64], ext: &ExtremaSet, policy: BoundaryPolicy) -> Option<Vec<f64>> {
    if ext.maxima.is_empty() || ext.minima.is_empty() {
        return None;
    }
    let upper = cubic_envelope(values, &ext.maxima, policy).ok()?;
    let lower = cubic_envelope(values, &ext.minima, policy).ok()?;
    Some(upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImfCheck {
    pub passes: bool,
    pub extrema_count: usize,
    pub crossing_count: usize,
    /// `max |(upper + lower) / 2|`; infinite when an envelope is undefined.
    pub max_envelope_mean: f64,
    pub tolerance: f64,
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn evaluate_imf(
    values: &[f64],
    ext: &ExtremaSet,
    mean: Option<&[f64]>,
    tolerance_fraction: f64,
) -> ImfCheck {
    let extrema_count = ext.count();
    let crossing_count = count_zero_crossings(values);
    let max_envelope_mean = mean
        .map(|m| m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
        .unwrap_or(f64::INFINITY);
    let tolerance = tolerance_fraction * rms(values);
    let counts_ok = extrema_count.abs_diff(crossing_count) <= 1;
    ImfCheck {
        passes: counts_ok && max_envelope_mean <= tolerance,
        extrema_count,
        crossing_count,
        max_envelope_mean,
        tolerance,
    }
}

/// Checks both IMF conditions with default tolerance and mirror boundaries.
pub fn check_imf_conditions(values: &[f64]) -> Result<ImfCheck> {
    let cfg = SiftConfig::default();
    check_imf_conditions_with(values, cfg.boundary_policy, cfg.envelope_tolerance)
}

pub fn check_imf_conditions_with(
    values: &[f64],
    policy: BoundaryPolicy,
    tolerance_fraction: f64,
) -> Result<ImfCheck> {
    let ext = find_extrema(values)?;
    let mean = envelope_mean(values, &ext, policy);
    Ok(evaluate_imf(values, &ext, mean.as_deref(), tolerance_fraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiftStop {
    /// Candidate satisfied both IMF conditions.
    ImfConditions,
    /// Successive candidates differed by less than the SD threshold.
    SdCriterion,
    /// Iteration cap reached; the candidate is best-effort.
    IterationCap,
    /// Candidate lost its envelopes mid-sift; best-effort.
    ExtremaExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftResult {
    pub imf: Vec<f64>,
    pub iterations: usize,
    pub stop: SiftStop,
}

impl SiftResult {
    pub fn converged(&self) -> bool {
        matches!(self.stop, SiftStop::ImfConditions | SiftStop::SdCriterion)
    }
}

/// Extracts one IMF from `input` by repeated envelope-mean subtraction.
pub fn sift(input: &[f64], config: &SiftConfig) -> Result<SiftResult> {
    config.validate()?;
    let found = find_extrema(input)?.count();
    if found < 3 {
        return Err(Error::InsufficientExtrema { found });
    }
    let mut h = input.to_vec();
    for iteration in 0..config.max_sift_iterations {
        let ext = find_extrema(&h)?;
        let Some(mean) = (ext.count() >= 3)
            .then(|| envelope_mean(&h, &ext, config.boundary_policy))
            .flatten()
        else {
            return Ok(SiftResult {
                imf: h,
                iterations: iteration,
                stop: SiftStop::ExtremaExhausted,
            });
        };
        if evaluate_imf(&h, &ext, Some(&mean), config.envelope_tolerance).passes {
            return Ok(SiftResult {
                imf: h,
                iterations: iteration,
                stop: SiftStop::ImfConditions,
            });
        }
        let scale = h.iter().fold(0.0f64, |a, v| a.max(v * v));
        let eps = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut sd = 0.0;
        for (v, m) in h.iter_mut().zip(&mean) {
            sd += m * m / (*v * *v + eps);
            *v -= m;
        }
        if sd < config.sd_threshold {
            return Ok(SiftResult {
                imf: h,
                iterations: iteration + 1,
                stop: SiftStop::SdCriterion,
            });
        }
    }
    Ok(SiftResult {
        imf: h,
        iterations: config.max_sift_iterations,
        stop: SiftStop::IterationCap,
    })
}

/// Ordered IMFs (highest frequency first) and the final residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub source_length: usize,
    pub sift_iterations: Vec<usize>,
    pub sift_stops: Vec<SiftStop>,
    pub config: SiftConfig,
}

impl Decomposition {
    pub fn num_imfs(&self) -> usize {
        self.imfs.len()
    }

    /// Pointwise sum of every IMF and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }

    /// Channel labels in column order: `imf_1 … imf_K`, then `residual`.
    pub fn channel_names(&self, include_residual: bool) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.imfs.len()).map(|k| format!("imf_{k}")).collect();
        if include_residual {
            names.push("residual".into());
        }
        names
    }

    /// IMFs as channels, with the residual appended as the last channel when
    /// requested.
    pub fn channel_matrix(&self, include_residual: bool) -> Result<ChannelMatrix> {
        let mut columns = self.imfs.clone();
        if include_residual {
            columns.push(self.residual.clone());
        }
        ChannelMatrix::new(self.channel_names(include_residual), columns)
    }
}

pub fn decompose(series: &Series, config: &SiftConfig) -> Result<Decomposition> {
    decompose_values(series.values(), config)
}

pub fn decompose_values(values: &[f64], config: &SiftConfig) -> Result<Decomposition> {
    config.validate()?;
    let mut residual = values.to_vec();
    let mut imfs = Vec::new();
    let mut sift_iterations = Vec::new();
    let mut sift_stops = Vec::new();
    while imfs.len() < config.max_imfs {
        if residual.len() < 3 || find_extrema(&residual)?.count() < 3 {
            break;
        }
        let result = sift(&residual, config)?;
        if !result.converged() {
            log::debug!(
                "IMF {} stopped without converging ({:?} after {} iterations)",
                imfs.len() + 1,
                result.stop,
                result.iterations
            );
        }
        for (r, v) in residual.iter_mut().zip(&result.imf) {
            *r -= v;
        }
        imfs.push(result.imf);
        sift_iterations.push(result.iterations);
        sift_stops.push(result.stop);
    }
    Ok(Decomposition {
        imfs,
        residual,
        source_length: values.len(),
        sift_iterations,
        sift_stops,
        config: config.clone(),
    })
}
