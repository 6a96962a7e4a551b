//! DeepSHAP attribution of forecasts to input channels, with an exact
//! coalition-enumeration Shapley oracle for verification.

mod deepshap;
mod report;
mod shapley;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use deepshap::{
    deeplift, deepshap, explain_dataset, lstm_deeplift_factors, mlp_multipliers, MultiplierLayer,
    MultiplierStack,
};
pub use report::{aggregate_importance, shannon_entropy, AttributionReport, ChannelScore};
pub use shapley::{exact_shapley, exact_shapley_model, MAX_PLAYERS};

use crate::error::{ensure_len, Error, Result};
use crate::nn::Nonlinearity;
use crate::seed::{rng_for, BASELINES};
use crate::series::WindowedDataset;

/// Below this input difference the rescale rule falls back to the
/// derivative at the midpoint.
pub const RESCALE_EPSILON: f64 = 1e-7;

/// DeepLIFT rescale multiplier `Δout / Δin` of an elementwise nonlinearity.
pub fn rescale_multiplier(nl: Nonlinearity, x_in: f64, ref_in: f64, x_out: f64, ref_out: f64) -> f64 {
    let delta = x_in - ref_in;
    if delta.abs() > RESCALE_EPSILON {
        (x_out - ref_out) / delta
    } else {
        nl.derivative(0.5 * (x_in + ref_in))
    }
}

/// Shapley split of `Δ(u·v)` between the two factors of a product.
///
/// Returns `(φ_u, φ_v)` with `φ_u + φ_v = u·v − u_ref·v_ref`.
pub fn product_split(u: f64, u_ref: f64, v: f64, v_ref: f64) -> (f64, f64) {
    (
        (u - u_ref) * (v + v_ref) * 0.5,
        (v - v_ref) * (u + u_ref) * 0.5,
    )
}

/// Reference windows standing in for the expected input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSet {
    pub window: usize,
    pub channels: usize,
    pub seed: u64,
    /// Sample indices into the dataset the windows came from.
    pub source_samples: Vec<usize>,
    windows: Vec<f64>,
}

impl BaselineSet {
    pub const DEFAULT_SIZE: usize = 100;

    /// Draws up to `size` distinct windows from `train` without replacement.
    pub fn sample(train: &WindowedDataset, size: usize, seed: u64) -> Result<Self> {
        if size == 0 || train.is_empty() {
            return Err(Error::InvalidArgument(
                "baseline set needs at least one window".into(),
            ));
        }
        let n = train.num_samples();
        let mut rng = rng_for(seed, BASELINES);
        let mut picks = index::sample(&mut rng, n, size.min(n)).into_vec();
        picks.sort_unstable();
        let mut windows = Vec::with_capacity(picks.len() * train.input_len());
        for &s in &picks {
            windows.extend_from_slice(train.input(s));
        }
        Ok(BaselineSet {
            window: train.window(),
            channels: train.channels(),
            seed,
            source_samples: picks,
            windows,
        })
    }

    pub fn from_windows(window: usize, channels: usize, windows: Vec<Vec<f64>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidArgument(
                "baseline set needs at least one window".into(),
            ));
        }
        let mut flat = Vec::with_capacity(windows.len() * window * channels);
        for w in &windows {
            ensure_len("baseline window", window * channels, w.len())?;
            flat.extend_from_slice(w);
        }
        Ok(BaselineSet {
            window,
            channels,
            seed: 0,
            source_samples: (0..windows.len()).collect(),
            windows: flat,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len() / (self.window * self.channels)
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn get(&self, b: usize) -> &[f64] {
        let d = self.window * self.channels;
        &self.windows[b * d..(b + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.windows.chunks(self.window * self.channels)
    }
}

/// Per-lag, per-channel attributions of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub window: usize,
    pub channels: usize,
    /// Lag-major `window × channels`, oldest lag first.
    pub phi: Vec<f64>,
    pub prediction: f64,
    pub baseline_mean_prediction: f64,
}

impl AttributionMatrix {
    pub fn get(&self, lag: usize, channel: usize) -> f64 {
        self.phi[lag * self.channels + channel]
    }

    /// `Σ_lags φ[lag, k]` for every channel.
    pub fn channel_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for row in self.phi.chunks(self.channels) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> AttributionMatrix {
        AttributionMatrix {
            phi: self.phi.iter().map(|v| v * c).collect(),
            prediction: self.prediction * c,
            baseline_mean_prediction: self.baseline_mean_prediction * c,
            ..self.clone()
        }
    }
}
