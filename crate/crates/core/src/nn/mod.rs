//! Dense MLP and single-layer LSTM forecasters trained with Adam.
//!
//! Parameters live in one flat vector per model so that the optimizer,
//! gradient checks and checkpoints all see the same layout.

mod adam;
mod lstm;
mod mlp;
mod train;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use lstm::{LstmFactors, LstmModel, LstmTrace, LSTM_GATES};
pub use mlp::MlpModel;
pub use train::{backward, mse, predict_scaled, predict_series, train, TrainConfig, TrainHistory};

/// Gate block indices inside the LSTM's `4U` pre-activation vector.
pub(crate) mod gate {
    pub(crate) use super::lstm::{F, G, I, O};
}

use crate::error::{ensure_len, Error, Result};
use crate::seed::{rng_for, INIT};

/// Elementwise nonlinearities used by the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Tanh,
    Logistic,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Logistic => logistic(x),
            Nonlinearity::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Nonlinearity::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Nonlinearity::Identity => 1.0,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A one-step forecaster over a flattened `window × channels` input
/// (lag-major, oldest lag first).
pub trait Forecaster {
    fn window(&self) -> usize;
    fn channels(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Output for one window. Callers must pass `input_len()` values.
    fn forward_unchecked(&self, x: &[f64]) -> f64;

    /// Adds `upstream · ∂output/∂params` into `grad`.
    fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut [f64]);

    fn input_len(&self) -> usize {
        self.window() * self.channels()
    }

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn forward(&self, x: &[f64]) -> Result<f64> {
        ensure_len("forecaster input", self.input_len(), x.len())?;
        Ok(self.forward_unchecked(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Lstm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForecastModel {
    Mlp(MlpModel),
    Lstm(LstmModel),
}

impl ForecastModel {
    /// Freshly initialized model drawing from the `init` stream of `seed`.
    ///
    /// `width` is the hidden size of an MLP or the unit count of an LSTM.
    pub fn init(kind: ModelKind, window: usize, channels: usize, width: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, INIT);
        Ok(match kind {
            ModelKind::Mlp => {
                ForecastModel::Mlp(MlpModel::glorot(window, channels, width, Nonlinearity::Tanh, &mut rng)?)
            }
            ModelKind::Lstm => ForecastModel::Lstm(LstmModel::glorot(window, channels, width, &mut rng)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ForecastModel::Mlp(_) => ModelKind::Mlp,
            ForecastModel::Lstm(_) => ModelKind::Lstm,
        }
    }
}

impl Forecaster for ForecastModel {
    fn window(&self) -> usize {
        match self {
            ForecastModel::Mlp(m) => m.window(),
            ForecastModel::Lstm(m) => m.window(),
        }
    }

    fn channels(&self) -> usize {
        match self {
            ForecastModel::Mlp(m) => m.channels(),
            ForecastModel::Lstm(m) => m.channels(),
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            ForecastModel::Mlp(m) => m.params(),
            ForecastModel::Lstm(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            ForecastModel::Mlp(m) => m.params_mut(),
            ForecastModel::Lstm(m) => m.params_mut(),
        }
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ForecastModel::Mlp(m) => m.forward_unchecked(x),
            ForecastModel::Lstm(m) => m.forward_unchecked(x),
        }
    }

    fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        match self {
            ForecastModel::Mlp(m) => m.accumulate_gradient(x, upstream, grad),
            ForecastModel::Lstm(m) => m.accumulate_gradient(x, upstream, grad),
        }
    }
}

/// Fills `out` with Glorot-uniform draws for a `fan_in × fan_out` matrix.
pub(crate) fn glorot_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in out {
        *w = rng.random_range(-limit..limit);
    }
}
