use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Forecaster, Nonlinearity};
use crate::error::{ensure_len, Error, Result};

/// One hidden layer feed-forward network:
/// `ŷ = W2ᵀ·act(W1ᵀx + b1) + b2`.
///
/// Parameter layout: `W1` (input-major, `input_len × hidden`), `b1`, `W2`,
/// `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    window: usize,
    channels: usize,
    hidden: usize,
    activation: Nonlinearity,
    params: Vec<f64>,
}

impl MlpModel {
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn zeros(window: usize, channels: usize, hidden: usize, activation: Nonlinearity) -> Result<Self> {
        if window == 0 || channels == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(
                "MLP dimensions must be positive".into(),
            ));
        }
        let d = window * channels;
        Ok(MlpModel {
            window,
            channels,
            hidden,
            activation,
            params: vec![0.0; d * hidden + 2 * hidden + 1],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(
        window: usize,
        channels: usize,
        hidden: usize,
        activation: Nonlinearity,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(window, channels, hidden, activation)?;
        let d = m.input_len();
        glorot_uniform(rng, d, hidden, m.w1_mut());
        glorot_uniform(rng, hidden, 1, m.w2_mut());
        Ok(m)
    }

    pub fn from_parts(
        window: usize,
        channels: usize,
        activation: Nonlinearity,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: f64,
    ) -> Result<Self> {
        let hidden = b1.len();
        let mut m = Self::zeros(window, channels, hidden, activation)?;
        ensure_len("MLP W1", m.input_len() * hidden, w1.len())?;
        ensure_len("MLP W2", hidden, w2.len())?;
        m.w1_mut().copy_from_slice(w1);
        m.b1_mut().copy_from_slice(b1);
        m.w2_mut().copy_from_slice(w2);
        *m.b2_mut() = b2;
        Ok(m)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Nonlinearity {
        self.activation
    }

    fn split(&self) -> (usize, usize, usize) {
        let w1 = self.input_len() * self.hidden;
        (w1, w1 + self.hidden, w1 + 2 * self.hidden)
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.split().0]
    }

    pub fn b1(&self) -> &[f64] {
        let (a, b, _) = self.split();
        &self.params[a..b]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, b, c) = self.split();
        &self.params[b..c]
    }

    pub fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let a = self.split().0;
        &mut self.params[..a]
    }

    pub fn b1_mut(&mut self) -> &mut [f64] {
        let (a, b, _) = self.split();
        &mut self.params[a..b]
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        let (_, b, c) = self.split();
        &mut self.params[b..c]
    }

    pub fn b2_mut(&mut self) -> &mut f64 {
        let last = self.params.len() - 1;
        &mut self.params[last]
    }

    /// Hidden pre-activations and activations for one input.
    pub fn hidden_trace(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let mut z = self.b1().to_vec();
        let w1 = self.w1();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w1[i * h..(i + 1) * h];
            for (zj, w) in z.iter_mut().zip(row) {
                *zj += xi * w;
            }
        }
        let a = z.iter().map(|&v| self.activation.apply(v)).collect();
        (z, a)
    }
}

impl Forecaster for MlpModel {
    fn window(&self) -> usize {
        self.window
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let (_, a) = self.hidden_trace(x);
        self.b2() + a.iter().zip(self.w2()).map(|(a, w)| a * w).sum::<f64>()
    }

    fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        let h = self.hidden;
        let (z, a) = self.hidden_trace(x);
        let (o1, o2, o3) = self.split();
        let w2 = self.w2();
        let dz: Vec<f64> = (0..h)
            .map(|j| upstream * w2[j] * self.activation.derivative(z[j]))
            .collect();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut grad[i * h..(i + 1) * h];
            for (g, d) in row.iter_mut().zip(&dz) {
                *g += xi * d;
            }
        }
        for j in 0..h {
            grad[o1 + j] += dz[j];
            grad[o2 + j] += upstream * a[j];
        }
        grad[o3] += upstream;
    }
}
