use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, logistic, Forecaster};
use crate::error::{ensure_len, Error, Result};

/// Gate blocks in parameter order: input, forget, output, candidate.
pub const LSTM_GATES: usize = 4;
pub(crate) const I: usize = 0;
pub(crate) const F: usize = 1;
pub(crate) const O: usize = 2;
pub(crate) const G: usize = 3;

/// Single-layer LSTM with a linear head on the last hidden state.
///
/// Parameter layout: input kernel `channels × 4U`, recurrent kernel
/// `U × 4U`, gate bias `4U`, head weights `U`, head bias. Each `4U` row is
/// split into `[i | f | o | g]` blocks of `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    window: usize,
    channels: usize,
    units: usize,
    params: Vec<f64>,
}

/// Every intermediate of one forward pass. `h[0]` and `c[0]` are the zero
/// initial state; `h[t + 1]`, `c[t + 1]` follow step `t`.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub gates: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub output: f64,
}

/// Local multipliers of one time step, as consumed by the backward sweep.
///
/// With derivatives evaluated at a single trace this yields ordinary
/// backpropagation through time; attribution fills the same slots with
/// secant and product-split multipliers.
#[derive(Debug, Clone)]
pub struct LstmFactors {
    /// `∂gate / ∂pre-activation`, `4U`.
    pub gate_slope: Vec<f64>,
    /// `∂tanh(c) / ∂c`.
    pub tanh_c_slope: Vec<f64>,
    /// `∂c / ∂f`.
    pub by_forget: Vec<f64>,
    /// `∂c / ∂c_prev`.
    pub by_prev_cell: Vec<f64>,
    /// `∂c / ∂i`.
    pub by_input: Vec<f64>,
    /// `∂c / ∂g`.
    pub by_candidate: Vec<f64>,
    /// `∂h / ∂o`.
    pub by_output: Vec<f64>,
    /// `∂h / ∂tanh(c)`.
    pub by_tanh_c: Vec<f64>,
}

impl LstmModel {
    pub const DEFAULT_UNITS: usize = 10;

    pub fn zeros(window: usize, channels: usize, units: usize) -> Result<Self> {
        if window == 0 || channels == 0 || units == 0 {
            return Err(Error::InvalidArgument(
                "LSTM dimensions must be positive".into(),
            ));
        }
        let g = LSTM_GATES * units;
        Ok(LstmModel {
            window,
            channels,
            units,
            params: vec![0.0; channels * g + units * g + g + units + 1],
        })
    }

    /// Glorot-uniform kernels, zero biases except the forget gate at 1.
    pub fn glorot<R: Rng>(window: usize, channels: usize, units: usize, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(window, channels, units)?;
        let g = LSTM_GATES * units;
        glorot_uniform(rng, channels, g, m.input_kernel_mut());
        glorot_uniform(rng, units, g, m.recurrent_kernel_mut());
        glorot_uniform(rng, units, 1, m.head_mut());
        m.bias_mut()[F * units..(F + 1) * units].fill(1.0);
        Ok(m)
    }

    pub fn units(&self) -> usize {
        self.units
    }

    fn offsets(&self) -> [usize; 5] {
        let g = LSTM_GATES * self.units;
        let wx = 0;
        let wh = wx + self.channels * g;
        let b = wh + self.units * g;
        let head = b + g;
        let head_bias = head + self.units;
        [wx, wh, b, head, head_bias]
    }

    pub fn input_kernel(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[0]..o[1]]
    }

    pub fn recurrent_kernel(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[1]..o[2]]
    }

    pub fn bias(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[2]..o[3]]
    }

    pub fn head(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[3]..o[4]]
    }

    pub fn head_bias(&self) -> f64 {
        self.params[self.offsets()[4]]
    }

    pub fn input_kernel_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[0]..o[1]]
    }

    pub fn recurrent_kernel_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[1]..o[2]]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[2]..o[3]]
    }

    pub fn head_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[3]..o[4]]
    }

    pub fn head_bias_mut(&mut self) -> &mut f64 {
        let o = self.offsets()[4];
        &mut self.params[o]
    }

    fn pre_activation(&self, x_t: &[f64], h: &[f64]) -> Vec<f64> {
        let g = LSTM_GATES * self.units;
        let mut z = self.bias().to_vec();
        let wx = self.input_kernel();
        for (k, &xk) in x_t.iter().enumerate() {
            for (zq, w) in z.iter_mut().zip(&wx[k * g..(k + 1) * g]) {
                *zq += xk * w;
            }
        }
        let wh = self.recurrent_kernel();
        for (j, &hj) in h.iter().enumerate() {
            for (zq, w) in z.iter_mut().zip(&wh[j * g..(j + 1) * g]) {
                *zq += hj * w;
            }
        }
        z
    }

    fn activate(&self, z: &[f64]) -> Vec<f64> {
        let u = self.units;
        z.iter()
            .enumerate()
            .map(|(q, &v)| if q / u == G { v.tanh() } else { logistic(v) })
            .collect()
    }

    /// One cell update `(h, c) → (h', c')`.
    pub fn step(&self, x_t: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        ensure_len("LSTM step input", self.channels, x_t.len())?;
        ensure_len("LSTM hidden state", self.units, h.len())?;
        ensure_len("LSTM cell state", self.units, c.len())?;
        let gates = self.activate(&self.pre_activation(x_t, h));
        let u = self.units;
        let c_next: Vec<f64> = (0..u)
            .map(|j| gates[F * u + j] * c[j] + gates[I * u + j] * gates[G * u + j])
            .collect();
        let h_next = (0..u).map(|j| gates[O * u + j] * c_next[j].tanh()).collect();
        Ok((h_next, c_next))
    }

    /// Full forward pass from a zero state, oldest lag first.
    pub fn trace(&self, x: &[f64]) -> LstmTrace {
        let u = self.units;
        let k = self.channels;
        let mut tr = LstmTrace {
            pre_activations: Vec::with_capacity(self.window),
            gates: Vec::with_capacity(self.window),
            h: vec![vec![0.0; u]],
            c: vec![vec![0.0; u]],
            tanh_c: Vec::with_capacity(self.window),
            output: 0.0,
        };
        for t in 0..self.window {
            let z = self.pre_activation(&x[t * k..(t + 1) * k], &tr.h[t]);
            let gates = self.activate(&z);
            let c_prev = &tr.c[t];
            let c: Vec<f64> = (0..u)
                .map(|j| gates[F * u + j] * c_prev[j] + gates[I * u + j] * gates[G * u + j])
                .collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h = (0..u).map(|j| gates[O * u + j] * tc[j]).collect();
            tr.pre_activations.push(z);
            tr.gates.push(gates);
            tr.c.push(c);
            tr.tanh_c.push(tc);
            tr.h.push(h);
        }
        let last = &tr.h[self.window];
        tr.output = self.head_bias() + last.iter().zip(self.head()).map(|(h, w)| h * w).sum::<f64>();
        tr
    }

    /// Derivative factors at a single trace.
    pub fn gradient_factors(&self, tr: &LstmTrace) -> Vec<LstmFactors> {
        let u = self.units;
        (0..self.window)
            .map(|t| {
                let gates = &tr.gates[t];
                let gate_slope = gates
                    .iter()
                    .enumerate()
                    .map(|(q, &a)| if q / u == G { 1.0 - a * a } else { a * (1.0 - a) })
                    .collect();
                LstmFactors {
                    gate_slope,
                    tanh_c_slope: tr.tanh_c[t].iter().map(|v| 1.0 - v * v).collect(),
                    by_forget: tr.c[t].clone(),
                    by_prev_cell: gates[F * u..(F + 1) * u].to_vec(),
                    by_input: gates[G * u..(G + 1) * u].to_vec(),
                    by_candidate: gates[I * u..(I + 1) * u].to_vec(),
                    by_output: tr.tanh_c[t].clone(),
                    by_tanh_c: gates[O * u..(O + 1) * u].to_vec(),
                }
            })
            .collect()
    }

    /// Reverse sweep through time.
    ///
    /// Adds `upstream ×` the total multiplier of every parameter into `grad`
    /// and of every input into `dx`, using the supplied per-step factors.
    /// `tr` supplies the inputs of the linear maps for the parameter terms.
    pub fn backprop(
        &self,
        x: &[f64],
        tr: &LstmTrace,
        factors: &[LstmFactors],
        upstream: f64,
        mut grad: Option<&mut [f64]>,
        mut dx: Option<&mut [f64]>,
    ) {
        let u = self.units;
        let k = self.channels;
        let g = LSTM_GATES * u;
        let [o_wx, o_wh, o_b, o_head, o_head_bias] = self.offsets();
        let mut dh: Vec<f64> = self.head().iter().map(|w| w * upstream).collect();
        let mut dc = vec![0.0; u];
        if let Some(grad) = grad.as_deref_mut() {
            for (j, hj) in tr.h[self.window].iter().enumerate() {
                grad[o_head + j] += upstream * hj;
            }
            grad[o_head_bias] += upstream;
        }
        let wx = self.input_kernel();
        let wh = self.recurrent_kernel();
        let mut dz = vec![0.0; g];
        for t in (0..self.window).rev() {
            let f = &factors[t];
            for j in 0..u {
                let d_out = dh[j] * f.by_output[j];
                let d_cell = dc[j] + dh[j] * f.by_tanh_c[j] * f.tanh_c_slope[j];
                dz[I * u + j] = d_cell * f.by_input[j] * f.gate_slope[I * u + j];
                dz[F * u + j] = d_cell * f.by_forget[j] * f.gate_slope[F * u + j];
                dz[O * u + j] = d_out * f.gate_slope[O * u + j];
                dz[G * u + j] = d_cell * f.by_candidate[j] * f.gate_slope[G * u + j];
                dc[j] = d_cell * f.by_prev_cell[j];
            }
            let x_t = &x[t * k..(t + 1) * k];
            let h_prev = &tr.h[t];
            if let Some(grad) = grad.as_deref_mut() {
                for (kk, &xk) in x_t.iter().enumerate() {
                    let row = &mut grad[o_wx + kk * g..o_wx + (kk + 1) * g];
                    for (r, d) in row.iter_mut().zip(&dz) {
                        *r += xk * d;
                    }
                }
                for (j, &hj) in h_prev.iter().enumerate() {
                    let row = &mut grad[o_wh + j * g..o_wh + (j + 1) * g];
                    for (r, d) in row.iter_mut().zip(&dz) {
                        *r += hj * d;
                    }
                }
                for (r, d) in grad[o_b..o_b + g].iter_mut().zip(&dz) {
                    *r += d;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                for kk in 0..k {
                    let row = &wx[kk * g..(kk + 1) * g];
                    dx[t * k + kk] += row.iter().zip(&dz).map(|(w, d)| w * d).sum::<f64>();
                }
            }
            for (j, dhj) in dh.iter_mut().enumerate() {
                let row = &wh[j * g..(j + 1) * g];
                *dhj = row.iter().zip(&dz).map(|(w, d)| w * d).sum();
            }
        }
    }
}

impl Forecaster for LstmModel {
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
        self.trace(x).output
    }

    fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        let tr = self.trace(x);
        let factors = self.gradient_factors(&tr);
        self.backprop(x, &tr, &factors, upstream, Some(grad), None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigma(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_model_step() {
        let m = LstmModel::zeros(1, 2, 3).unwrap();
        let (h, c) = m.step(&[0.0, 0.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn forget_bias_carries_cell() {
        let mut m = LstmModel::zeros(1, 1, 2).unwrap();
        m.bias_mut()[2..4].fill(1.0);
        let (h, c) = m.step(&[0.0], &[0.0; 2], &[1.0; 2]).unwrap();
        for j in 0..2 {
            assert!((c[j] - 0.731059).abs() < 1e-6);
            assert!((c[j] - sigma(1.0)).abs() < 1e-15);
            assert!((h[j] - 0.5 * sigma(1.0).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_gates_carry_memory() {
        let mut m = LstmModel::zeros(1, 1, 2).unwrap();
        m.bias_mut()[0..2].fill(-20.0);
        m.bias_mut()[2..4].fill(20.0);
        let c0 = [0.8, -1.3];
        let (_, c) = m.step(&[5.0], &[0.3, -0.2], &c0).unwrap();
        for j in 0..2 {
            assert!((c[j] - c0[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn single_step_window_is_step_plus_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = LstmModel::glorot(1, 2, 3, &mut rng).unwrap();
        *m.head_bias_mut() = 0.25;
        let x = [0.4, -0.9];
        let (h, _) = m.step(&x, &[0.0; 3], &[0.0; 3]).unwrap();
        let expect = 0.25 + h.iter().zip(m.head()).map(|(a, b)| a * b).sum::<f64>();
        assert_eq!(m.forward(&x).unwrap(), expect);
    }

    #[test]
    fn zero_model_returns_head_bias() {
        let mut m = LstmModel::zeros(4, 3, 5).unwrap();
        *m.head_bias_mut() = 2.0;
        assert_eq!(m.forward(&[0.7; 12]).unwrap(), 2.0);
    }

    #[test]
    fn two_step_hand_unrolled() {
        // K = 1, U = 2; weights chosen by hand
        let mut m = LstmModel::zeros(2, 1, 2).unwrap();
        m.input_kernel_mut()
            .copy_from_slice(&[0.5, -0.3, 0.8, 0.1, -0.6, 0.4, 0.9, -0.7]);
        m.recurrent_kernel_mut().copy_from_slice(&[
            0.2, 0.1, -0.4, 0.3, 0.5, -0.2, 0.6, 0.05, //
            -0.1, 0.3, 0.2, -0.5, 0.4, 0.7, -0.3, 0.2,
        ]);
        m.bias_mut()
            .copy_from_slice(&[0.1, -0.1, 1.0, 1.0, 0.0, 0.2, -0.2, 0.3]);
        m.head_mut().copy_from_slice(&[1.5, -0.8]);
        *m.head_bias_mut() = 0.05;
        let xs = [0.6, -1.1];

        let wx = [[0.5, -0.3], [0.8, 0.1], [-0.6, 0.4], [0.9, -0.7]];
        let wh0 = [[0.2, 0.1], [-0.4, 0.3], [0.5, -0.2], [0.6, 0.05]];
        let wh1 = [[-0.1, 0.3], [0.2, -0.5], [0.4, 0.7], [-0.3, 0.2]];
        let b = [[0.1, -0.1], [1.0, 1.0], [0.0, 0.2], [-0.2, 0.3]];
        let mut h = [0.0f64; 2];
        let mut c = [0.0f64; 2];
        for &x in &xs {
            let mut nh = [0.0; 2];
            let mut nc = [0.0; 2];
            for j in 0..2 {
                let pre = |q: usize| wx[q][j] * x + wh0[q][j] * h[0] + wh1[q][j] * h[1] + b[q][j];
                let i = sigma(pre(0));
                let f = sigma(pre(1));
                let o = sigma(pre(2));
                let g = pre(3).tanh();
                nc[j] = f * c[j] + i * g;
                nh[j] = o * nc[j].tanh();
            }
            h = nh;
            c = nc;
        }
        let expected = 0.05 + 1.5 * h[0] - 0.8 * h[1];
        assert!((m.forward(&xs).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn predictions_do_not_depend_on_call_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = LstmModel::glorot(3, 2, 4, &mut rng).unwrap();
        let a = [0.1, 0.2, 0.3, -0.4, 0.5, 0.6];
        let b = [0.9, -0.8, 0.7, 0.6, -0.5, 0.4];
        let first = m.forward(&a).unwrap();
        m.forward(&b).unwrap();
        assert_eq!(m.forward(&a).unwrap().to_bits(), first.to_bits());
    }

    #[test]
    fn glorot_sets_forget_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = LstmModel::glorot(2, 3, 4, &mut rng).unwrap();
        assert_eq!(&m.bias()[4..8], &[1.0; 4]);
        assert!(m.bias()[..4].iter().chain(&m.bias()[8..]).all(|&b| b == 0.0));
    }
}
