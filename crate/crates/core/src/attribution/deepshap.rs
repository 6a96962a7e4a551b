use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rescale_multiplier, AttributionMatrix, BaselineSet};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{gate, ForecastModel, Forecaster, LstmFactors, LstmModel, LstmTrace, MlpModel, Nonlinearity, LSTM_GATES};
use crate::series::WindowedDataset;

/// Multipliers and input deltas of one layer, relative to a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierLayer {
    pub name: String,
    pub multipliers: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl MultiplierLayer {
    /// `Σ m·Δ`; equals the output delta at every layer.
    pub fn contribution(&self) -> f64 {
        self.multipliers.iter().zip(&self.deltas).map(|(m, d)| m * d).sum()
    }
}

/// Output-to-input multiplier chain of an MLP for one (input, reference) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierStack {
    /// Ordered output side first: hidden activations, pre-activations, inputs.
    pub layers: Vec<MultiplierLayer>,
    pub output_delta: f64,
}

impl MultiplierStack {
    pub fn input(&self) -> &MultiplierLayer {
        self.layers.last().expect("stack always has an input layer")
    }
}

pub fn mlp_multipliers(model: &MlpModel, x: &[f64], reference: &[f64]) -> Result<MultiplierStack> {
    ensure_len("attribution input", model.input_len(), x.len())?;
    ensure_len("attribution reference", model.input_len(), reference.len())?;
    let h = model.hidden();
    let (z, a) = model.hidden_trace(x);
    let (z_ref, a_ref) = model.hidden_trace(reference);
    if a.iter().chain(&a_ref).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation);
    }
    let w2 = model.w2();
    let m_hidden = w2.to_vec();
    let m_pre: Vec<f64> = (0..h)
        .map(|j| w2[j] * rescale_multiplier(model.activation(), z[j], z_ref[j], a[j], a_ref[j]))
        .collect();
    let w1 = model.w1();
    let m_input: Vec<f64> = (0..model.input_len())
        .map(|i| w1[i * h..(i + 1) * h].iter().zip(&m_pre).map(|(w, m)| w * m).sum())
        .collect();
    let diff = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a - b).collect::<Vec<_>>();
    let output_delta = model.forward_unchecked(x) - model.forward_unchecked(reference);
    Ok(MultiplierStack {
        layers: vec![
            MultiplierLayer {
                name: "hidden".into(),
                multipliers: m_hidden,
                deltas: diff(&a, &a_ref),
            },
            MultiplierLayer {
                name: "pre_activation".into(),
                multipliers: m_pre,
                deltas: diff(&z, &z_ref),
            },
            MultiplierLayer {
                name: "input".into(),
                multipliers: m_input,
                deltas: diff(x, reference),
            },
        ],
        output_delta,
    })
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Secant and product-split factors for every step of an LSTM unrolled on
/// an input and a reference.
///
/// Gate nonlinearities use the rescale rule; the products `f·c_prev`,
/// `i·g` and `o·tanh(c)` use the two-player Shapley split, whose
/// multipliers are the midpoints of the other factor.
pub fn lstm_deeplift_factors(model: &LstmModel, tr: &LstmTrace, tr_ref: &LstmTrace) -> Vec<LstmFactors> {
    let u = model.units();
    let block = |v: &[f64], gate: usize| v[gate * u..(gate + 1) * u].to_vec();
    (0..model.window())
        .map(|t| {
            let (z, zr) = (&tr.pre_activations[t], &tr_ref.pre_activations[t]);
            let (a, ar) = (&tr.gates[t], &tr_ref.gates[t]);
            let gate_slope = (0..LSTM_GATES * u)
                .map(|q| {
                    let nl = if q / u == gate::G { Nonlinearity::Tanh } else { Nonlinearity::Logistic };
                    rescale_multiplier(nl, z[q], zr[q], a[q], ar[q])
                })
                .collect();
            let c = &tr.c[t + 1];
            let cr = &tr_ref.c[t + 1];
            let tc = &tr.tanh_c[t];
            let tcr = &tr_ref.tanh_c[t];
            let tanh_c_slope = (0..u)
                .map(|j| rescale_multiplier(Nonlinearity::Tanh, c[j], cr[j], tc[j], tcr[j]))
                .collect();
            let gate_mid = midpoint(a, ar);
            LstmFactors {
                gate_slope,
                tanh_c_slope,
                by_forget: midpoint(&tr.c[t], &tr_ref.c[t]),
                by_prev_cell: block(&gate_mid, gate::F),
                by_input: block(&gate_mid, gate::G),
                by_candidate: block(&gate_mid, gate::I),
                by_output: midpoint(tc, tcr),
                by_tanh_c: block(&gate_mid, gate::O),
            }
        })
        .collect()
}

/// DeepLIFT attributions of `model(x) − model(reference)` to every input.
pub fn deeplift(model: &ForecastModel, x: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    ensure_len("attribution input", model.input_len(), x.len())?;
    ensure_len("attribution reference", model.input_len(), reference.len())?;
    let multipliers = match model {
        ForecastModel::Mlp(m) => mlp_multipliers(m, x, reference)?.input().multipliers.clone(),
        ForecastModel::Lstm(m) => {
            let tr = m.trace(x);
            let tr_ref = m.trace(reference);
            if !tr.output.is_finite() || !tr_ref.output.is_finite() {
                return Err(Error::NonFiniteActivation);
            }
            let factors = lstm_deeplift_factors(m, &tr, &tr_ref);
            let mut dx = vec![0.0; m.input_len()];
            m.backprop(x, &tr, &factors, 1.0, None, Some(&mut dx));
            dx
        }
    };
    let phi: Vec<f64> = multipliers
        .iter()
        .zip(x.iter().zip(reference))
        .map(|(m, (a, b))| m * (a - b))
        .collect();
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation);
    }
    Ok(phi)
}

/// Averages single-reference DeepLIFT attributions over every baseline.
pub fn deepshap(model: &ForecastModel, x: &[f64], baselines: &BaselineSet) -> Result<AttributionMatrix> {
    ensure_len("baseline window", model.input_len(), baselines.window * baselines.channels)?;
    if baselines.is_empty() {
        return Err(Error::InvalidArgument("no baselines".into()));
    }
    let mut phi = vec![0.0; model.input_len()];
    let mut baseline_sum = 0.0;
    for reference in baselines.iter() {
        for (p, v) in phi.iter_mut().zip(deeplift(model, x, reference)?) {
            *p += v;
        }
        baseline_sum += model.forward_unchecked(reference);
    }
    let b = baselines.len() as f64;
    phi.iter_mut().for_each(|p| *p /= b);
    Ok(AttributionMatrix {
        window: model.window(),
        channels: model.channels(),
        phi,
        prediction: model.forward_unchecked(x),
        baseline_mean_prediction: baseline_sum / b,
    })
}

/// DeepSHAP over every sample of `dataset`, in sample order.
pub fn explain_dataset(
    model: &ForecastModel,
    dataset: &WindowedDataset,
    baselines: &BaselineSet,
) -> Result<Vec<AttributionMatrix>> {
    ensure_len("dataset window", model.input_len(), dataset.input_len())?;
    (0..dataset.num_samples())
        .into_par_iter()
        .map(|s| deepshap(model, dataset.input(s), baselines))
        .collect()
}
