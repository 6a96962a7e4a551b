#![allow(dead_code)]

use imfx::nn::{backward, Forecaster};
use imfx::series::WindowedDataset;

/// Central finite-difference gradient of the batch MSE.
pub fn finite_difference_grad<M: Forecaster + Clone>(
    model: &M,
    dataset: &WindowedDataset,
    batch: &[usize],
    step: f64,
) -> Vec<f64> {
    let loss = |m: &M| -> f64 {
        batch
            .iter()
            .map(|&s| {
                let e = m.forward(dataset.input(s)).unwrap() - dataset.targets_scaled()[s];
                e * e
            })
            .sum::<f64>()
            / batch.len() as f64
    };
    let mut probe = model.clone();
    (0..model.num_params())
        .map(|p| {
            let orig = probe.params()[p];
            probe.params_mut()[p] = orig + step;
            let up = loss(&probe);
            probe.params_mut()[p] = orig - step;
            let down = loss(&probe);
            probe.params_mut()[p] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Worst relative discrepancy, ignoring pairs within the absolute floor.
pub fn worst_gradient_error<M: Forecaster + Clone>(
    model: &M,
    dataset: &WindowedDataset,
    rel_tol: f64,
    abs_floor: f64,
) -> (f64, usize) {
    let batch: Vec<usize> = (0..dataset.num_samples()).collect();
    let (_, analytic) = backward(model, dataset, &batch).unwrap();
    let numeric = finite_difference_grad(model, dataset, &batch, 1e-5);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (a, n) in analytic.iter().zip(&numeric) {
        let diff = (a - n).abs();
        if diff <= abs_floor {
            continue;
        }
        let rel = diff / a.abs().max(n.abs());
        worst = worst.max(rel);
        if rel > rel_tol {
            failures += 1;
        }
    }
    (worst, failures)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn interior(v: &[f64]) -> &[f64] {
    let lo = v.len() / 10;
    &v[lo..v.len() - lo]
}

/// Dataset of random windows with targets from `f`.
pub fn random_dataset(
    window: usize,
    channels: usize,
    samples: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> f64,
) -> WindowedDataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = window * channels;
    let inputs: Vec<f64> = (0..samples * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = (0..samples).map(|s| f(&inputs[s * d..(s + 1) * d])).collect();
    WindowedDataset::from_parts(window, channels, inputs, targets, (0..samples).collect()).unwrap()
}

/// Largest absolute analytic-vs-numeric gradient difference.
pub fn max_gradient_gap<M: Forecaster + Clone>(model: &M, dataset: &WindowedDataset) -> f64 {
    let batch: Vec<usize> = (0..dataset.num_samples()).collect();
    let (_, analytic) = backward(model, dataset, &batch).unwrap();
    let numeric = finite_difference_grad(model, dataset, &batch, 1e-5);
    analytic.iter().zip(&numeric).fold(0.0, |m, (a, n)| m.max((a - n).abs()))
}
