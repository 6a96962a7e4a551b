//! Deterministic synthetic series used by tests, the acceptance suite and
//! the `synth` CLI subcommand.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::seed::rng_for;
use crate::series::Series;

pub fn constant(n: usize, value: f64) -> Vec<f64> {
    vec![value; n]
}

/// `sin(2π·10t) + sin(2π·t)` sampled at `t = i / n`.
pub fn two_tone(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            (2.0 * PI * 10.0 * t).sin() + (2.0 * PI * t).sin()
        })
        .collect()
}

pub fn fast_tone(n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / n as f64).sin()).collect()
}

pub fn slow_tone(n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect()
}

/// Rising quadratic trend plus a 25-sample and a 180-sample cycle and a
/// little Gaussian noise.
pub fn trend_tones(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, "fixture-trend-tones");
    (0..n)
        .map(|i| {
            let t = i as f64;
            let u = t / n as f64;
            let noise: f64 = rng.sample(StandardNormal);
            20.0 + 30.0 * u + 20.0 * u * u
                + 1.5 * (2.0 * PI * t / 25.0).sin()
                + 3.0 * (2.0 * PI * t / 180.0).sin()
                + 0.2 * noise
        })
        .collect()
}

/// Smooth rising trend plus white noise.
pub fn trend_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, "fixture-trend-noise");
    (0..n)
        .map(|i| {
            let u = i as f64 / n as f64;
            let noise: f64 = rng.sample(StandardNormal);
            10.0 + 40.0 * u + 15.0 * u * u + 0.5 * noise
        })
        .collect()
}

/// Gaussian random walk starting at 100.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, "fixture-random-walk");
    let mut level = 100.0;
    (0..n)
        .map(|_| {
            let step: f64 = rng.sample(StandardNormal);
            level += step;
            level
        })
        .collect()
}

pub fn as_series(name: &str, values: Vec<f64>) -> Result<Series> {
    Series::from_values(name, values)
}
