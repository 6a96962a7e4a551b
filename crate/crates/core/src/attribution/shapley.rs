use crate::error::{ensure_len, Error, Result};
use crate::nn::Forecaster;

/// Largest channel count the exhaustive oracle accepts (2^15 evaluations).
pub const MAX_PLAYERS: usize = 15;

/// Exact Shapley values with channels as players.
///
/// A coalition keeps its channels' values from `x` at every lag and takes
/// the remaining channels from `baseline`. Returns one value per channel;
/// they sum to `f(x) − f(baseline)`.
pub fn exact_shapley<F>(f: F, x: &[f64], baseline: &[f64], window: usize, channels: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if channels == 0 || window == 0 {
        return Err(Error::InvalidArgument("window and channels must be positive".into()));
    }
    if channels > MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: channels,
            max: MAX_PLAYERS,
        });
    }
    ensure_len("shapley input", window * channels, x.len())?;
    ensure_len("shapley baseline", window * channels, baseline.len())?;

    let coalitions = 1usize << channels;
    let mut composite = vec![0.0; x.len()];
    let values: Vec<f64> = (0..coalitions)
        .map(|mask| {
            for (i, slot) in composite.iter_mut().enumerate() {
                let k = i % channels;
                *slot = if mask >> k & 1 == 1 { x[i] } else { baseline[i] };
            }
            f(&composite)
        })
        .collect();

    // weight[s] = s!(K−s−1)!/K!
    let weight: Vec<f64> = (0..channels)
        .map(|s| {
            let mut w = 1.0 / channels as f64;
            for j in 1..=s {
                w *= j as f64 / (channels - j) as f64;
            }
            w
        })
        .collect();
    Ok((0..channels)
        .map(|k| {
            let bit = 1usize << k;
            (0..coalitions)
                .filter(|mask| mask & bit == 0)
                .map(|mask| weight[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
                .sum()
        })
        .collect())
}

pub fn exact_shapley_model<M: Forecaster>(model: &M, x: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    exact_shapley(
        |input| model.forward_unchecked(input),
        x,
        baseline,
        model.window(),
        model.channels(),
    )
}
