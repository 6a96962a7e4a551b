use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AttributionMatrix;
use crate::error::{ensure_len, Error, Result};

/// How per-lag attributions collapse into one score per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelScore {
    /// `|Σ_lags φ|`: opposite-signed lags cancel.
    #[default]
    AbsOfSum,
    /// `Σ_lags |φ|`.
    SumOfAbs,
}

impl fmt::Display for ChannelScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelScore::AbsOfSum => "abs_of_sum",
            ChannelScore::SumOfAbs => "sum_of_abs",
        })
    }
}

impl FromStr for ChannelScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs_of_sum" => Ok(ChannelScore::AbsOfSum),
            "sum_of_abs" => Ok(ChannelScore::SumOfAbs),
            other => Err(Error::Config(format!(
                "unknown channel score {other:?} (expected abs_of_sum or sum_of_abs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub channel_names: Vec<String>,
    pub channel_score: ChannelScore,
    pub samples: usize,
    /// Mean channel score over samples, in the attribution's units.
    pub mean_shap: Vec<f64>,
    /// Share of the total in percent; `None` when every score is zero.
    pub percent: Option<Vec<f64>>,
    pub degenerate: bool,
    /// Shannon entropy (nats) of the percent vector.
    pub entropy: Option<f64>,
    /// Channel indices by decreasing score, ties broken by index.
    pub ranking: Vec<usize>,
}

impl AttributionReport {
    pub fn rank_of(&self, channel: usize) -> Option<usize> {
        self.ranking.iter().position(|&c| c == channel).map(|r| r + 1)
    }

    pub fn top(&self) -> Option<&str> {
        self.ranking.first().map(|&c| self.channel_names[c].as_str())
    }
}

pub fn aggregate_importance(
    matrices: &[AttributionMatrix],
    channel_names: &[String],
    score: ChannelScore,
) -> Result<AttributionReport> {
    if matrices.is_empty() {
        return Err(Error::InvalidArgument("no attributions to aggregate".into()));
    }
    let channels = channel_names.len();
    let mut totals = vec![0.0; channels];
    for m in matrices {
        ensure_len("attribution channels", channels, m.channels)?;
        match score {
            ChannelScore::AbsOfSum => {
                for (t, s) in totals.iter_mut().zip(m.channel_sums()) {
                    *t += s.abs();
                }
            }
            ChannelScore::SumOfAbs => {
                for row in m.phi.chunks(channels) {
                    for (t, v) in totals.iter_mut().zip(row) {
                        *t += v.abs();
                    }
                }
            }
        }
    }
    let n = matrices.len() as f64;
    let mean_shap: Vec<f64> = totals.iter().map(|t| t / n).collect();
    let sum: f64 = mean_shap.iter().sum();
    let degenerate = !(sum > 0.0) || !sum.is_finite();
    let percent = (!degenerate).then(|| mean_shap.iter().map(|v| 100.0 * v / sum).collect::<Vec<_>>());
    let entropy = percent.as_deref().map(shannon_entropy);
    let mut ranking: Vec<usize> = (0..channels).collect();
    ranking.sort_by(|&a, &b| mean_shap[b].total_cmp(&mean_shap[a]).then(a.cmp(&b)));
    Ok(AttributionReport {
        channel_names: channel_names.to_vec(),
        channel_score: score,
        samples: matrices.len(),
        mean_shap,
        percent,
        degenerate,
        entropy,
        ranking,
    })
}

/// Entropy in nats of a percent (or any non-negative) vector, normalized
/// to a distribution first. Zero shares contribute nothing.
pub fn shannon_entropy(shares: &[f64]) -> f64 {
    let total: f64 = shares.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    shares
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(phi: Vec<f64>, channels: usize) -> AttributionMatrix {
        AttributionMatrix {
            window: phi.len() / channels,
            channels,
            phi,
            prediction: 0.0,
            baseline_mean_prediction: 0.0,
        }
    }

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("imf_{i}")).collect()
    }

    #[test]
    fn percent_and_ranking() {
        // window 2, channels 3
        let a = matrix(vec![1.0, -2.0, 0.5, 1.0, 1.0, 0.5], 3);
        let b = matrix(vec![3.0, 0.0, -0.5, -1.0, 0.0, -0.5], 3);
        let r = aggregate_importance(&[a.clone(), b.clone()], &names(3), ChannelScore::AbsOfSum).unwrap();
        assert_eq!(r.mean_shap, vec![2.0, 0.5, 1.0]);
        let p = r.percent.clone().unwrap();
        assert!((p.iter().sum::<f64>() - 100.0).abs() < 1e-12);
        assert!((p[0] - 100.0 * 2.0 / 3.5).abs() < 1e-12);
        assert_eq!(r.ranking, vec![0, 2, 1]);
        assert_eq!(r.rank_of(1), Some(3));
        assert_eq!(r.top(), Some("imf_1"));

        let r = aggregate_importance(&[a, b], &names(3), ChannelScore::SumOfAbs).unwrap();
        assert_eq!(r.mean_shap, vec![3.0, 1.5, 1.0]);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let r = aggregate_importance(&[matrix(vec![0.0; 4], 2)], &names(2), ChannelScore::AbsOfSum).unwrap();
        assert!(r.degenerate);
        assert!(r.percent.is_none());
        assert!(r.entropy.is_none());
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(shannon_entropy(&[100.0, 0.0, 0.0]), 0.0);
        let uniform = shannon_entropy(&[25.0; 4]);
        assert!((uniform - 4f64.ln()).abs() < 1e-15);
        assert!(shannon_entropy(&[70.0, 20.0, 10.0]) < 3f64.ln());
    }

    #[test]
    fn score_round_trips() {
        for s in [ChannelScore::AbsOfSum, ChannelScore::SumOfAbs] {
            assert_eq!(s.to_string().parse::<ChannelScore>().unwrap(), s);
        }
        assert!("mean".parse::<ChannelScore>().is_err());
    }
}
