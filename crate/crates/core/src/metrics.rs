//! Forecast accuracy in original units.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Targets at or below this magnitude make MAPE undefined.
pub const MAPE_ZERO_GUARD: f64 = 1e-9;
/// Total sum of squares below this makes R² undefined.
pub const R2_SSTOT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub samples: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Percent; `None` with a reason in `mape_omitted`.
    pub mape: Option<f64>,
    pub r2: Option<f64>,
    pub mape_omitted: Option<String>,
    pub r2_omitted: Option<String>,
    pub display: MetricsDisplay,
}

/// Three-decimal renderings for tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsDisplay {
    pub mse: String,
    pub rmse: String,
    pub mae: String,
    pub mape: String,
    pub r2: String,
}

pub fn compute_metrics(targets: &[f64], predictions: &[f64]) -> Result<MetricsBundle> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one sample".into()));
    }
    ensure_len("predictions", targets.len(), predictions.len())?;
    if targets.iter().chain(predictions).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("metrics inputs must be finite".into()));
    }
    let n = targets.len() as f64;
    let errors: Vec<f64> = predictions.iter().zip(targets).map(|(p, y)| p - y).collect();
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;

    let (mape, mape_omitted) = match targets.iter().position(|y| y.abs() <= MAPE_ZERO_GUARD) {
        Some(i) => (None, Some(format!("target {i} is within {MAPE_ZERO_GUARD:e} of zero"))),
        None => {
            let m = errors.iter().zip(targets).map(|(e, y)| (e / y).abs()).sum::<f64>() / n;
            (Some(100.0 * m), None)
        }
    };

    let mean = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = errors.iter().map(|e| e * e).sum();
    let (r2, r2_omitted) = if ss_tot < R2_SSTOT_GUARD {
        (None, Some("targets are constant".to_string()))
    } else {
        (Some(1.0 - ss_res / ss_tot), None)
    };

    let rmse = mse.sqrt();
    let opt = |v: Option<f64>, suffix: &str| v.map_or("n/a".to_string(), |v| format!("{v:.3}{suffix}"));
    Ok(MetricsBundle {
        samples: targets.len(),
        mse,
        rmse,
        mae,
        mape,
        r2,
        mape_omitted,
        r2_omitted,
        display: MetricsDisplay {
            mse: format!("{mse:.3}"),
            rmse: format!("{rmse:.3}"),
            mae: format!("{mae:.3}"),
            mape: opt(mape, "%"),
            r2: opt(r2, ""),
        },
    })
}
