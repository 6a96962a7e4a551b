use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig, Forecaster, ModelKind};
use crate::error::{ensure_len, Error, Result};
use crate::seed::{rng_for, SHUFFLE};
use crate::series::{Scaler, WindowedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without monitor improvement tolerated before stopping.
    pub patience: usize,
    /// Chronologically last share of the training windows held out for
    /// early stopping.
    pub monitor_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_model(kind: ModelKind) -> Self {
        let max_epochs = match kind {
            ModelKind::Mlp => 50,
            ModelKind::Lstm => 100,
        };
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 64,
            max_epochs,
            patience: 5,
            monitor_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) || !(self.adam.epsilon > 0.0) {
            return Err(Error::Config("learning rate and epsilon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epoch cap must be positive".into()));
        }
        if !(self.monitor_fraction > 0.0 && self.monitor_fraction < 1.0) {
            return Err(Error::Config("monitor fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_monitor_loss: f64,
    pub train_loss: Vec<f64>,
    pub monitor_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were restored.
    pub best_epoch: usize,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub update_samples: usize,
    pub monitor_samples: usize,
    pub batch_size: usize,
}

impl TrainHistory {
    pub fn best_monitor_loss(&self) -> f64 {
        self.monitor_loss[self.best_epoch]
    }
}

/// Mean squared error of the model over `samples` (scaled targets).
pub fn mse<M: Forecaster>(model: &M, dataset: &WindowedDataset, samples: &[usize]) -> f64 {
    let targets = dataset.targets_scaled();
    samples
        .iter()
        .map(|&s| {
            let e = model.forward_unchecked(dataset.input(s)) - targets[s];
            e * e
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Mean-squared-error loss over `batch` and its gradient with respect to
/// every parameter.
pub fn backward<M: Forecaster>(
    model: &M,
    dataset: &WindowedDataset,
    batch: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    ensure_len("dataset window", model.input_len(), dataset.input_len())?;
    let mut grad = vec![0.0; model.num_params()];
    let scale = 1.0 / batch.len() as f64;
    let targets = dataset.targets_scaled();
    let mut loss = 0.0;
    for &s in batch {
        let x = dataset.input(s);
        let err = model.forward_unchecked(x) - targets[s];
        loss += err * err;
        model.accumulate_gradient(x, 2.0 * err * scale, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Fits `model` with Adam on mini-batches, early-stopping on the last
/// `monitor_fraction` of the windows and restoring the best parameters.
pub fn train<M: Forecaster + Clone>(
    mut model: M,
    dataset: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(M, TrainHistory)> {
    config.validate()?;
    ensure_len("dataset window", model.input_len(), dataset.input_len())?;
    let n = dataset.num_samples();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 windows, got {n}"
        )));
    }
    let monitor_len = ((n as f64 * config.monitor_fraction).ceil() as usize).clamp(1, n - 1);
    let update_len = n - monitor_len;
    let monitor: Vec<usize> = (update_len..n).collect();
    let batch_size = if update_len < 2 * config.batch_size {
        update_len
    } else {
        config.batch_size
    };

    let mut rng = rng_for(config.seed, SHUFFLE);
    let mut order: Vec<usize> = (0..update_len).collect();
    let mut adam = Adam::new(model.num_params(), config.adam);
    let mut history = TrainHistory {
        initial_monitor_loss: mse(&model, dataset, &monitor),
        train_loss: Vec::new(),
        monitor_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
        early_stopped: false,
        update_samples: update_len,
        monitor_samples: monitor_len,
        batch_size,
    };
    let mut best = (f64::INFINITY, model.params().to_vec());
    let mut waited = 0;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let (loss, grad) = backward(&model, dataset, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.update(model.params_mut(), &grad);
        }
        let monitor_loss = mse(&model, dataset, &monitor);
        if !monitor_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.train_loss.push(epoch_loss / update_len as f64);
        history.monitor_loss.push(monitor_loss);
        history.stopped_epoch = epoch + 1;
        if monitor_loss < best.0 {
            best = (monitor_loss, model.params().to_vec());
            history.best_epoch = epoch;
            waited = 0;
        } else {
            waited += 1;
            if waited > config.patience {
                history.early_stopped = true;
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best.1);
    log::debug!(
        "trained {} epochs, best epoch {} (monitor {:.3e})",
        history.stopped_epoch,
        history.best_epoch,
        best.0
    );
    Ok((model, history))
}

/// One prediction per sample in the model's (scaled) target space.
pub fn predict_scaled<M: Forecaster>(model: &M, dataset: &WindowedDataset) -> Result<Vec<f64>> {
    ensure_len("dataset window", model.input_len(), dataset.input_len())?;
    Ok((0..dataset.num_samples())
        .map(|s| model.forward_unchecked(dataset.input(s)))
        .collect())
}

/// One prediction per sample, mapped back to original units.
pub fn predict_series<M: Forecaster>(
    model: &M,
    dataset: &WindowedDataset,
    target_scaler: &Scaler,
) -> Result<Vec<f64>> {
    ensure_len("target scaler channels", 1, target_scaler.num_channels())?;
    Ok(predict_scaled(model, dataset)?
        .into_iter()
        .map(|v| target_scaler.unscale_value(0, v))
        .collect())
}
