//! Mini-batch training with Adam, global-norm clipping and a chronological
//! validation tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::cell::CellVariant;
use super::network::{Gradients, LstmNetwork};
use super::LstmError;
use crate::dataset::WindowedDataset;

/// Samples per parallel work unit. Partial gradients are summed in chunk
/// order, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    /// Fraction of the training samples, taken from the end, held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
    pub gradient_clip_norm: f64,
    pub cell_variant: CellVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            hidden_sizes: vec![50, 50],
            validation_fraction: 0.1,
            seed: 42,
            gradient_clip_norm: 5.0,
            cell_variant: CellVariant::Standard,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes must be non-empty and every size >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.gradient_clip_norm.is_nan() || self.gradient_clip_norm <= 0.0 {
            return bad("gradient_clip_norm must be > 0");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0, 1)");
        }
        Ok(())
    }

    /// (fit samples, validation samples) for a training set of `n`.
    pub fn validation_split(&self, n: usize) -> Result<(usize, usize), LstmError> {
        if n == 0 {
            return Err(LstmError::EmptyDataset);
        }
        let val = (self.validation_fraction * n as f64).floor() as usize;
        if val == 0 || val >= n {
            return Err(LstmError::EmptyValidation {
                samples: n,
                fraction: self.validation_fraction,
            });
        }
        Ok((n - val, val))
    }
}

/// Per-epoch losses on scaled targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean squared error over the epoch's batches, each measured before its update.
    pub train_mse: Vec<f64>,
    /// Mean squared error on the validation tail after the epoch.
    pub val_mse: Vec<f64>,
    pub optimizer_steps: u64,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for (e, (t, v)) in self.train_mse.iter().zip(&self.val_mse).enumerate() {
            out.push_str(&format!("{},{t:.16e},{v:.16e}\n", e + 1));
        }
        out
    }
}

/// Mean squared error of the network over samples `range` of `ds`.
pub fn dataset_mse(
    net: &LstmNetwork,
    ds: &WindowedDataset,
    range: std::ops::Range<usize>,
) -> Result<f64, LstmError> {
    let n = range.len();
    if n == 0 {
        return Err(LstmError::EmptyDataset);
    }
    let errs: Vec<f64> = range
        .into_par_iter()
        .map(|s| {
            net.predict(ds.window(s), ds.lookback)
                .map(|p| (p - ds.targets[s]).powi(2))
        })
        .collect::<Result<_, _>>()?;
    Ok(errs.iter().sum::<f64>() / n as f64)
}

/// Sum of squared errors and summed loss gradient over `samples`.
fn batch_gradient(
    net: &LstmNetwork,
    ds: &WindowedDataset,
    samples: std::ops::Range<usize>,
) -> Result<(f64, Gradients), LstmError> {
    let scale = 2.0 / samples.len() as f64;
    let idx: Vec<usize> = samples.collect();
    let partials: Vec<(f64, Gradients)> = idx
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = net.zero_gradients();
            let mut sse = 0.0;
            for &s in chunk {
                let (p, cache) = net.forward(ds.window(s), ds.lookback)?;
                let err = p - ds.targets[s];
                sse += err * err;
                net.backward_into(&cache, scale * err, &mut grad)?;
            }
            Ok((sse, grad))
        })
        .collect::<Result<_, LstmError>>()?;
    let mut iter = partials.into_iter();
    let (mut sse, mut grad) = iter.next().expect("non-empty batch");
    for (s, g) in iter {
        sse += s;
        grad.add_assign(&g);
    }
    Ok((sse, grad))
}

/// Trains `net` on `ds` and returns the final-epoch network with its loss history.
///
/// Batches are visited in time order with no shuffling; the last
/// `validation_fraction` of the samples are never trained on.
pub fn train(
    mut net: LstmNetwork,
    ds: &WindowedDataset,
    cfg: &TrainConfig,
) -> Result<(LstmNetwork, TrainHistory), LstmError> {
    cfg.validate()?;
    if ds.num_features() != net.input_size() {
        return Err(LstmError::ShapeMismatch(format!(
            "dataset has {} features, network expects {}",
            ds.num_features(),
            net.input_size()
        )));
    }
    let (fit_n, _) = cfg.validation_split(ds.len())?;
    let lens: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(cfg.learning_rate, &lens);
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let mut sse = 0.0;
        for (batch, start) in (0..fit_n).step_by(cfg.batch_size).enumerate() {
            let end = (start + cfg.batch_size).min(fit_n);
            let (batch_sse, mut grad) = batch_gradient(&net, ds, start..end)?;
            if !batch_sse.is_finite() || !grad.is_finite() {
                return Err(LstmError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch + 1,
                });
            }
            sse += batch_sse;
            let norm = grad.global_norm();
            if norm > cfg.gradient_clip_norm {
                grad.scale(cfg.gradient_clip_norm / norm);
            }
            adam.update(net.tensors_mut(), grad.tensors());
        }
        let train_mse = sse / fit_n as f64;
        let val_mse = dataset_mse(&net, ds, fit_n..ds.len())?;
        if !val_mse.is_finite() {
            return Err(LstmError::NonFiniteLoss {
                epoch: epoch + 1,
                batch: 0,
            });
        }
        tracing::info!(epoch = epoch + 1, train_mse, val_mse, "epoch done");
        history.train_mse.push(train_mse);
        history.val_mse.push(val_mse);
    }
    history.optimizer_steps = adam.steps();
    Ok((net, history))
}
