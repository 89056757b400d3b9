use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{logsumexp_rows, Mode};
use super::model::Model;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::FeatureCube;
use crate::rng::{mix_seed, Stream};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Learning rate multiplier applied once per epoch.
    pub lr_decay: f64,
    pub l2_penalty: f64,
    pub patience: usize,
    /// Smallest validation-loss drop that counts as an improvement.
    pub min_delta: f64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr_decay: 0.96,
            l2_penalty: 0.003,
            patience: 10,
            min_delta: 1e-4,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be at least 1"));
        }
        let nonneg = [
            ("learning_rate", self.learning_rate),
            ("l2_penalty", self.l2_penalty),
            ("min_delta", self.min_delta),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::domain(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::domain("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored (1-based), if any ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub train_samples: usize,
    pub validation_samples: usize,
}

impl History {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serialises") + "\n"
    }
}

/// Adam with bias correction.
pub struct Adam<T> {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &Model<T>, config: &TrainConfig) -> Self {
        let zeros = || model.params().iter().map(|p| vec![T::zero(); p.value.len()]).collect();
        Adam { beta1: config.beta1, beta2: config.beta2, epsilon: config.epsilon, step: 0, m: zeros(), v: zeros() }
    }

    /// One update of every trainable parameter.
    pub fn step(&mut self, model: &mut Model<T>, grads: &[Tensor<T>], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (nb1, nb2) = (T::one() - b1, T::one() - b2);
        let (inv_c1, inv_c2) = (T::lit(1.0 / c1), T::lit(1.0 / c2));
        let (lr, eps) = (T::lit(lr), T::lit(self.epsilon));
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            if !p.kind.trainable() {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((w, &g), mi), vi) in p.value.data_mut().iter_mut().zip(grads[i].data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + nb1 * g;
                *vi = b2 * *vi + nb2 * g * g;
                let mhat = *mi * inv_c1;
                let vhat = *vi * inv_c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

fn labels_of<T>(cubes: &[FeatureCube<T>]) -> Result<Vec<usize>> {
    cubes
        .iter()
        .map(|c| {
            c.label.map(|l| l.class_index()).ok_or_else(|| {
                Error::domain(format!("cube at window {} channel {} is unlabelled", c.window_index, c.center_channel))
            })
        })
        .collect()
}

/// Mean cross-entropy (plus L2 term) and accuracy in eval mode.
pub fn evaluate<T: Real>(model: &Model<T>, cubes: &[&FeatureCube<T>], labels: &[usize], l2_penalty: f64, batch: usize) -> Result<(f64, f64)> {
    let mut ce = 0.0;
    let mut correct = 0usize;
    for (chunk, ys) in cubes.chunks(batch.max(1)).zip(labels.chunks(batch.max(1))) {
        let logits = model.logits(&model.batch(chunk)?)?;
        let lse = logsumexp_rows(&logits, 2);
        for (i, &y) in ys.iter().enumerate() {
            ce += (lse[i] - logits[2 * i + y]).as_f64();
            let pred = usize::from(logits[2 * i + 1] > logits[2 * i]);
            correct += usize::from(pred == y);
        }
    }
    let n = cubes.len().max(1) as f64;
    Ok((ce / n + l2_penalty * model.conv_kernel_norm2(), correct as f64 / n))
}

/// Splits `n` samples into shuffled (train, validation) index lists.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Split, 0)));
    let n_val = (n as f64 * fraction).floor() as usize;
    let n_val = if n.saturating_sub(n_val) < 2 { 0 } else { n_val };
    let val = idx.split_off(n - n_val);
    (idx, val)
}

pub fn train<T: Real>(model: Model<T>, cubes: &[FeatureCube<T>], config: &TrainConfig, seed: u64) -> Result<(Model<T>, History)> {
    train_with(model, cubes, config, seed, |_| {})
}

/// Mini-batch training with early stopping on validation loss; the
/// best-scoring parameters are restored at the end. `on_epoch` sees every
/// finished epoch.
pub fn train_with<T: Real>(
    mut model: Model<T>,
    cubes: &[FeatureCube<T>],
    config: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model<T>, History)> {
    config.validate()?;
    let labels = labels_of(cubes)?;
    if cubes.len() < 2 {
        return Err(Error::domain("training needs at least two cubes"));
    }
    for class in 0..2 {
        if !labels.contains(&class) {
            return Err(Error::domain(format!(
                "training data has no {} cubes",
                if class == 1 { "leak" } else { "non-leak" }
            )));
        }
    }
    let (train_idx, val_idx) = validation_split(cubes.len(), config.validation_fraction, seed);
    let val_cubes: Vec<&FeatureCube<T>> = val_idx.iter().map(|&i| &cubes[i]).collect();
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
    let mut history = History { train_samples: train_idx.len(), validation_samples: val_idx.len(), ..History::default() };
    let mut adam = Adam::new(&model, config);
    let mut best: Option<(f64, Model<T>)> = None;
    let mut wait = 0;
    let mut step = 0u64;
    let mut order = train_idx.clone();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.lr_decay.powi(epoch as i32);
        order.copy_from_slice(&train_idx);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Shuffle, epoch as u64)));
        let mut batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        // a trailing singleton cannot be batch-normalised; fold it into its neighbour
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            batches.pop();
            let n = batches.len();
            batches[n - 1] = &order[(n - 1) * config.batch_size..];
        }
        let mut loss_sum = 0.0;
        for (bi, idx) in batches.iter().enumerate() {
            let refs: Vec<&FeatureCube<T>> = idx.iter().map(|&i| &cubes[i]).collect();
            let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let x = model.batch(&refs)?;
            let out = model
                .loss_and_grads(&x, &ys, config.l2_penalty, Mode::Train, Some(mix_seed(seed, Stream::Dropout, step)))
                .map_err(|e| Error::Numerical(format!("epoch {} batch {}: {e}", epoch + 1, bi + 1)))?;
            model.update_running_stats(&out.batch_moments);
            adam.step(&mut model, &out.grads, lr);
            loss_sum += out.loss * idx.len() as f64;
            step += 1;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (val_loss, val_accuracy) = if val_cubes.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&model, &val_cubes, &val_labels, config.l2_penalty, config.batch_size)?;
            (Some(l), Some(a))
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::Numerical(format!("epoch {}: loss diverged", epoch + 1)));
        }
        let rec = EpochRecord { epoch: epoch + 1, learning_rate: lr, train_loss, val_loss, val_accuracy };
        on_epoch(&rec);
        history.epochs.push(rec);
        if best.as_ref().is_none_or(|(b, _)| monitored < b - config.min_delta) {
            best = Some((monitored, model.clone()));
            history.best_epoch = Some(epoch + 1);
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, history))
}
