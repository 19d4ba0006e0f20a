use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward_into, cross_entropy, forward_inputs, to_inputs};
use super::params::{init_params, ModelParams};
use super::{ModelConfig, TrainConfig};
use crate::encoder::SceneMetadata;
use crate::error::{Error, Result};
use crate::metrics::{confusion, macro_metrics};
use crate::scalar::Scalar;

/// Encoded scene ready for the model (already oriented for its architecture).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub meta: SceneMetadata,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_macro_f1: f64,
    pub val_loss: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the selected epoch.
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Adam with bias correction. Moment buffers mirror the parameter layout.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: ModelParams<T>,
    v: ModelParams<T>,
    step: i32,
    beta1: T,
    beta2: T,
    epsilon: T,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelParams<T>, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: T::of(cfg.beta1),
            beta2: T::of(cfg.beta2),
            epsilon: T::of(cfg.epsilon),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>, lr: T) {
        self.step += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.step);
        let bc2 = one - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (((p, g), m), v) in
            params.blocks_mut().into_iter().zip(grads.blocks()).zip(self.m.blocks_mut()).zip(self.v.blocks_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

struct Prepared<T> {
    inputs: Vec<Vec<T>>,
    label: usize,
}

fn prepare<T: Scalar>(samples: &[LabeledSequence], cfg: &ModelConfig) -> Result<Vec<Prepared<T>>> {
    samples
        .iter()
        .map(|s| {
            if s.meta.len() != cfg.sequence_length {
                return Err(Error::LengthMismatch { expected: cfg.sequence_length, actual: s.meta.len() });
            }
            if s.label >= cfg.num_classes {
                return Err(Error::Config(format!("label {} out of range", s.label)));
            }
            Ok(Prepared { inputs: to_inputs(&s.meta), label: s.label })
        })
        .collect()
}

/// Mean loss and macro-F1 of `params` on `samples`.
fn evaluate<T: Scalar>(params: &ModelParams<T>, samples: &[Prepared<T>]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let cache = forward_inputs(params, &s.inputs)?;
        loss += cross_entropy(cache.prediction(), s.label).to_f64_lossy();
        preds.push(cache.prediction().label);
        labels.push(s.label);
    }
    let f1 = macro_metrics(&confusion(&preds, &labels, params.config.num_classes)?).f1;
    Ok((loss / samples.len().max(1) as f64, f1))
}

/// Mini-batch Adam training with step decay.
///
/// Each epoch reshuffles the training order from a generator seeded by
/// `train_cfg.seed`, so identical inputs give bitwise-identical runs. The
/// returned parameters are those of the epoch with the best validation
/// macro-F1 (ties: lower validation loss, then earlier epoch). Without a
/// validation set the training metrics are used instead.
pub fn train<T: Scalar>(
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    model_cfg.validate()?;
    train_cfg.validate()?;
    let train_data: Vec<Prepared<T>> = prepare(train_set, model_cfg)?;
    let val_data: Vec<Prepared<T>> = prepare(val_set, model_cfg)?;

    let mut params: ModelParams<T> = init_params(model_cfg, train_cfg.seed);
    let mut adam = Adam::new(&params, train_cfg);
    let mut grads = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ 0x05ee_d0f5_u64);
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    let mut history = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, f64, usize, ModelParams<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..train_cfg.epochs {
        let lr = train_cfg.learning_rate_at(epoch);
        let lr_t = T::of(lr);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut preds = Vec::with_capacity(order.len());
        let mut labels = Vec::with_capacity(order.len());
        for batch in order.chunks(train_cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let s = &train_data[i];
                let cache = forward_inputs(&params, &s.inputs)?;
                let loss = cross_entropy(cache.prediction(), s.label).to_f64_lossy();
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += loss;
                preds.push(cache.prediction().label);
                labels.push(s.label);
                backward_into(&params, &cache, s.label, &mut grads);
            }
            let scale = T::one() / T::of(batch.len() as f64);
            for b in grads.blocks_mut() {
                for g in b.iter_mut() {
                    *g *= scale;
                }
            }
            adam.step(&mut params, &grads, lr_t);
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let train_loss = loss_sum / train_data.len() as f64;
        let train_f1 = macro_metrics(&confusion(&preds, &labels, model_cfg.num_classes)?).f1;
        let (val_loss, val_f1) = if val_data.is_empty() {
            (None, None)
        } else {
            let (l, f) = evaluate(&params, &val_data)?;
            (Some(l), Some(f))
        };
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss,
            train_macro_f1: train_f1,
            val_loss,
            val_macro_f1: val_f1,
        });

        let (score, loss) = match (val_f1, val_loss) {
            (Some(f), Some(l)) => (f, l),
            _ => (train_f1, train_loss),
        };
        let improved = match &best {
            None => true,
            Some((bs, bl, _, _)) => score > *bs || (score == *bs && loss < *bl),
        };
        if improved {
            best = Some((score, loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(patience) = train_cfg.patience {
            if since_best >= patience {
                break;
            }
        }
    }

    let (_, _, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, history, best_epoch })
}
