//! RMSProp training with a step-halving learning rate.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{mae_slices, Tape};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::network::{Network, Predictor};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Mse,
    Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub halve_every: usize,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub loss: LossKind,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    /// 500 epochs, batch 100, lr 0.003 halved every 100 epochs.
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 100,
            lr0: 0.003,
            halve_every: 100,
            rmsprop_rho: 0.9,
            rmsprop_eps: 1e-8,
            loss: LossKind::Mse,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks every field except `epochs`; zero epochs is a valid no-op run.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size < 1 {
            return fail("batch_size must be >= 1");
        }
        if self.halve_every < 1 {
            return fail("halve_every must be >= 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return fail("lr0 must be > 0");
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return fail("rmsprop_rho must lie in (0, 1)");
        }
        if self.rmsprop_eps.is_nan() || self.rmsprop_eps <= 0.0 {
            return fail("rmsprop_eps must be > 0");
        }
        Ok(())
    }

    /// `lr0 / 2^floor(epoch / halve_every)`
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.epochs {
            return Err(Error::Config(format!(
                "epoch {epoch} out of range for {} epochs",
                self.epochs
            )));
        }
        let halvings = (epoch / self.halve_every) as i32;
        Ok(self.lr0 / 2f64.powi(halvings))
    }
}

/// Per-parameter running mean of squared gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub rho: f64,
    pub eps: f64,
}

impl RmsProp {
    /// `v ← ρv + (1−ρ)g²;  θ ← θ − lr·g / (√v + ε)`
    pub fn step(&self, params: &mut [f64], grads: &[f64], state: &mut [f64], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != state.len() {
            return Err(Error::Dimension {
                op: "rmsprop_step",
                left: vec![params.len()],
                right: vec![grads.len(), state.len()],
            });
        }
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
            *v = self.rho * *v + (1.0 - self.rho) * g * g;
            *p -= lr * g / (v.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Tensor-level wrapper around [`RmsProp::step`].
pub fn rmsprop_step(
    params: &mut Tensor,
    grads: &Tensor,
    state: &mut Tensor,
    lr: f64,
    rho: f64,
    eps: f64,
) -> Result<()> {
    if params.shape() != grads.shape() || params.shape() != state.shape() {
        return Err(Error::Dimension {
            op: "rmsprop_step",
            left: params.shape().to_vec(),
            right: grads.shape().to_vec(),
        });
    }
    RmsProp { rho, eps }.step(params.data_mut(), grads.data(), state.data_mut(), lr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub per_epoch: Vec<EpochStats>,
    pub final_test_mae: Option<f64>,
    pub best_test_mae: Option<f64>,
    pub best_epoch: Option<usize>,
    pub wall_time_secs: f64,
    pub config: TrainConfig,
    pub seed: u64,
}

impl TrainReport {
    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        } == Self {
            wall_time_secs: 0.0,
            ..other.clone()
        }
    }
}

/// MAE of `net` over the whole dataset.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluate"));
    }
    let pred = net.predict(&data.features)?;
    mae_slices(&pred, data.labels.data())
}

fn gather_rows(src: &Tensor, idx: &[usize]) -> Tensor {
    let c = src.cols();
    let mut data = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        data.extend_from_slice(src.row(i));
    }
    Tensor::new(vec![idx.len(), c], data).expect("non-empty batch")
}

/// Trains a copy of `net`; the input network is left untouched.
///
/// Each epoch shuffles the training indices with a generator seeded from
/// `config.shuffle_seed`, walks minibatches in order (the last one may be
/// short), and records the test MAE at the end of the epoch.
pub fn train(net: &Network, train_set: &Dataset, test_set: &Dataset, config: &TrainConfig) -> Result<(Network, TrainReport)> {
    config.validate()?;
    for (name, ds) in [("train", train_set), ("test", test_set)] {
        if ds.is_empty() {
            return Err(Error::Empty(if name == "train" { "train set" } else { "test set" }));
        }
        if ds.feature_dim() != net.spec().input_dim() {
            return Err(Error::Dimension {
                op: "train",
                left: ds.features.shape().to_vec(),
                right: vec![net.spec().input_dim()],
            });
        }
    }

    let start = Instant::now();
    let mut net = net.clone();
    let rms = RmsProp {
        rho: config.rmsprop_rho,
        eps: config.rmsprop_eps,
    };
    let mut w_state: Vec<Tensor> = net.weights().iter().map(|w| Tensor::zeros(w.shape())).collect();
    let mut b_state: Vec<Option<Tensor>> = net
        .biases()
        .iter()
        .map(|b| b.as_ref().map(|b| Tensor::zeros(b.shape())))
        .collect();

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut tape = Tape::new();
    let mut per_epoch = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch)?;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            tape.reset();
            let params = net.register(&mut tape);
            let x = tape.constant(gather_rows(&train_set.features, idx));
            let y = tape.constant(Tensor::vector(idx.iter().map(|&i| train_set.labels.data()[i]).collect()));
            let pred = net.forward_on_tape(&mut tape, &params, x)?;
            let loss = match config.loss {
                LossKind::Mse => tape.mse(pred, y)?,
                LossKind::Mae => tape.mae(pred, y)?,
            };
            let loss_value = tape.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    loss: loss_value,
                });
            }
            loss_sum += loss_value * idx.len() as f64;

            let mut grads = tape.backward(loss)?;
            for (layer, p) in params.iter().enumerate() {
                let g = grads.take(p.weight);
                rms.step(net.weight_mut(layer).data_mut(), g.data(), w_state[layer].data_mut(), lr)?;
                if let (Some(bv), Some(state)) = (p.bias, b_state[layer].as_mut()) {
                    let g = grads.take(bv);
                    let bias = net.bias_mut(layer).expect("bias matches spec");
                    rms.step(bias.data_mut(), g.data(), state.data_mut(), lr)?;
                }
            }
        }
        let test_mae = evaluate(&net, test_set)?;
        if !test_mae.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: n.div_ceil(config.batch_size),
                loss: test_mae,
            });
        }
        let train_loss = loss_sum / n as f64;
        log::debug!("epoch {epoch}: lr {lr:.3e} train loss {train_loss:.6} test mae {test_mae:.6}");
        per_epoch.push(EpochStats {
            epoch,
            lr,
            train_loss,
            test_mae,
        });
    }

    let best = per_epoch
        .iter()
        .min_by(|a, b| a.test_mae.total_cmp(&b.test_mae));
    let report = TrainReport {
        final_test_mae: per_epoch.last().map(|e| e.test_mae),
        best_test_mae: best.map(|e| e.test_mae),
        best_epoch: best.map(|e| e.epoch),
        per_epoch,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: config.clone(),
        seed: config.shuffle_seed,
    };
    Ok((net, report))
}
