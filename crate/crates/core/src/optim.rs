//! Mini-batch SGD with a per-step cosine schedule for the objective
//! `mean CE(head(L(x)), y) + lambda * ||Theta||_1`, where the L1 term covers
//! the four module matrices only.

use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::heads::SessionHead;
use crate::luca::{LucaGradients, LucaModule};
use crate::numerics::{check_len, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L1Mode {
    /// `theta - lr * (grad + lambda * sign(theta))`
    Subgradient,
    /// `soft_threshold(theta - lr * grad, lr * lambda)`
    Proximal,
}

impl FromStr for L1Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgradient" => Ok(L1Mode::Subgradient),
            "proximal" => Ok(L1Mode::Proximal),
            _ => Err(Error::InvalidParameter("l1 mode must be subgradient or proximal")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_l1: f64,
    pub l1_mode: L1Mode,
    /// Heavy-ball momentum in the PyTorch form `v = mu * v + g; theta -= lr * v`.
    pub momentum: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr_max: 0.025,
            lr_min: 0.0,
            epochs: 20,
            batch_size: 48,
            lambda_l1: 5e-4,
            l1_mode: L1Mode::Subgradient,
            momentum: 0.9,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min >= 0.0 && self.lr_max >= self.lr_min && self.lr_max.is_finite()) {
            return Err(Error::InvalidParameter("require lr_max >= lr_min >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1"));
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must be in [0, 1)"));
        }
        Ok(())
    }

    /// Optimizer steps for `n` samples; the last partial batch counts.
    pub fn total_steps(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size) * self.epochs
    }
}

/// `lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2`
pub fn cosine_lr(step: usize, total_steps: usize, cfg: &OptimConfig) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(Error::StepOutOfRange { step, total: total_steps });
    }
    let progress = step as f64 / total_steps as f64;
    let decay = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
    Ok(cfg.lr_min + (cfg.lr_max - cfg.lr_min) * decay)
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One scalar update without momentum.
pub fn sgd_l1_step(theta: f64, grad: f64, lr: f64, lambda: f64, mode: L1Mode) -> f64 {
    let mut velocity = 0.0;
    l1_update(theta, grad, &mut velocity, lr, lambda, mode, 0.0)
}

#[inline]
fn l1_update(
    theta: f64,
    grad: f64,
    velocity: &mut f64,
    lr: f64,
    lambda: f64,
    mode: L1Mode,
    momentum: f64,
) -> f64 {
    match mode {
        L1Mode::Subgradient => {
            *velocity = momentum * *velocity + grad + lambda * sign(theta);
            theta - lr * *velocity
        }
        L1Mode::Proximal => {
            *velocity = momentum * *velocity + grad;
            soft_threshold(theta - lr * *velocity, lr * lambda)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Mean cross-entropy over the epoch, each sample scored with the
    /// parameters in effect for its batch.
    pub cross_entropy: f64,
    /// `cross_entropy + lambda * L1` with the L1 norm at the end of the epoch.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
    pub steps: usize,
}

/// Cross-entropy of `logits` against column `target`, and `softmax - onehot`.
fn cross_entropy_grad(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    let loss = libm::log(total) + max - logits[target];
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / total).collect();
    grad[target] -= 1.0;
    (loss, grad)
}

struct Momentum {
    module: [Vec<f64>; 4],
    head: Vec<f64>,
}

/// Trains `module` and `head` jointly on `data`.
///
/// Each epoch visits a fresh permutation drawn from `shuffle`. Gradients are
/// averaged over the batch, accumulated in sample order. The learning rate
/// follows [`cosine_lr`] per optimizer step. The head receives plain SGD
/// (with momentum if configured); the module matrices receive the L1 update.
pub fn train_epochs(
    module: &mut LucaModule,
    head: &mut SessionHead,
    data: &FeatureDataset,
    cfg: &OptimConfig,
    shuffle: &mut rng::Rng,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len(module.dim(), data.dim())?;
    check_len(module.dim(), head.dim())?;
    let targets: Vec<usize> = data
        .labels()
        .iter()
        .map(|&l| head.column_of(l).ok_or(Error::LabelOutsideClassSet(l)))
        .collect::<Result<_>>()?;

    let n = data.len();
    let total = cfg.total_steps(n);
    let (d, r, k) = (module.dim(), module.rank(), head.num_classes());
    let mut grads = LucaGradients::zeros(d, r);
    let mut head_grad = Matrix::<f64>::zeros(d, k);
    let mut velocity = Momentum {
        module: [vec![0.0; d * r], vec![0.0; r * d], vec![0.0; d * r], vec![0.0; r * d]],
        head: vec![0.0; d * k],
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TrainTrace::default();

    for _ in 0..cfg.epochs {
        rng::shuffle(shuffle, &mut order);
        let mut ce_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            head_grad.as_mut_slice().fill(0.0);
            for &i in batch {
                let fwd = module.forward_traced(data.features(i))?;
                let logits = head.forward(&fwd.output)?;
                let (loss, d_logits) = cross_entropy_grad(&logits, targets[i]);
                ce_sum += loss;
                accumulate_outer(&mut head_grad, &fwd.output, &d_logits);
                let d_phi = head.weights.mul_vec(&d_logits)?;
                module.backward_into(&fwd, &d_phi, &mut grads)?;
            }

            let lr = cosine_lr(trace.steps, total, cfg)?;
            let scale = 1.0 / batch.len() as f64;
            for ((param, grad), vel) in module
                .matrices_mut()
                .into_iter()
                .zip(grads.matrices())
                .zip(velocity.module.iter_mut())
            {
                for ((p, &g), v) in param.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(vel) {
                    let next = l1_update(*p as f64, g * scale, v, lr, cfg.lambda_l1, cfg.l1_mode, cfg.momentum);
                    *p = next as f32;
                }
            }
            for ((p, &g), v) in head
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(head_grad.as_slice())
                .zip(velocity.head.iter_mut())
            {
                *v = cfg.momentum * *v + g * scale;
                *p = (*p as f64 - lr * *v) as f32;
            }
            trace.steps += 1;
        }
        let cross_entropy = ce_sum / n as f64;
        trace.epochs.push(EpochStats {
            cross_entropy,
            objective: cross_entropy + cfg.lambda_l1 * module.l1_norm(),
        });
    }

    if !module.is_finite() || !head.weights.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(trace)
}

fn accumulate_outer(m: &mut Matrix<f64>, a: &[f64], b: &[f64]) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for (i, &ai) in a.iter().enumerate() {
        for (cell, &bj) in data[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *cell += ai * bj;
        }
    }
}
