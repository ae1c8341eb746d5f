//! Training loop (adaptive-moment gradient descent) and finite-difference
//! gradient verification.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonFrame;
use crate::tensor::Tensor3;

use super::{loss, loss_with_grad, Layer, Net, NetGrads};

/// Samples per parallel gradient chunk. Fixed (not thread-count dependent)
/// so the reduction order and therefore the result is machine-independent.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 64,
            batch_size: 32,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_joint_err_px: f64,
    pub val_loss: Option<f64>,
    pub val_joint_err_px: Option<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(net: &mut Net) -> Adam {
        let sizes: Vec<usize> = net.params_mut().iter().map(|p| p.len()).collect();
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Net, grads: &NetGrads, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        // flatten grads in the same fixed order as params_mut
        let mut flat: Vec<&[f64]> = Vec::new();
        for (i, layer_w) in grads.weights.iter().enumerate() {
            if !layer_w.is_empty() {
                flat.push(layer_w);
                flat.push(&grads.biases[i]);
            }
        }
        for ((param, g), (m, v)) in net
            .params_mut()
            .into_iter()
            .zip(flat)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..param.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                param[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }
}

struct ChunkResult {
    grads: NetGrads,
    loss_sum: f64,
    joint_sum: f64,
    nonfinite_sample: Option<usize>,
}

fn batch_pass(
    net: &Net,
    dataset: &[(Tensor3, SkeletonFrame)],
    indices: &[usize],
) -> Result<(NetGrads, f64, f64, Option<usize>)> {
    let chunks: Vec<&[usize]> = indices.chunks(GRAD_CHUNK).collect();
    let results: Vec<Result<ChunkResult>> = chunks
        .par_iter()
        .map(|chunk| {
            let mut grads = net.zero_grads();
            let mut loss_sum = 0.0;
            let mut joint_sum = 0.0;
            let mut nonfinite = None;
            for &idx in chunk.iter() {
                let (x, gt) = &dataset[idx];
                let acts = net.forward_trace(x);
                let (value, gout) = loss_with_grad(acts.last().expect("trace nonempty"), gt)?;
                if !value.loss.is_finite() && nonfinite.is_none() {
                    nonfinite = Some(idx);
                }
                loss_sum += value.loss;
                joint_sum += value.mean_joint_err_px;
                net.backward(&acts, &gout, &mut grads);
            }
            Ok(ChunkResult {
                grads,
                loss_sum,
                joint_sum,
                nonfinite_sample: nonfinite,
            })
        })
        .collect();
    let mut total = net.zero_grads();
    let mut loss_sum = 0.0;
    let mut joint_sum = 0.0;
    let mut nonfinite = None;
    for r in results {
        let r = r?;
        total.add_assign(&r.grads);
        loss_sum += r.loss_sum;
        joint_sum += r.joint_sum;
        if nonfinite.is_none() {
            nonfinite = r.nonfinite_sample;
        }
    }
    Ok((total, loss_sum, joint_sum, nonfinite))
}

fn eval_pass(net: &Net, dataset: &[(Tensor3, SkeletonFrame)]) -> Result<(f64, f64)> {
    let sums: Vec<Result<(f64, f64)>> = dataset
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut l = 0.0;
            let mut j = 0.0;
            for (x, gt) in chunk {
                let v = loss(&net.forward(x), gt)?;
                l += v.loss;
                j += v.mean_joint_err_px;
            }
            Ok((l, j))
        })
        .collect();
    let mut l = 0.0;
    let mut j = 0.0;
    for s in sums {
        let (a, b) = s?;
        l += a;
        j += b;
    }
    let n = dataset.len().max(1) as f64;
    Ok((l / n, j / n))
}

/// Trains the network in place, returning per-epoch metrics. Shuffling is
/// seeded; gradients reduce in a fixed order, so results are deterministic
/// per (net, dataset, config).
pub fn train(
    net: &mut Net,
    train_set: &[(Tensor3, SkeletonFrame)],
    val_set: Option<&[(Tensor3, SkeletonFrame)]>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let mut adam = Adam::new(net);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(cfg.seed, epoch as u64));
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut joint_sum = 0.0;
        for (batch_i, batch) in indices.chunks(cfg.batch_size).enumerate() {
            let (mut grads, l, j, nonfinite) = batch_pass(net, train_set, batch)?;
            if !l.is_finite() {
                let sample = nonfinite.unwrap_or(batch[0]);
                let acts = net.forward_trace(&train_set[sample].0);
                let layer = net
                    .first_nonfinite_layer(&acts)
                    .unwrap_or_else(|| "loss".into());
                return Err(Error::NanLoss {
                    epoch,
                    batch: batch_i,
                    layer,
                });
            }
            loss_sum += l;
            joint_sum += j;
            grads.scale(1.0 / batch.len() as f64);
            adam.step(net, &grads, cfg);
        }
        let n = train_set.len() as f64;
        let (val_loss, val_joint) = match val_set {
            Some(v) if !v.is_empty() => {
                let (a, b) = eval_pass(net, v)?;
                (Some(a), Some(b))
            }
            _ => (None, None),
        };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_joint_err_px: joint_sum / n,
            val_loss,
            val_joint_err_px: val_joint,
        });
    }
    Ok(metrics)
}

/// Forward pass recording the sign pattern at every ReLU input and at the
/// output (the soft-argmax clamp), so kink straddles can be detected.
fn forward_loss_signs(net: &Net, x: &Tensor3, gt: &SkeletonFrame) -> Result<(f64, Vec<bool>)> {
    let mut cur = x.clone();
    let mut signs = Vec::new();
    for layer in &net.layers {
        if matches!(layer, Layer::Relu) {
            signs.extend(cur.data.iter().map(|&v| v > 0.0));
        }
        cur = layer.forward(&cur);
    }
    signs.extend(cur.data.iter().map(|&v| v > 0.0));
    let v = loss(&cur, gt)?;
    Ok((v.loss, signs))
}

/// Central-difference verification of the analytic loss gradient on
/// `n_probes` randomly sampled parameters. Probes that straddle a ReLU or
/// clamp kink (sign pattern differs between the two evaluations) are
/// resampled. Returns the maximum relative error
/// `|a−n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check(
    net: &Net,
    x: &Tensor3,
    gt: &SkeletonFrame,
    eps: f64,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    let acts = net.forward_trace(x);
    let (_, gout) = loss_with_grad(acts.last().expect("trace"), gt)?;
    let mut grads = net.zero_grads();
    net.backward(&acts, &gout, &mut grads);

    // flat parameter space: (layer index, weight?, offset)
    let mut slots: Vec<(usize, bool, usize)> = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        slots.push((i, true, layer.n_weights()));
        slots.push((i, false, layer.n_biases()));
    }
    let total: usize = slots.iter().map(|s| s.2).sum();
    if total == 0 {
        return Err(Error::Input("network has no parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = net.clone();
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < n_probes.min(total * 4) && attempts < n_probes * 20 {
        attempts += 1;
        let flat = rng.random_range(0..total);
        // locate the slot
        let mut acc = 0;
        let mut located = None;
        for &(li, is_w, len) in &slots {
            if flat < acc + len {
                located = Some((li, is_w, flat - acc));
                break;
            }
            acc += len;
        }
        let (li, is_w, off) = located.expect("flat index in range");
        let analytic = if is_w {
            grads.weights[li][off]
        } else {
            grads.biases[li][off]
        };
        let read = |n: &Net| match (&n.layers[li], is_w) {
            (Layer::Conv(c), true) => c.weights[off],
            (Layer::Conv(c), false) => c.bias[off],
            (Layer::Fc(f), true) => f.weights[off],
            (Layer::Fc(f), false) => f.bias[off],
            _ => unreachable!("parameterless layer has no slots"),
        };
        let write = |n: &mut Net, v: f64| match (&mut n.layers[li], is_w) {
            (Layer::Conv(c), true) => c.weights[off] = v,
            (Layer::Conv(c), false) => c.bias[off] = v,
            (Layer::Fc(f), true) => f.weights[off] = v,
            (Layer::Fc(f), false) => f.bias[off] = v,
            _ => unreachable!(),
        };
        let orig = read(&work);
        write(&mut work, orig + eps);
        let (up, signs_up) = forward_loss_signs(&work, x, gt)?;
        write(&mut work, orig - eps);
        let (dn, signs_dn) = forward_loss_signs(&work, x, gt)?;
        write(&mut work, orig);
        if signs_up != signs_dn {
            continue; // kink straddle: resample
        }
        let numeric = (up - dn) / (2.0 * eps);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::Input(
            "gradient check could not find any kink-free probes".into(),
        ));
    }
    Ok(max_rel)
}
