//! Encoder–decoder network mapping fused CSI windows to per-joint heatmaps.
//!
//! Encoder: three blocks of {3×3 stride-2 conv, 1×1 stride-1 conv}, ReLU
//! after every layer, then a fully connected re-grid to a latent volume.
//! Decoder: seven layers — two 1×1 then five 3×3, all stride 1, ReLU
//! between and a linear final layer — with nearest-neighbor ×2 upsampling
//! inserted before decoder layers 3 and 5 to reach the output resolution.
//!
//! Keypoints are decoded from heatmaps by a soft-argmax (coordinate
//! expectation under the positive part of the map), which makes the mean
//! Euclidean keypoint error differentiable.

pub mod checkpoint;
pub mod layers;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonFrame;
use crate::tensor::Tensor3;
pub use layers::{Conv2d, Fc, Layer};
pub use train::{gradient_check, train, EpochMetrics, TrainConfig};

/// Architecture hyperparameters. Layer kinds, counts, and strides are fixed
/// by construction; only the widths and sizes vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_t: usize,
    pub input_k: usize,
    pub input_c: usize,
    /// Output channels of the three encoder blocks.
    pub encoder_widths: [usize; 3],
    /// Latent grid (H0, W0, C0) produced by the fully connected layer.
    pub latent: (usize, usize, usize),
    /// Output channels of decoder layers 1–6 (layer 7 emits `n_joints`).
    pub decoder_widths: [usize; 6],
    pub out_h: usize,
    pub out_w: usize,
    pub n_joints: usize,
    /// Ground-truth heatmap Gaussian width in pixels.
    pub heatmap_sigma_px: f64,
}

impl NetConfig {
    /// Desk-scale defaults: 16×30 windows with 4 fused channels in,
    /// 32×32×14 heatmaps out.
    pub fn desk() -> NetConfig {
        NetConfig {
            input_t: 16,
            input_k: 30,
            input_c: 4,
            encoder_widths: [8, 16, 24],
            latent: (8, 8, 8),
            decoder_widths: [16, 16, 16, 16, 16, 16],
            out_h: 32,
            out_w: 32,
            n_joints: crate::skeleton::N_JOINTS,
            heatmap_sigma_px: 1.5,
        }
    }

    /// Desk config with the single-scale (2-channel) input.
    pub fn desk_single_scale() -> NetConfig {
        NetConfig {
            input_c: 2,
            ..NetConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.input_t,
            self.input_k,
            self.input_c,
            self.latent.0,
            self.latent.1,
            self.latent.2,
            self.out_h,
            self.out_w,
            self.n_joints,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("network dimensions must be nonzero".into()));
        }
        if self.encoder_widths.iter().any(|&w| w == 0)
            || self.decoder_widths.iter().any(|&w| w == 0)
        {
            return Err(Error::Config("channel widths must be nonzero".into()));
        }
        // two ×2 upsamplings between the latent grid and the output
        if self.out_h != 4 * self.latent.0 || self.out_w != 4 * self.latent.1 {
            return Err(Error::Config(format!(
                "output {}x{} must be 4x the latent grid {}x{}",
                self.out_h, self.out_w, self.latent.0, self.latent.1
            )));
        }
        if !(self.heatmap_sigma_px > 0.0) {
            return Err(Error::Config("heatmap sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Gradients matching a network's parameter layout.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGrads {
    fn zeros_like(net: &Net) -> NetGrads {
        NetGrads {
            weights: net.layers.iter().map(|l| vec![0.0; l.n_weights()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.n_biases()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub layers: Vec<Layer>,
    pub input_shape: (usize, usize, usize),
    pub config: Option<NetConfig>,
}

impl Net {
    /// Builds the standard architecture with deterministic fan-in-scaled
    /// uniform initialization (biases zero).
    pub fn new(cfg: &NetConfig, seed: u64) -> Result<Net> {
        cfg.validate()?;
        let mut layers = Vec::new();
        let mut c = cfg.input_c;
        for &w in &cfg.encoder_widths {
            layers.push(Layer::Conv(Conv2d::new(3, 2, c, w)));
            layers.push(Layer::Relu);
            layers.push(Layer::Conv(Conv2d::new(1, 1, w, w)));
            layers.push(Layer::Relu);
            c = w;
        }
        let mut h = cfg.input_t;
        let mut w = cfg.input_k;
        for _ in 0..3 {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        layers.push(Layer::Fc(Fc::new((h, w, c), cfg.latent)));
        layers.push(Layer::Relu);
        let mut c = cfg.latent.2;
        for (i, &cw) in cfg.decoder_widths.iter().enumerate() {
            // upsample before decoder layers 3 and 5 (0-indexed 2 and 4)
            if i == 2 || i == 4 {
                layers.push(Layer::Upsample2);
            }
            let kernel = if i < 2 { 1 } else { 3 };
            layers.push(Layer::Conv(Conv2d::new(kernel, 1, c, cw)));
            layers.push(Layer::Relu);
            c = cw;
        }
        layers.push(Layer::Conv(Conv2d::new(3, 1, c, cfg.n_joints)));
        let mut net = Net {
            layers,
            input_shape: (cfg.input_t, cfg.input_k, cfg.input_c),
            config: Some(cfg.clone()),
        };
        net.init_params(seed);
        debug_assert_eq!(
            net.output_shape(),
            (cfg.out_h, cfg.out_w, cfg.n_joints),
            "architecture does not reach the configured output shape"
        );
        Ok(net)
    }

    /// Builds a network from an explicit layer stack (used by probes and
    /// tests). Such networks carry no checkpointable config.
    pub fn from_layers(layers: Vec<Layer>, input_shape: (usize, usize, usize)) -> Net {
        Net {
            layers,
            input_shape,
            config: None,
        }
    }

    fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(conv) => {
                    let bound = (1.0 / conv.fan_in() as f64).sqrt();
                    for v in conv.weights.iter_mut() {
                        *v = rng.random_range(-bound..bound);
                    }
                    conv.bias.fill(0.0);
                }
                Layer::Fc(fc) => {
                    let bound = (1.0 / fc.n_in() as f64).sqrt();
                    for v in fc.weights.iter_mut() {
                        *v = rng.random_range(-bound..bound);
                    }
                    fc.bias.fill(0.0);
                }
                _ => {}
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.n_weights() + l.n_biases())
            .sum()
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        let (mut h, mut w, mut c) = self.input_shape;
        for layer in &self.layers {
            let s = layer.out_shape(h, w, c);
            h = s.0;
            w = s.1;
            c = s.2;
        }
        (h, w, c)
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        assert_eq!(x.shape(), self.input_shape, "network input shape");
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur);
        }
        cur
    }

    /// Forward pass keeping every intermediate activation (index 0 is the
    /// input; index i+1 is layer i's output).
    pub fn forward_trace(&self, x: &Tensor3) -> Vec<Tensor3> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("nonempty"));
            acts.push(next);
        }
        acts
    }

    /// Backpropagates `gout` (gradient at the output) through a recorded
    /// trace, accumulating parameter gradients into `grads`.
    pub fn backward(&self, acts: &[Tensor3], gout: &Tensor3, grads: &mut NetGrads) {
        let mut g = gout.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(
                &acts[i],
                &acts[i + 1],
                &g,
                &mut grads.weights[i],
                &mut grads.biases[i],
            );
        }
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads::zeros_like(self)
    }

    /// Name of the first layer whose traced output is non-finite.
    pub fn first_nonfinite_layer(&self, acts: &[Tensor3]) -> Option<String> {
        for (i, act) in acts.iter().skip(1).enumerate() {
            if !act.all_finite() {
                return Some(format!("layer{}:{}", i, self.layers[i].kind_name()));
            }
        }
        None
    }

    /// Flat views over all parameters in fixed layer order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.weights.as_mut_slice());
                    out.push(c.bias.as_mut_slice());
                }
                Layer::Fc(f) => {
                    out.push(f.weights.as_mut_slice());
                    out.push(f.bias.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }
}

/// Coordinate expectation under the positive part of a heatmap channel.
/// A (near-)nonpositive map decodes to the image center.
pub fn soft_argmax(pred: &Tensor3, joint: usize) -> [f64; 2] {
    let mut mass = 0.0;
    let mut ex = 0.0;
    let mut ey = 0.0;
    for y in 0..pred.h {
        for x in 0..pred.w {
            let v = pred.get(y, x, joint).max(0.0);
            mass += v;
            ex += v * x as f64;
            ey += v * y as f64;
        }
    }
    if mass < 1e-12 {
        [(pred.w - 1) as f64 / 2.0, (pred.h - 1) as f64 / 2.0]
    } else {
        [ex / mass, ey / mass]
    }
}

/// Loss value plus the reported keypoint error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Mean soft-argmax keypoint distance plus the heatmap stabilizer.
    pub loss: f64,
    /// Mean Euclidean keypoint error in pixels (the first term alone).
    pub mean_joint_err_px: f64,
}

/// Weight of the pixelwise heatmap L2 stabilizer.
const HEATMAP_L2_WEIGHT: f64 = 0.1;

/// Mean soft-argmax keypoint distance to the ground-truth keypoints (over
/// in-frame joints) plus `0.1 ×` the per-joint summed squared heatmap
/// difference (over all joints).
pub fn loss(pred: &Tensor3, gt: &SkeletonFrame) -> Result<LossValue> {
    loss_impl(pred, gt, None)
}

/// Like [`loss`] but also produces dLoss/dPred.
pub fn loss_with_grad(pred: &Tensor3, gt: &SkeletonFrame) -> Result<(LossValue, Tensor3)> {
    let mut grad = Tensor3::zeros(pred.h, pred.w, pred.c);
    let value = loss_impl(pred, gt, Some(&mut grad))?;
    Ok((value, grad))
}

fn loss_impl(pred: &Tensor3, gt: &SkeletonFrame, mut grad: Option<&mut Tensor3>) -> Result<LossValue> {
    let j_total = gt.n_joints();
    if pred.c != j_total || pred.h != gt.height() || pred.w != gt.width() {
        return Err(Error::Shape {
            expected: format!("{}x{}x{}", gt.height(), gt.width(), j_total),
            got: format!("{}x{}x{}", pred.h, pred.w, pred.c),
        });
    }
    let in_frame: Vec<usize> = (0..j_total).filter(|&j| !gt.off_frame[j]).collect();
    let j_eff = in_frame.len().max(1) as f64;

    let mut joint_err = 0.0;
    for &j in &in_frame {
        let mut mass = 0.0;
        let mut ex = 0.0;
        let mut ey = 0.0;
        for y in 0..pred.h {
            for x in 0..pred.w {
                let v = pred.get(y, x, j).max(0.0);
                mass += v;
                ex += v * x as f64;
                ey += v * y as f64;
            }
        }
        let (px, py, degenerate) = if mass < 1e-12 {
            (
                (pred.w - 1) as f64 / 2.0,
                (pred.h - 1) as f64 / 2.0,
                true,
            )
        } else {
            (ex / mass, ey / mass, false)
        };
        let dx = px - gt.keypoints[j][0];
        let dy = py - gt.keypoints[j][1];
        let dist = dx.hypot(dy);
        joint_err += dist;
        if let Some(grad) = grad.as_deref_mut() {
            if !degenerate && dist > 1e-12 {
                let ux = dx / dist / (j_eff * mass);
                let uy = dy / dist / (j_eff * mass);
                for y in 0..pred.h {
                    for x in 0..pred.w {
                        if pred.get(y, x, j) > 0.0 {
                            let g = ux * (x as f64 - px) + uy * (y as f64 - py);
                            let i = grad.idx(y, x, j);
                            grad.data[i] += g;
                        }
                    }
                }
            }
        }
    }
    joint_err /= j_eff;

    let mut l2 = 0.0;
    for j in 0..j_total {
        for y in 0..pred.h {
            for x in 0..pred.w {
                let d = pred.get(y, x, j) - gt.heatmaps.get(y, x, j);
                l2 += d * d;
                if let Some(grad) = grad.as_deref_mut() {
                    let i = grad.idx(y, x, j);
                    grad.data[i] += HEATMAP_L2_WEIGHT * 2.0 * d / j_total as f64;
                }
            }
        }
    }
    l2 /= j_total as f64;

    Ok(LossValue {
        loss: joint_err + HEATMAP_L2_WEIGHT * l2,
        mean_joint_err_px: joint_err,
    })
}
