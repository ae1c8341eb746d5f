//! Link weighting and fusion: distance- and orientation-derived link
//! weights, weighted summation of per-link amplitude/phase vectors, and
//! sliding-window assembly of normalized network inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::csi::{Link, LinkId};
use crate::error::{Error, Result};
use crate::geometry::boundary_normal;
use crate::tensor::Tensor3;
use crate::vec2::Vec2;

/// Floor applied to point-to-link distances before inversion.
const DISTANCE_CLAMP_M: f64 = 0.1;
/// Additive floor in orientation weights so no link is fully silenced.
const ORIENTATION_FLOOR: f64 = 0.05;
/// Variance floor for window normalization.
const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Distance,
    Orientation,
}

/// Nonnegative per-link weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: BTreeMap<LinkId, f64>,
    pub kind: WeightKind,
}

impl WeightVector {
    pub fn new(raw: BTreeMap<LinkId, f64>, kind: WeightKind) -> Result<WeightVector> {
        if raw.is_empty() {
            return Err(Error::Input("weight vector needs at least one link".into()));
        }
        if raw.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Input("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.values().sum();
        if total <= 0.0 {
            return Err(Error::Input("weights sum to zero".into()));
        }
        let weights = raw.into_iter().map(|(k, w)| (k, w / total)).collect();
        Ok(WeightVector { weights, kind })
    }

    pub fn get(&self, id: LinkId) -> Option<f64> {
        self.weights.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkId, &f64)> {
        self.weights.iter()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Inverse point-to-segment distance weights (clamped below at 0.1 m).
pub fn distance_weights(user_pos: Vec2, links: &[Link]) -> Result<WeightVector> {
    let raw = links
        .iter()
        .map(|l| {
            let d = user_pos
                .distance_to_segment(l.tx_pos, l.rx_pos)
                .max(DISTANCE_CLAMP_M);
            (l.id, 1.0 / d)
        })
        .collect();
    WeightVector::new(raw, WeightKind::Distance)
}

/// Weights ∝ ε + |cos(φ − β_l)| where β_l is the boundary-normal angle of
/// link l at the user. Links with undefined normals (user on the segment)
/// receive the neutral mid value.
pub fn orientation_weights(phi: f64, user_pos: Vec2, links: &[Link]) -> Result<WeightVector> {
    let raw = links
        .iter()
        .map(|l| {
            let align = match boundary_normal(user_pos, l) {
                Ok(n) => (phi - n.angle()).cos().abs(),
                Err(_) => 0.5,
            };
            (l.id, ORIENTATION_FLOOR + align)
        })
        .collect();
    WeightVector::new(raw, WeightKind::Orientation)
}

/// Weighted sum of per-link (amplitude, phase) vector pairs.
pub fn fuse_links(
    per_link: &BTreeMap<LinkId, (Vec<f64>, Vec<f64>)>,
    w: &WeightVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if per_link.len() != w.len() || per_link.keys().any(|id| w.get(*id).is_none()) {
        return Err(Error::Input(
            "weights must cover exactly the provided links".into(),
        ));
    }
    let k = per_link
        .values()
        .next()
        .map(|(a, _)| a.len())
        .ok_or_else(|| Error::Input("no links to fuse".into()))?;
    let mut amp = vec![0.0; k];
    let mut phase = vec![0.0; k];
    for (id, (a, p)) in per_link {
        if a.len() != k || p.len() != k {
            return Err(Error::Shape {
                expected: format!("{k} subcarriers"),
                got: format!("{}/{}", a.len(), p.len()),
            });
        }
        let w = w.get(*id).expect("coverage checked above");
        for i in 0..k {
            amp[i] += w * a[i];
            phase[i] += w * p[i];
        }
    }
    Ok((amp, phase))
}

/// One network input window: (T, K, C) values normalized per channel to
/// zero mean and unit variance, with the statistics kept for inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub data: Tensor3,
    /// Per-channel (mean, sigma) used for normalization; sigma carries the
    /// 1e-8 floor actually applied.
    pub stats: Vec<(f64, f64)>,
}

impl InputTensor {
    pub fn denormalize(&self) -> Tensor3 {
        let mut out = self.data.clone();
        for y in 0..out.h {
            for x in 0..out.w {
                for c in 0..out.c {
                    let (mean, sigma) = self.stats[c];
                    let v = out.get(y, x, c) * sigma + mean;
                    out.set(y, x, c, v);
                }
            }
        }
        out
    }
}

/// Slides a window of `t_len` steps (given stride) over a sequence of
/// per-timestep channel stacks (`samples[t][c]` is a length-K vector) and
/// normalizes each window per channel.
pub fn build_window(
    samples: &[Vec<Vec<f64>>],
    t_len: usize,
    stride: usize,
) -> Result<Vec<InputTensor>> {
    if t_len < 1 || stride < 1 {
        return Err(Error::Config("window length and stride must be >= 1".into()));
    }
    if samples.len() < t_len {
        return Err(Error::Input(format!(
            "sequence of {} steps is shorter than the window ({t_len})",
            samples.len()
        )));
    }
    let c_count = samples[0].len();
    let k = samples[0].first().map_or(0, Vec::len);
    for s in samples {
        if s.len() != c_count || s.iter().any(|ch| ch.len() != k) {
            return Err(Error::Shape {
                expected: format!("{c_count} channels x {k}"),
                got: format!("{} channels", s.len()),
            });
        }
    }
    let count = (samples.len() - t_len) / stride + 1;
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * stride;
        let mut data = Tensor3::zeros(t_len, k, c_count);
        let mut stats = Vec::with_capacity(c_count);
        for c in 0..c_count {
            let mut mean = 0.0;
            for t in 0..t_len {
                for x in 0..k {
                    mean += samples[start + t][c][x];
                }
            }
            mean /= (t_len * k) as f64;
            let mut var = 0.0;
            for t in 0..t_len {
                for x in 0..k {
                    let d = samples[start + t][c][x] - mean;
                    var += d * d;
                }
            }
            var /= (t_len * k) as f64;
            let sigma = var.sqrt().max(SIGMA_FLOOR);
            for t in 0..t_len {
                for x in 0..k {
                    data.set(t, x, c, (samples[start + t][c][x] - mean) / sigma);
                }
            }
            stats.push((mean, sigma));
        }
        out.push(InputTensor { data, stats });
    }
    Ok(out)
}
