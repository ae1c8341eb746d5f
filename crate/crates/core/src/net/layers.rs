//! Layer kernels: zero-padded channel-last convolution, fully connected
//! re-gridding, ReLU, and nearest-neighbor upsampling, each with explicit
//! backward passes.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor3;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..a.len() {
        s += a[j] * b[j];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// 2D convolution, kernel k×k (odd), zero padding (k−1)/2, square stride.
/// Output spatial dims are ceil(in/stride). Weight layout: per output
/// channel, per kernel row, a contiguous `k·c_in` slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub kernel: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(kernel: usize, stride: usize, c_in: usize, c_out: usize) -> Conv2d {
        assert!(kernel % 2 == 1, "kernel must be odd");
        Conv2d {
            kernel,
            stride,
            c_in,
            c_out,
            weights: vec![0.0; c_out * kernel * kernel * c_in],
            bias: vec![0.0; c_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.kernel * self.kernel * self.c_in
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride), w.div_ceil(self.stride))
    }

    #[inline]
    fn w_row(&self, co: usize, ky: usize) -> &[f64] {
        let row = self.kernel * self.c_in;
        let start = (co * self.kernel + ky) * row;
        &self.weights[start..start + row]
    }

    fn pad_input(&self, x: &Tensor3) -> Tensor3 {
        let p = (self.kernel - 1) / 2;
        if p == 0 {
            return x.clone();
        }
        let mut padded = Tensor3::zeros(x.h + 2 * p, x.w + 2 * p, x.c);
        for y in 0..x.h {
            let src = (y * x.w) * x.c;
            let dst = ((y + p) * padded.w + p) * x.c;
            padded.data[dst..dst + x.w * x.c].copy_from_slice(&x.data[src..src + x.w * x.c]);
        }
        padded
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        assert_eq!(x.c, self.c_in, "conv input channels");
        let (oh, ow) = self.out_dims(x.h, x.w);
        let padded = self.pad_input(x);
        let mut out = Tensor3::zeros(oh, ow, self.c_out);
        let row_len = self.kernel * self.c_in;
        for y in 0..oh {
            for xo in 0..ow {
                let base = (y * ow + xo) * self.c_out;
                for co in 0..self.c_out {
                    let mut acc = self.bias[co];
                    for ky in 0..self.kernel {
                        let py = y * self.stride + ky;
                        let start = (py * padded.w + xo * self.stride) * self.c_in;
                        acc += dot(&padded.data[start..start + row_len], self.w_row(co, ky));
                    }
                    out.data[base + co] = acc;
                }
            }
        }
        out
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(
        &self,
        x: &Tensor3,
        gout: &Tensor3,
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Tensor3 {
        let (oh, ow) = self.out_dims(x.h, x.w);
        debug_assert_eq!((gout.h, gout.w, gout.c), (oh, ow, self.c_out));
        let p = (self.kernel - 1) / 2;
        let padded = self.pad_input(x);
        let mut gpad = Tensor3::zeros(padded.h, padded.w, padded.c);
        let row_len = self.kernel * self.c_in;
        for y in 0..oh {
            for xo in 0..ow {
                let base = (y * ow + xo) * self.c_out;
                for co in 0..self.c_out {
                    let g = gout.data[base + co];
                    if g == 0.0 {
                        continue;
                    }
                    gb[co] += g;
                    for ky in 0..self.kernel {
                        let py = y * self.stride + ky;
                        let start = (py * padded.w + xo * self.stride) * self.c_in;
                        let wstart = (co * self.kernel + ky) * row_len;
                        axpy(
                            g,
                            &padded.data[start..start + row_len],
                            &mut gw[wstart..wstart + row_len],
                        );
                        axpy(
                            g,
                            self.w_row(co, ky),
                            &mut gpad.data[start..start + row_len],
                        );
                    }
                }
            }
        }
        if p == 0 {
            return gpad;
        }
        let mut gin = Tensor3::zeros(x.h, x.w, x.c);
        for y in 0..x.h {
            let src = ((y + p) * gpad.w + p) * x.c;
            let dst = (y * x.w) * x.c;
            gin.data[dst..dst + x.w * x.c].copy_from_slice(&gpad.data[src..src + x.w * x.c]);
        }
        gin
    }
}

/// Fully connected re-gridding from one (h, w, c) volume to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fc {
    pub in_shape: (usize, usize, usize),
    pub out_shape: (usize, usize, usize),
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Fc {
    pub fn new(in_shape: (usize, usize, usize), out_shape: (usize, usize, usize)) -> Fc {
        let n_in = in_shape.0 * in_shape.1 * in_shape.2;
        let n_out = out_shape.0 * out_shape.1 * out_shape.2;
        Fc {
            in_shape,
            out_shape,
            weights: vec![0.0; n_out * n_in],
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.in_shape.0 * self.in_shape.1 * self.in_shape.2
    }

    pub fn n_out(&self) -> usize {
        self.out_shape.0 * self.out_shape.1 * self.out_shape.2
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        assert_eq!(x.shape(), self.in_shape, "fc input shape");
        let n_in = self.n_in();
        let n_out = self.n_out();
        let mut data = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let row = &self.weights[o * n_in..(o + 1) * n_in];
            data.push(self.bias[o] + dot(row, &x.data));
        }
        Tensor3::from_vec(self.out_shape.0, self.out_shape.1, self.out_shape.2, data)
    }

    pub fn backward(
        &self,
        x: &Tensor3,
        gout: &Tensor3,
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Tensor3 {
        let n_in = self.n_in();
        let n_out = self.n_out();
        let mut gin = vec![0.0; n_in];
        for o in 0..n_out {
            let g = gout.data[o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            axpy(g, &x.data, &mut gw[o * n_in..(o + 1) * n_in]);
            axpy(g, &self.weights[o * n_in..(o + 1) * n_in], &mut gin);
        }
        Tensor3::from_vec(self.in_shape.0, self.in_shape.1, self.in_shape.2, gin)
    }
}

/// A network layer. ReLU and upsampling carry no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv(Conv2d),
    Fc(Fc),
    Relu,
    Upsample2,
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Fc(_) => "fc",
            Layer::Relu => "relu",
            Layer::Upsample2 => "upsample2",
        }
    }

    pub fn out_shape(&self, h: usize, w: usize, c: usize) -> (usize, usize, usize) {
        match self {
            Layer::Conv(conv) => {
                let (oh, ow) = conv.out_dims(h, w);
                (oh, ow, conv.c_out)
            }
            Layer::Fc(fc) => fc.out_shape,
            Layer::Relu => (h, w, c),
            Layer::Upsample2 => (2 * h, 2 * w, c),
        }
    }

    pub fn n_weights(&self) -> usize {
        match self {
            Layer::Conv(c) => c.weights.len(),
            Layer::Fc(f) => f.weights.len(),
            _ => 0,
        }
    }

    pub fn n_biases(&self) -> usize {
        match self {
            Layer::Conv(c) => c.bias.len(),
            Layer::Fc(f) => f.bias.len(),
            _ => 0,
        }
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        match self {
            Layer::Conv(conv) => conv.forward(x),
            Layer::Fc(fc) => fc.forward(x),
            Layer::Relu => {
                let mut out = x.clone();
                for v in out.data.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                out
            }
            Layer::Upsample2 => {
                let mut out = Tensor3::zeros(2 * x.h, 2 * x.w, x.c);
                for y in 0..x.h {
                    for xo in 0..x.w {
                        let src = (y * x.w + xo) * x.c;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let dst = ((2 * y + dy) * out.w + 2 * xo + dx) * x.c;
                            out.data[dst..dst + x.c]
                                .copy_from_slice(&x.data[src..src + x.c]);
                        }
                    }
                }
                out
            }
        }
    }

    /// Backward: `x` is this layer's input, `out` its forward output.
    pub fn backward(
        &self,
        x: &Tensor3,
        out: &Tensor3,
        gout: &Tensor3,
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Tensor3 {
        match self {
            Layer::Conv(conv) => conv.backward(x, gout, gw, gb),
            Layer::Fc(fc) => fc.backward(x, gout, gw, gb),
            Layer::Relu => {
                let mut gin = gout.clone();
                for (g, &o) in gin.data.iter_mut().zip(&out.data) {
                    if o <= 0.0 {
                        *g = 0.0;
                    }
                }
                gin
            }
            Layer::Upsample2 => {
                let mut gin = Tensor3::zeros(x.h, x.w, x.c);
                for y in 0..x.h {
                    for xo in 0..x.w {
                        let dst = (y * x.w + xo) * x.c;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let src = ((2 * y + dy) * gout.w + 2 * xo + dx) * x.c;
                            for c in 0..x.c {
                                gin.data[dst + c] += gout.data[src + c];
                            }
                        }
                    }
                }
                gin
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(h: usize, w: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor3 {
        let mut t = Tensor3::zeros(h, w, c);
        for v in t.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        t
    }

    #[test]
    fn conv_identity_kernel() {
        // 1x1 conv with identity weights reproduces the input
        let mut conv = Conv2d::new(1, 1, 3, 3);
        for c in 0..3 {
            conv.weights[c * 3 + c] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(4, 5, 3, &mut rng);
        let y = conv.forward(&x);
        assert_eq!(x.data, y.data);
    }

    #[test]
    fn conv_stride_two_ceil_dims() {
        let conv = Conv2d::new(3, 2, 2, 4);
        assert_eq!(conv.out_dims(16, 30), (8, 15));
        assert_eq!(conv.out_dims(15, 7), (8, 4));
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut conv = Conv2d::new(3, 2, 2, 3);
        for v in conv.weights.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in conv.bias.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let x = random_tensor(5, 7, 2, &mut rng);
        let y = conv.forward(&x);
        let (oh, ow) = conv.out_dims(5, 7);
        for yo in 0..oh {
            for xo in 0..ow {
                for co in 0..3 {
                    let mut acc = conv.bias[co];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = (yo * 2 + ky) as i64 - 1;
                            let ix = (xo * 2 + kx) as i64 - 1;
                            if iy < 0 || ix < 0 || iy >= 5 || ix >= 7 {
                                continue;
                            }
                            for ci in 0..2 {
                                let w = conv.weights
                                    [((co * 3 + ky) * 3 + kx) * 2 + ci];
                                acc += w * x.get(iy as usize, ix as usize, ci);
                            }
                        }
                    }
                    assert!((y.get(yo, xo, co) - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut conv = Conv2d::new(3, 1, 2, 2);
        for v in conv.weights.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let x = random_tensor(4, 4, 2, &mut rng);
        // scalar objective: sum of outputs weighted by fixed random field
        let w_field = random_tensor(4, 4, 2, &mut rng);
        let objective = |c: &Conv2d, x: &Tensor3| -> f64 {
            c.forward(x)
                .data
                .iter()
                .zip(&w_field.data)
                .map(|(a, b)| a * b)
                .sum()
        };
        let out = conv.forward(&x);
        let gout = w_field.clone();
        let mut gw = vec![0.0; conv.weights.len()];
        let mut gb = vec![0.0; conv.bias.len()];
        let gin = conv.backward(&x, &gout, &mut gw, &mut gb);
        let _ = out;
        let eps = 1e-6;
        // weight gradient spot checks
        for idx in [0usize, 5, 17, 31] {
            let mut cp = conv.clone();
            cp.weights[idx] += eps;
            let up = objective(&cp, &x);
            cp.weights[idx] -= 2.0 * eps;
            let dn = objective(&cp, &x);
            let num = (up - dn) / (2.0 * eps);
            assert!((num - gw[idx]).abs() < 1e-6, "w[{idx}]: {num} vs {}", gw[idx]);
        }
        // input gradient spot checks
        for idx in [0usize, 7, 13, 30] {
            let mut xp = x.clone();
            xp.data[idx] += eps;
            let up = objective(&conv, &xp);
            xp.data[idx] -= 2.0 * eps;
            let dn = objective(&conv, &xp);
            let num = (up - dn) / (2.0 * eps);
            assert!((num - gin.data[idx]).abs() < 1e-6);
        }
    }

    #[test]
    fn upsample_roundtrip_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(3, 3, 2, &mut rng);
        let layer = Layer::Upsample2;
        let out = layer.forward(&x);
        assert_eq!(out.shape(), (6, 6, 2));
        assert_eq!(out.get(5, 5, 1), x.get(2, 2, 1));
        let gout = random_tensor(6, 6, 2, &mut rng);
        let gin = layer.backward(&x, &out, &gout, &mut [], &mut []);
        // each input grad is the sum of its 2x2 replica grads
        let expect = gout.get(2, 2, 0) + gout.get(2, 3, 0) + gout.get(3, 2, 0) + gout.get(3, 3, 0);
        assert!((gin.get(1, 1, 0) - expect).abs() < 1e-12);
    }
}
