//! Image quality metrics: anisotropic total variation, SSIM, and a
//! no-reference naturalness score built from MSCN/AGGD statistics scored as
//! Mahalanobis distance to a reference corpus (higher = less natural).

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linalg::solve_spd_real;
use crate::vec2::Vec2;

/// Mean absolute forward difference (|Δx| + |Δy|) over interior pixels.
pub fn total_variation(img: &GrayImage) -> Result<f64> {
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return Err(Error::Input(format!(
            "total variation needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let mut sum = 0.0;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let v = img.get(x, y);
            sum += (img.get(x + 1, y) - v).abs() + (img.get(x, y + 1) - v).abs();
        }
    }
    Ok(sum / ((w - 1) * (h - 1)) as f64)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size - 1) as f64 / 2.0;
    let mut w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Standard SSIM: 11×11 Gaussian window (σ 1.5), stabilizers K1 = 0.01 and
/// K2 = 0.03, dynamic range taken from the inputs, mean over valid windows.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Shape {
            expected: format!("{}x{}", a.width(), a.height()),
            got: format!("{}x{}", b.width(), b.height()),
        });
    }
    let (w, h) = (a.width(), a.height());
    const WIN: usize = 11;
    if w < WIN || h < WIN {
        return Err(Error::Input(format!(
            "ssim needs at least {WIN}x{WIN} pixels, got {w}x{h}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in a.pixels().iter().chain(b.pixels()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let range = (hi - lo).max(1e-6);
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let win1d = gaussian_window(WIN, 1.5);
    let win: Vec<f64> = (0..WIN * WIN)
        .map(|i| win1d[i / WIN] * win1d[i % WIN])
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - WIN {
        for x0 in 0..=w - WIN {
            let (mut ma, mut mb) = (0.0, 0.0);
            let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
            let mut wi = 0;
            for dy in 0..WIN {
                for dx in 0..WIN {
                    let pa = a.get(x0 + dx, y0 + dy);
                    let pb = b.get(x0 + dx, y0 + dy);
                    let wv = win[wi];
                    wi += 1;
                    ma += wv * pa;
                    mb += wv * pb;
                    saa += wv * pa * pa;
                    sbb += wv * pb * pb;
                    sab += wv * pa * pb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean-subtracted contrast-normalized coefficients: (I − μ)/(σ + 1) with
/// local Gaussian-weighted moments (7×7 window, σ = 7/6, border weights
/// renormalized over the valid support). The `+1` stabilizer assumes the
/// classic 8-bit luminance range, so [0, 1] pixels are scaled by 255 first.
pub fn mscn(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    if w < 16 || h < 16 {
        return Err(Error::Input(format!(
            "mscn needs at least 16x16 pixels, got {w}x{h}"
        )));
    }
    let win = gaussian_window(7, 7.0 / 6.0);
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut wsum = 0.0;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for dy in 0..7usize {
                let yy = y as i64 + dy as i64 - 3;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                for dx in 0..7usize {
                    let xx = x as i64 + dx as i64 - 3;
                    if xx < 0 || xx >= w as i64 {
                        continue;
                    }
                    let wv = win[dy] * win[dx];
                    let p = 255.0 * img.get(xx as usize, yy as usize);
                    wsum += wv;
                    m1 += wv * p;
                    m2 += wv * p * p;
                }
            }
            let mu = m1 / wsum;
            let var = (m2 / wsum - mu * mu).max(0.0);
            out.set(x, y, (255.0 * img.get(x, y) - mu) / (var.sqrt() + 1.0));
        }
    }
    Ok(out)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Generating ratio ρ(α) = Γ(2/α)² / (Γ(1/α)·Γ(3/α)), monotone in α.
fn rho(alpha: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / alpha) - ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha)).exp()
}

const ALPHA_MIN: f64 = 0.05;
const ALPHA_MAX: f64 = 10.0;

fn rho_table() -> &'static Vec<(f64, f64)> {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 6000;
        (0..=n)
            .map(|i| {
                let a = ALPHA_MIN + (ALPHA_MAX - ALPHA_MIN) * i as f64 / n as f64;
                (a, rho(a))
            })
            .collect()
    })
}

/// Inverts ρ(α) = r by binary search over the precomputed table.
fn invert_rho(r: f64) -> f64 {
    let table = rho_table();
    if r <= table[0].1 {
        return ALPHA_MIN;
    }
    if r >= table[table.len() - 1].1 {
        return ALPHA_MAX;
    }
    let idx = table.partition_point(|&(_, v)| v < r);
    let (a0, r0) = table[idx - 1];
    let (a1, r1) = table[idx];
    if r1 > r0 {
        a0 + (a1 - a0) * (r - r0) / (r1 - r0)
    } else {
        a0
    }
}

/// Symmetric generalized Gaussian fit by moment matching.
pub fn ggd_fit(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 100 {
        return Err(Error::Input("ggd fit needs at least 100 samples".into()));
    }
    let n = samples.len() as f64;
    let mean_abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let mean_sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if mean_sq <= 0.0 {
        return Err(Error::Input("ggd fit on all-zero samples".into()));
    }
    let alpha = invert_rho(mean_abs * mean_abs / mean_sq);
    Ok((alpha, mean_sq))
}

/// Asymmetric generalized Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub mean: f64,
}

/// Moment-matching AGGD estimator: side deviations split at zero, shape
/// from the generalized ratio, mean from the fitted asymmetry.
pub fn aggd_fit(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < 100 {
        return Err(Error::Input("aggd fit needs at least 100 samples".into()));
    }
    let mut n_left = 0usize;
    let mut n_right = 0usize;
    let mut sq_left = 0.0;
    let mut sq_right = 0.0;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for &x in samples {
        abs_sum += x.abs();
        sq_sum += x * x;
        if x < 0.0 {
            n_left += 1;
            sq_left += x * x;
        } else if x > 0.0 {
            n_right += 1;
            sq_right += x * x;
        }
    }
    if sq_sum <= 0.0 {
        return Err(Error::Input("aggd fit on all-zero samples".into()));
    }
    let n = samples.len() as f64;
    let sigma_l = if n_left > 0 { (sq_left / n_left as f64).sqrt() } else { 1e-9 };
    let sigma_r = if n_right > 0 { (sq_right / n_right as f64).sqrt() } else { 1e-9 };
    let gamma_ratio = sigma_l / sigma_r;
    let r = (abs_sum / n).powi(2) / (sq_sum / n);
    let r_hat = r * (gamma_ratio.powi(3) + 1.0) * (gamma_ratio + 1.0)
        / (gamma_ratio * gamma_ratio + 1.0).powi(2);
    let alpha = invert_rho(r_hat);
    let mean = (sigma_r - sigma_l) * gamma(2.0 / alpha) / gamma(1.0 / alpha);
    Ok(AggdFit {
        alpha,
        sigma_left: sigma_l,
        sigma_right: sigma_r,
        mean,
    })
}

pub const N_FEATURES: usize = 36;

/// 36 naturalness features: 2 scales × (GGD shape+variance of the MSCN
/// field, then 4 pairwise-product orientations × AGGD (shape, mean, left
/// variance, right variance)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalnessFeatures(pub Vec<f64>);

fn orientation_products(field: &GrayImage) -> [Vec<f64>; 4] {
    let (w, h) = (field.width(), field.height());
    let mut horiz = Vec::with_capacity((w - 1) * h);
    let mut vert = Vec::with_capacity(w * (h - 1));
    let mut diag1 = Vec::with_capacity((w - 1) * (h - 1));
    let mut diag2 = Vec::with_capacity((w - 1) * (h - 1));
    for y in 0..h {
        for x in 0..w {
            let c = field.get(x, y);
            if x + 1 < w {
                horiz.push(c * field.get(x + 1, y));
            }
            if y + 1 < h {
                vert.push(c * field.get(x, y + 1));
            }
            if x + 1 < w && y + 1 < h {
                diag1.push(c * field.get(x + 1, y + 1));
            }
            if x >= 1 && y + 1 < h {
                diag2.push(c * field.get(x - 1, y + 1));
            }
        }
    }
    [horiz, vert, diag1, diag2]
}

impl NaturalnessFeatures {
    pub fn extract(img: &GrayImage) -> Result<NaturalnessFeatures> {
        let mut feats = Vec::with_capacity(N_FEATURES);
        let mut scale_img = img.clone();
        for scale in 0..2 {
            if scale == 1 {
                scale_img = scale_img.downsample_2x();
            }
            let field = mscn(&scale_img)?;
            let (alpha, var) = ggd_fit(field.pixels())?;
            feats.push(alpha);
            feats.push(var);
            for product in orientation_products(&field) {
                let fit = aggd_fit(&product)?;
                feats.push(fit.alpha);
                feats.push(fit.mean);
                feats.push(fit.sigma_left * fit.sigma_left);
                feats.push(fit.sigma_right * fit.sigma_right);
            }
        }
        debug_assert_eq!(feats.len(), N_FEATURES);
        Ok(NaturalnessFeatures(feats))
    }
}

/// Mean and covariance of reference-corpus features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefStats {
    pub mean: Vec<f64>,
    /// Row-major 36×36 covariance.
    pub covariance: Vec<f64>,
}

impl RefStats {
    pub fn fit(images: &[GrayImage]) -> Result<RefStats> {
        if images.is_empty() {
            return Err(Error::Input("reference corpus is empty".into()));
        }
        let feats: Vec<NaturalnessFeatures> = images
            .iter()
            .map(NaturalnessFeatures::extract)
            .collect::<Result<_>>()?;
        let n = feats.len() as f64;
        let mut mean = vec![0.0; N_FEATURES];
        for f in &feats {
            for (m, v) in mean.iter_mut().zip(&f.0) {
                *m += v / n;
            }
        }
        let mut cov = vec![0.0; N_FEATURES * N_FEATURES];
        for f in &feats {
            for i in 0..N_FEATURES {
                let di = f.0[i] - mean[i];
                for j in 0..N_FEATURES {
                    cov[i * N_FEATURES + j] += di * (f.0[j] - mean[j]) / n;
                }
            }
        }
        Ok(RefStats {
            mean,
            covariance: cov,
        })
    }
}

/// Regularizer added to the covariance diagonal before inversion.
const COV_RIDGE: f64 = 1e-3;

/// Mahalanobis distance of the image's naturalness features from the
/// reference statistics; higher means less natural.
pub fn naturalness_score(img: &GrayImage, ref_stats: &RefStats) -> Result<f64> {
    if ref_stats.mean.len() != N_FEATURES
        || ref_stats.covariance.len() != N_FEATURES * N_FEATURES
    {
        return Err(Error::Config("reference stats have the wrong size".into()));
    }
    let f = NaturalnessFeatures::extract(img)?;
    let d: Vec<f64> = f
        .0
        .iter()
        .zip(&ref_stats.mean)
        .map(|(a, b)| a - b)
        .collect();
    let x = solve_spd_real(&ref_stats.covariance, N_FEATURES, &d, COV_RIDGE)?;
    let sq: f64 = d.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(sq.max(0.0).sqrt())
}

/// Reference statistics over the default 50-image corpus, built once per
/// process.
pub fn default_ref_stats() -> &'static RefStats {
    static STATS: OnceLock<RefStats> = OnceLock::new();
    STATS.get_or_init(|| {
        RefStats::fit(&reference_corpus(50, 0xA51CE)).expect("default corpus is well formed")
    })
}

/// Procedural reference corpus: clean generated-content exemplars —
/// stylized figures over varied scene backgrounds rendered by the offline
/// generator at a high step count (low noise). Scoring against this corpus
/// means "distance from clean generated content".
pub fn reference_corpus(count: usize, seed: u64) -> Vec<GrayImage> {
    let size = 64usize;
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, i as u64));
            // jittered pose, sometimes with an arm raised
            let raise = rng.random_range(0.0..1.0);
            let kps: Vec<[f64; 2]> = crate::synth::REST_POSE
                .iter()
                .enumerate()
                .map(|(j, &(x, y))| {
                    let mut p = Vec2::new(
                        x + rng.random_range(-0.05..0.05),
                        y + rng.random_range(-0.05..0.05),
                    );
                    if raise > 0.5 && (j == 4 || j == 6) {
                        p += Vec2::new(0.1, 0.4) * (raise - 0.5) * 2.0;
                    }
                    crate::skeleton::body_to_pixel(p, size, size)
                })
                .collect();
            let skeleton =
                crate::skeleton::render_skeleton(&kps, size, size, &crate::skeleton::BONES);
            let req = crate::aigc::GenerationRequest {
                skeleton_image: skeleton,
                instruction: format!("reference scene {i}"),
                steps: 42 + (i as u32 % 7),
                text_guidance: rng.random_range(4.0..10.0),
                image_guidance: rng.random_range(1.0..2.5),
                timeout_s: 1.0,
            };
            crate::aigc::stub_generate(&req, crate::mix_seed(seed, 1000 + i as u64))
                .expect("stub generation is infallible for valid requests")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn tv_constant_is_zero() {
        let img = GrayImage::from_fn(8, 8, |_, _| 0.37);
        assert_eq!(total_variation(&img).unwrap(), 0.0);
    }

    #[test]
    fn tv_step_edge_matches_hand_count() {
        // vertical step of height 0.8 between columns 3 and 4 in a 8x6 image
        let h = 0.8;
        let img = GrayImage::from_fn(8, 6, |x, _| if x < 4 { 0.0 } else { h });
        // |Δx| = 0.8 at x = 3 for each of the 5 interior rows; no |Δy|
        let expected = h * 5.0 / (7.0 * 5.0) as f64;
        assert_relative_eq!(total_variation(&img).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn tv_positive_homogeneity_and_shift_invariance() {
        let img = GrayImage::from_fn(12, 9, |x, y| ((x * 31 + y * 17) % 13) as f64 / 13.0);
        let base = total_variation(&img).unwrap();
        let mut scaled = img.clone();
        for v in scaled.pixels_mut() {
            *v *= 2.5;
        }
        assert_relative_eq!(total_variation(&scaled).unwrap(), 2.5 * base, epsilon = 1e-12);
        let mut shifted = img.clone();
        for v in shifted.pixels_mut() {
            *v += 0.3;
        }
        assert_relative_eq!(total_variation(&shifted).unwrap(), base, epsilon = 1e-12);
    }

    #[test]
    fn tv_rejects_tiny_images() {
        let img = GrayImage::new(1, 5);
        assert!(total_variation(&img).is_err());
    }

    #[test]
    fn ssim_identity_symmetry_range() {
        let corpus = reference_corpus(2, 9);
        let (a, b) = (&corpus[0], &corpus[1]);
        assert_relative_eq!(ssim(a, a).unwrap(), 1.0, epsilon = 1e-12);
        let ab = ssim(a, b).unwrap();
        let ba = ssim(b, a).unwrap();
        assert_relative_eq!(ab, ba, epsilon = 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_independent_noise_decorrelates() {
        let normal = Normal::new(0.5, 0.2).unwrap();
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
            let b = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
            worst = worst.max(ssim(&a, &b).unwrap().abs());
        }
        assert!(worst < 0.35, "worst |ssim| {worst}");
        // and the average is near zero
        let mut total = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
            let b = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
            total += ssim(&a, &b).unwrap();
        }
        assert!((total / 100.0).abs() < 0.1);
    }

    #[test]
    fn ssim_dim_mismatch_rejected() {
        let a = GrayImage::new(16, 16);
        let b = GrayImage::new(16, 17);
        assert!(matches!(ssim(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn mscn_constant_is_zero() {
        let img = GrayImage::from_fn(16, 16, |_, _| 0.8);
        let field = mscn(&img).unwrap();
        assert!(field.pixels().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn mscn_brightness_invariant() {
        let img = reference_corpus(1, 3).pop().unwrap();
        let field = mscn(&img).unwrap();
        let mut shifted = img.clone();
        for v in shifted.pixels_mut() {
            *v += 0.25;
        }
        let field2 = mscn(&shifted).unwrap();
        for (a, b) in field.pixels().iter().zip(field2.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mscn_mean_near_zero_on_textures() {
        for img in reference_corpus(5, 11) {
            let field = mscn(&img).unwrap();
            assert!(field.mean().abs() < 0.05, "mean {}", field.mean());
        }
    }

    #[test]
    fn ggd_recovers_gaussian_shape() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let (alpha, var) = ggd_fit(&samples).unwrap();
        assert!((alpha - 2.0).abs() < 0.2, "alpha {alpha}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn aggd_recovers_gaussian() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let fit = aggd_fit(&samples).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.2, "alpha {}", fit.alpha);
        let ratio = fit.sigma_left / fit.sigma_right;
        assert!((ratio - 1.0).abs() < 0.1, "sigma ratio {ratio}");
    }

    #[test]
    fn aggd_recovers_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                let u: f64 = rng.random_range(-0.5..0.5);
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let fit = aggd_fit(&samples).unwrap();
        assert!((fit.alpha - 1.0).abs() < 0.15, "alpha {}", fit.alpha);
    }

    #[test]
    fn aggd_mirror_swaps_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // asymmetric: negative side wider
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                let n: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
                if n < 0.0 {
                    n * 2.0
                } else {
                    n
                }
            })
            .collect();
        let mirrored: Vec<f64> = samples.iter().map(|&x| -x).collect();
        let a = aggd_fit(&samples).unwrap();
        let b = aggd_fit(&mirrored).unwrap();
        assert_relative_eq!(a.sigma_left, b.sigma_right, epsilon = 1e-12);
        assert_relative_eq!(a.sigma_right, b.sigma_left, epsilon = 1e-12);
        assert!(a.sigma_left > a.sigma_right);
        assert!(a.mean < 0.0 && b.mean > 0.0);
    }

    #[test]
    fn aggd_all_zero_rejected() {
        assert!(aggd_fit(&vec![0.0; 500]).is_err());
    }

    #[test]
    fn aggd_consistency_improves_with_samples() {
        // estimation error roughly halves when the sample count quadruples
        let normal = Normal::new(0.0, 1.0).unwrap();
        let err_at = |n: usize| -> f64 {
            let mut total = 0.0;
            for seed in 0..30 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let s: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                total += (aggd_fit(&s).unwrap().alpha - 2.0).abs();
            }
            total / 30.0
        };
        let coarse = err_at(500);
        let fine = err_at(8_000);
        assert!(
            fine < 0.6 * coarse,
            "error did not shrink: {coarse} -> {fine}"
        );
    }

    #[test]
    fn naturalness_corpus_scores_low() {
        let corpus = reference_corpus(50, 42);
        let stats = RefStats::fit(&corpus[..40]).unwrap();
        let train_scores: Vec<f64> = corpus[..40]
            .iter()
            .map(|img| naturalness_score(img, &stats).unwrap())
            .collect();
        let mut sorted = train_scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p90 = sorted[(0.9 * sorted.len() as f64) as usize];
        // held-out corpus images stay in the typical range
        let held: Vec<f64> = corpus[40..]
            .iter()
            .map(|img| naturalness_score(img, &stats).unwrap())
            .collect();
        let median_held = {
            let mut h = held.clone();
            h.sort_by(|a, b| a.partial_cmp(b).unwrap());
            h[h.len() / 2]
        };
        assert!(
            median_held < p90 * 1.5,
            "held-out median {median_held} vs corpus p90 {p90}"
        );
    }

    #[test]
    fn naturalness_noise_increases_score() {
        let corpus = reference_corpus(40, 17);
        let stats = RefStats::fit(&corpus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for img in reference_corpus(5, 99) {
            let clean = naturalness_score(&img, &stats).unwrap();
            let mut noisy = img.clone();
            for v in noisy.pixels_mut() {
                *v = (*v + rng.random_range(-0.35..0.35)).clamp(0.0, 1.0);
            }
            let degraded = naturalness_score(&noisy, &stats).unwrap();
            assert!(
                degraded > clean,
                "noise did not raise the score: {clean} -> {degraded}"
            );
        }
    }

    #[test]
    fn naturalness_self_reference_is_zero() {
        let img = reference_corpus(1, 55).pop().unwrap();
        let stats = RefStats::fit(std::slice::from_ref(&img)).unwrap();
        let score = naturalness_score(&img, &stats).unwrap();
        assert!(score < 1e-9, "self score {score}");
    }
}
