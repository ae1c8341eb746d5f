//! Client for an instruction-guided image-editing endpoint, plus a
//! deterministic local stub so the full pipeline runs offline.
//!
//! Wire protocol: `POST {endpoint}/edit` with JSON
//! `{image_b64 (PNG), instruction, steps, text_guidance, image_guidance}`;
//! the response is `{image_b64 (PNG)}`. Transient failures (transport
//! errors, 5xx) are retried up to twice within the request's time budget.

use std::time::{Duration, Instant};

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub skeleton_image: GrayImage,
    pub instruction: String,
    pub steps: u32,
    pub text_guidance: f64,
    pub image_guidance: f64,
    pub timeout_s: f64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Input("steps must be >= 1".into()));
        }
        if !(self.text_guidance > 0.0) || !(self.image_guidance > 0.0) {
            return Err(Error::Input("guidance scales must be positive".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::Input("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireRequest {
    image_b64: String,
    instruction: String,
    steps: u32,
    text_guidance: f64,
    image_guidance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireResponse {
    image_b64: String,
}

/// A generated image with request diagnostics.
#[derive(Debug, Clone)]
pub struct Generated {
    pub image: GrayImage,
    pub retries: u32,
    pub elapsed_s: f64,
}

const MAX_RETRIES: u32 = 2;
const BODY_EXCERPT: usize = 200;

/// Sends the request to `{endpoint}/edit`, retrying transient failures up
/// to twice while staying within the request's overall time budget.
pub fn generate(req: &GenerationRequest, endpoint: &str) -> Result<Generated> {
    req.validate()?;
    let started = Instant::now();
    let deadline = Duration::from_secs_f64(req.timeout_s);
    let body = WireRequest {
        image_b64: base64::engine::general_purpose::STANDARD.encode(req.skeleton_image.encode_png()?),
        instruction: req.instruction.clone(),
        steps: req.steps,
        text_guidance: req.text_guidance,
        image_guidance: req.image_guidance,
    };
    let url = format!("{}/edit", endpoint.trim_end_matches('/'));
    let mut retries = 0;
    loop {
        let remaining = deadline.checked_sub(started.elapsed());
        let remaining = match remaining {
            Some(r) if !r.is_zero() => r,
            _ => {
                return Err(Error::Timeout {
                    elapsed_s: started.elapsed().as_secs_f64(),
                    budget_s: req.timeout_s,
                })
            }
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(remaining)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let attempt = client.post(&url).json(&body).send();
        match attempt {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let text = resp.text().map_err(|e| Error::Protocol(e.to_string()))?;
                    let wire: WireResponse = serde_json::from_str(&text)
                        .map_err(|e| Error::Protocol(format!("bad response JSON: {e}")))?;
                    let png = base64::engine::general_purpose::STANDARD
                        .decode(&wire.image_b64)
                        .map_err(|e| Error::Protocol(format!("bad base64: {e}")))?;
                    let image = GrayImage::decode_png(&png)
                        .map_err(|e| Error::Protocol(format!("bad PNG payload: {e}")))?;
                    return Ok(Generated {
                        image,
                        retries,
                        elapsed_s: started.elapsed().as_secs_f64(),
                    });
                }
                if status.is_server_error() && retries < MAX_RETRIES {
                    retries += 1;
                    continue;
                }
                let excerpt: String = resp
                    .text()
                    .unwrap_or_default()
                    .chars()
                    .take(BODY_EXCERPT)
                    .collect();
                return Err(Error::Service {
                    status: status.as_u16(),
                    body_excerpt: excerpt,
                });
            }
            Err(e) if e.is_timeout() => {
                return Err(Error::Timeout {
                    elapsed_s: started.elapsed().as_secs_f64(),
                    budget_s: req.timeout_s,
                });
            }
            Err(e) => {
                if retries < MAX_RETRIES {
                    retries += 1;
                    continue;
                }
                return Err(Error::Transport(e.to_string()));
            }
        }
    }
}

/// Stub noise scale: added noise has σ = `STUB_SIGMA0 / steps`.
const STUB_SIGMA0: f64 = 6.0;
/// Smoothing passes applied after the noise: k = min(steps, 2).
const STUB_SMOOTH_MAX: u32 = 2;

/// Deterministic offline generator: renders a stylized figure from the
/// skeleton image (dilated strokes with a shaded body), composes it over a
/// gradient background, adds zero-mean noise with σ = σ0/steps, and runs
/// k = min(steps, 2) box-smoothing passes. Guidance scales modulate the
/// figure-background contrast and the background pattern amplitude.
pub fn stub_generate(req: &GenerationRequest, seed: u64) -> Result<GrayImage> {
    req.validate()?;
    let src = &req.skeleton_image;
    let (w, h) = (src.width(), src.height());
    if w == 0 || h == 0 {
        return Err(Error::Input("empty skeleton image".into()));
    }
    // skeleton stroke pixels
    let lit: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| src.get(x, y) > 0.5)
        .map(|(x, y)| (x as f64, y as f64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, hash_instruction(&req.instruction)));
    let contrast = req.image_guidance / (1.0 + req.image_guidance);
    let pattern_amp = req.text_guidance / (1.0 + req.text_guidance);
    // scene-like background: smooth waves and soft blobs
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.02..0.08),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                pattern_amp * rng.random_range(0.11..0.34),
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(6.0..16.0),
                pattern_amp * rng.random_range(-0.3..0.3),
            )
        })
        .collect();
    let mut img = GrayImage::from_fn(w, h, |x, y| {
        let mut v = 0.45;
        for &(freq, dir, phase, amp) in &waves {
            let t = freq
                * (x as f64 * dir.cos() + y as f64 * dir.sin())
                * std::f64::consts::TAU
                + phase;
            v += amp * t.sin();
        }
        for &(cx, cy, r, amp) in &blobs {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            v += amp * (-d2 / (2.0 * r * r)).exp();
        }
        if !lit.is_empty() {
            // distance to the nearest stroke pixel
            let mut d2_min = f64::INFINITY;
            for &(lx, ly) in &lit {
                let d2 = (x as f64 - lx).powi(2) + (y as f64 - ly).powi(2);
                if d2 < d2_min {
                    d2_min = d2;
                }
            }
            let d = d2_min.sqrt();
            // dilated bones (bright core) with a shaded body falloff
            let core = (1.0 - d / 2.5).clamp(0.0, 1.0);
            let shade = (1.0 - d / 7.0).clamp(0.0, 1.0);
            v = v * (1.0 - contrast * shade) + contrast * (0.55 * shade + 0.45 * core);
        }
        v.clamp(0.0, 1.0)
    });
    // zero-mean noise, σ = σ0/steps
    let sigma = STUB_SIGMA0 / req.steps as f64;
    use rand_distr::Distribution;
    let normal = rand_distr::Normal::new(0.0, sigma).expect("sigma finite");
    for v in img.pixels_mut() {
        *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
    }
    // k box-smoothing passes
    let passes = req.steps.min(STUB_SMOOTH_MAX);
    for _ in 0..passes {
        img = box_blur(&img);
    }
    Ok(img)
}

fn hash_instruction(s: &str) -> u64 {
    // FNV-1a
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn box_blur(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    GrayImage::from_fn(w, h, |x, y| {
        let mut sum = 0.0;
        let mut count = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let xx = x as i64 + dx;
                let yy = y as i64 + dy;
                if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                    sum += img.get(xx as usize, yy as usize);
                    count += 1.0;
                }
            }
        }
        sum / count
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::total_variation;
    use crate::skeleton::{render_skeleton, BONES};

    fn demo_request(steps: u32) -> GenerationRequest {
        let kps: Vec<[f64; 2]> = crate::synth::REST_POSE
            .iter()
            .map(|&(x, y)| crate::skeleton::body_to_pixel(crate::vec2::Vec2::new(x, y), 64, 64))
            .collect();
        GenerationRequest {
            skeleton_image: render_skeleton(&kps, 64, 64, &BONES),
            instruction: "make the figure box in a ring".into(),
            steps,
            text_guidance: 7.5,
            image_guidance: 1.5,
            timeout_s: 5.0,
        }
    }

    #[test]
    fn stub_deterministic() {
        let req = demo_request(20);
        let a = stub_generate(&req, 9).unwrap();
        let b = stub_generate(&req, 9).unwrap();
        assert_eq!(a, b);
        let c = stub_generate(&req, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stub_tv_strictly_decreasing_in_steps() {
        let mut prev = f64::INFINITY;
        for steps in [5u32, 10, 20, 35, 50] {
            let req = demo_request(steps);
            let img = stub_generate(&req, 7).unwrap();
            let tv = total_variation(&img).unwrap();
            assert!(tv < prev, "tv {tv} did not drop at steps {steps}");
            prev = tv;
        }
    }

    #[test]
    fn stub_naturalness_non_increasing_in_steps() {
        let corpus = crate::metrics::reference_corpus(40, 1234);
        let stats = crate::metrics::RefStats::fit(&corpus).unwrap();
        let mut prev = f64::INFINITY;
        for steps in [5u32, 12, 25, 42] {
            let req = demo_request(steps);
            let img = stub_generate(&req, 7).unwrap();
            let score = crate::metrics::naturalness_score(&img, &stats).unwrap();
            assert!(
                score <= prev + 1e-9,
                "score {score} rose at steps {steps} (prev {prev})"
            );
            prev = score;
        }
    }

    #[test]
    fn stub_similarity_degrades_with_keypoint_corruption() {
        use rand::{Rng, SeedableRng};
        let kps: Vec<[f64; 2]> = crate::synth::REST_POSE
            .iter()
            .map(|&(x, y)| crate::skeleton::body_to_pixel(crate::vec2::Vec2::new(x, y), 64, 64))
            .collect();
        let reference = stub_generate(&demo_request(30), 3).unwrap();
        let mut prev_ssim = f64::INFINITY;
        for corruption in [0.0, 4.0, 10.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let noisy: Vec<[f64; 2]> = kps
                .iter()
                .map(|&[x, y]| {
                    [
                        x + rng.random_range(-corruption..=corruption),
                        y + rng.random_range(-corruption..=corruption),
                    ]
                })
                .collect();
            let mut req = demo_request(30);
            req.skeleton_image = render_skeleton(&noisy, 64, 64, &BONES);
            let img = stub_generate(&req, 3).unwrap();
            let s = crate::metrics::ssim(&reference, &img).unwrap();
            assert!(
                s <= prev_ssim + 1e-9,
                "similarity rose with corruption {corruption}"
            );
            prev_ssim = s;
        }
    }
}
