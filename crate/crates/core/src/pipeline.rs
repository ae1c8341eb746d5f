//! End-to-end orchestration: synthesize CSI, sanitize, estimate pose
//! geometry, fuse features, decode skeletons, generate content, and score
//! it — plus dataset building, checkpoint training, and the link-count
//! sweep experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aigc::{self, GenerationRequest};
use crate::csi::{self, CsiStream, Link, LinkId};
use crate::error::{Error, Result};
use crate::features::{self, InputTensor, WeightVector};
use crate::geometry::{self, OrientationEstimate, PositionEstimate};
use crate::image::GrayImage;
use crate::io;
use crate::metrics;
use crate::net::{self, Net, NetConfig, TrainConfig};
use crate::pencil::{self, EstimatorOptions};
use crate::scheduler::{self, ScheduleConfig};
use crate::skeleton::{self, SkeletonFrame};
use crate::synth::{self, GroundTruth, MotionTrace, Scene};
use crate::tensor::Tensor3;
use crate::vec2::Vec2;

/// Static-removal moving-average window in seconds.
const STATIC_WINDOW_S: f64 = 1.0;
/// Fluctuation statistic window in seconds.
const FLUCT_WINDOW_S: f64 = 1.0;
/// Skeleton render resolution fed to the generator.
const GEN_IMAGE_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AigcMode {
    /// Deterministic offline generator.
    Stub,
    /// Remote endpoint base URL.
    Endpoint(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preset: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Additive noise level; non-finite means noiseless.
    pub snr_db: f64,
    /// Carrier frequency offset; nonzero engages conjugate sanitization
    /// (which leaves only relative delays, so keep 0 for localization).
    pub cfo_hz: f64,
    pub multiscale: bool,
    /// Use only the first n links of the preset scene.
    pub n_links: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub aigc: AigcMode,
    pub out_dir: Option<PathBuf>,
    pub window_t: usize,
    pub window_stride: usize,
    /// Run generation + image metrics on every k-th window.
    pub generate_every: usize,
    pub instruction: String,
    pub text_guidance: f64,
    pub image_guidance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preset: "case_study_5rx".into(),
            seed: 0,
            duration_s: 12.0,
            snr_db: 20.0,
            cfo_hz: 0.0,
            multiscale: true,
            n_links: None,
            checkpoint: None,
            schedule: ScheduleConfig::default(),
            aigc: AigcMode::Stub,
            out_dir: None,
            window_t: 16,
            window_stride: 4,
            generate_every: 1,
            instruction: "render the user as a boxer in a ring".into(),
            // placeholder defaults; the editing service defines its own
            text_guidance: 7.5,
            image_guidance: 1.5,
        }
    }
}

/// One link's conditioned streams and per-frame feature vectors.
pub struct ProcessedLink {
    pub link: Link,
    /// Sanitized (when CFO is present) and static-removed.
    pub dynamic: CsiStream,
    /// Sanitized only; used for fluctuation statistics.
    pub conditioned: CsiStream,
    /// Per-frame (amplitude, unwrapped phase) of the dynamic stream.
    pub amp_phase: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Renders a scene/motion pair and conditions every link:
/// impairments → (sanitize when CFO) → static removal → amp/phase.
pub fn render_and_condition(
    scene: &Scene,
    motion: &MotionTrace,
    snr_db: f64,
    cfo_hz: f64,
    seed: u64,
) -> Result<(Vec<ProcessedLink>, GroundTruth)> {
    let (streams, gt) = synth::render_csi(scene, motion)?;
    let mut processed = Vec::with_capacity(streams.len());
    for link in &scene.links {
        let stream = &streams[&link.id];
        let impaired = synth::inject_impairments(stream, cfo_hz, snr_db, crate::link_seed(seed, link.id));
        let conditioned = if cfo_hz != 0.0 {
            let frames = impaired
                .frames
                .iter()
                .map(|f| csi::sanitize_phase(f, 0))
                .collect::<Result<Vec<_>>>()?;
            CsiStream {
                frames,
                config: impaired.config,
            }
        } else {
            impaired
        };
        let dynamic = csi::remove_static(&conditioned, STATIC_WINDOW_S)?;
        let amp_phase = dynamic.frames.iter().map(csi::amp_phase).collect();
        processed.push(ProcessedLink {
            link: *link,
            dynamic,
            conditioned,
            amp_phase,
        });
    }
    Ok((processed, gt))
}

/// Geometry estimates and fusion weights for one analysis window.
pub struct WindowEstimate {
    pub center_t: usize,
    pub position: Option<PositionEstimate>,
    pub orientation: Option<OrientationEstimate>,
    pub weights_distance: WeightVector,
    pub weights_orientation: WeightVector,
}

fn uniform_weights(links: &[Link], kind: features::WeightKind) -> WeightVector {
    WeightVector::new(links.iter().map(|l| (l.id, 1.0)).collect(), kind)
        .expect("nonempty link list")
}

/// Variance of |h| at the strongest subcarrier over the trailing window.
fn link_fluctuation(stream: &CsiStream, center_t: usize) -> f64 {
    let w = (FLUCT_WINDOW_S * stream.config.sample_rate_hz).round() as usize;
    let lo = center_t.saturating_sub(w.saturating_sub(1));
    let frames = &stream.frames[lo..=center_t.min(stream.frames.len() - 1)];
    if frames.is_empty() {
        return 0.0;
    }
    // strongest subcarrier at the window end, averaged over antennas
    let last = &frames[frames.len() - 1];
    let k_star = (0..last.n_subcarriers())
        .max_by(|&a, &b| {
            let pa: f64 = last.h.row(a).iter().map(|z| z.norm_sqr()).sum::<f64>();
            let pb: f64 = last.h.row(b).iter().map(|z| z.norm_sqr()).sum::<f64>();
            pa.partial_cmp(&pb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mags: Vec<f64> = frames
        .iter()
        .map(|f| f.h.row(k_star).iter().map(|z| z.norm()).sum::<f64>() / f.n_antennas() as f64)
        .collect();
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    mags.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / mags.len() as f64
}

/// Runs per-link estimation and produces geometry + fusion weights for the
/// window at `center_t`. Falls back to uniform weights when the geometry is
/// underdetermined (fewer than two usable links).
pub fn estimate_window(
    processed: &[ProcessedLink],
    center_t: usize,
    opts: &EstimatorOptions,
    warm_start: Option<Vec2>,
) -> WindowEstimate {
    let links: Vec<Link> = processed.iter().map(|p| p.link).collect();
    let mut observations = Vec::new();
    for p in processed {
        if center_t >= p.dynamic.frames.len() {
            continue;
        }
        if let Ok(obs) = pencil::observe(&p.dynamic.frames[center_t], &p.dynamic.config, opts) {
            observations.push(obs);
        }
    }
    let position = geometry::locate_user(&observations, &links, warm_start).ok();
    let orientation = position.as_ref().and_then(|pos| {
        let fluct: BTreeMap<LinkId, f64> = processed
            .iter()
            .map(|p| (p.link.id, link_fluctuation(&p.conditioned, center_t)))
            .collect();
        geometry::estimate_orientation(&fluct, pos.pos, &links).ok()
    });
    let weights_distance = position
        .as_ref()
        .and_then(|p| features::distance_weights(p.pos, &links).ok())
        .unwrap_or_else(|| uniform_weights(&links, features::WeightKind::Distance));
    let weights_orientation = orientation
        .as_ref()
        .zip(position.as_ref())
        .and_then(|(o, p)| features::orientation_weights(o.phi_rad, p.pos, &links).ok())
        .unwrap_or_else(|| uniform_weights(&links, features::WeightKind::Orientation));
    WindowEstimate {
        center_t,
        position,
        orientation,
        weights_distance,
        weights_orientation,
    }
}

/// Ground-truth-driven weights (training-time camera assistance).
pub fn true_pose_weights(
    gt: &GroundTruth,
    links: &[Link],
    center_t: usize,
) -> (WeightVector, WeightVector) {
    let pos = gt.user_pos[center_t];
    let axis = gt.orientation_rad[center_t].rem_euclid(std::f64::consts::PI);
    let wd = features::distance_weights(pos, links)
        .unwrap_or_else(|_| uniform_weights(links, features::WeightKind::Distance));
    let wo = features::orientation_weights(axis, pos, links)
        .unwrap_or_else(|_| uniform_weights(links, features::WeightKind::Orientation));
    (wd, wo)
}

/// Fuses per-link vectors over a window into a normalized input tensor.
pub fn window_input(
    processed: &[ProcessedLink],
    weights_distance: &WeightVector,
    weights_orientation: &WeightVector,
    t0: usize,
    t_len: usize,
    multiscale: bool,
) -> Result<InputTensor> {
    let mut samples = Vec::with_capacity(t_len);
    for t in t0..t0 + t_len {
        let per_link: BTreeMap<LinkId, (Vec<f64>, Vec<f64>)> = processed
            .iter()
            .map(|p| (p.link.id, p.amp_phase[t].clone()))
            .collect();
        let (a_d, p_d) = features::fuse_links(&per_link, weights_distance)?;
        let mut chans = vec![a_d, p_d];
        if multiscale {
            let (a_o, p_o) = features::fuse_links(&per_link, weights_orientation)?;
            chans.push(a_o);
            chans.push(p_o);
        }
        samples.push(chans);
    }
    Ok(features::build_window(&samples, t_len, 1)?.remove(0))
}

/// Builds (input, skeleton) training pairs from a preset scenario, using
/// ground-truth pose for the fusion weights (the camera supplies them at
/// training time).
pub fn build_dataset(
    preset: &str,
    seed: u64,
    n_samples: usize,
    multiscale: bool,
    snr_db: f64,
    net_cfg: &NetConfig,
) -> Result<Vec<(Tensor3, SkeletonFrame)>> {
    let t_len = net_cfg.input_t;
    let stride = 4;
    let (scene, motion) = preset_with_frames(preset, seed, n_samples * stride + t_len + 16)?;
    let (processed, gt) = render_and_condition(&scene, &motion, snr_db, 0.0, seed)?;
    let links: Vec<Link> = scene.links.clone();
    let n_frames = motion.len();
    let mut out = Vec::with_capacity(n_samples);
    for w in 0..n_samples {
        let t0 = w * stride;
        if t0 + t_len > n_frames {
            break;
        }
        let center = t0 + t_len / 2;
        let (wd, wo) = true_pose_weights(&gt, &links, center);
        let input = window_input(&processed, &wd, &wo, t0, t_len, multiscale)?;
        let target = gt.skeleton_frame(center, net_cfg.out_h, net_cfg.out_w, net_cfg.heatmap_sigma_px);
        out.push((input.data, target));
    }
    Ok(out)
}

fn preset_with_frames(preset: &str, seed: u64, frames: usize) -> Result<(Scene, MotionTrace)> {
    // duration that yields at least `frames` samples at the preset rate
    let probe = synth::preset_scenario_with(preset, seed, synth::PresetOptions { duration_s: 1.0 })?;
    let rate = probe.0.radio.sample_rate_hz;
    synth::preset_scenario_with(
        preset,
        seed,
        synth::PresetOptions {
            duration_s: frames as f64 / rate,
        },
    )
}

/// Trains a desk-config network on oracle data and writes the checkpoint.
pub fn train_checkpoint(
    preset: &str,
    seed: u64,
    n_samples: usize,
    multiscale: bool,
    train_cfg: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<Vec<net::EpochMetrics>> {
    let cfg = if multiscale {
        NetConfig::desk()
    } else {
        NetConfig::desk_single_scale()
    };
    let data = build_dataset(preset, seed, n_samples, multiscale, 20.0, &cfg)?;
    let mut network = Net::new(&cfg, crate::mix_seed(train_cfg.seed, 0x1217))?;
    let metrics = net::train(&mut network, &data, None, train_cfg)?;
    net::checkpoint::save(&network, path)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: usize,
    pub center_t: usize,
    pub position_err_m: Option<f64>,
    pub orientation_err_deg: Option<f64>,
    pub joint_err_px: f64,
    pub similarity: f64,
    pub tv: Option<f64>,
    pub naturalness: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub n_links: u32,
    pub n_windows: usize,
    pub aigc_time_s: f64,
    pub steps: u32,
    pub median_position_err_m: Option<f64>,
    pub median_orientation_err_deg: Option<f64>,
    pub mean_joint_err_px: f64,
    pub mean_similarity: f64,
    pub mean_tv: f64,
    pub mean_naturalness: f64,
    pub stage_timings_s: BTreeMap<String, f64>,
    pub windows: Vec<WindowReport>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Some(values[values.len() / 2])
}

fn axis_error_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d).to_degrees()
}

/// Full pipeline: synth → sanitize → estimate → locate/orient → fuse →
/// skeleton net → generation → metrics. Writes a JSON report (and sample
/// images) when an output directory is configured.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Report> {
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let clock = Instant::now;

    let stage = |name: &str, frame: usize, e: Error| e.at_stage(name, frame);

    // synth
    let t0 = clock();
    let frames_needed = (cfg.duration_s * 100.0) as usize; // presets run at 100 Hz
    let (mut scene, motion) = preset_with_frames(&cfg.preset, cfg.seed, frames_needed)
        .map_err(|e| stage("synth", 0, e))?;
    if let Some(n) = cfg.n_links {
        if n == 0 || n > scene.links.len() {
            return Err(stage(
                "synth",
                0,
                Error::Config(format!(
                    "n_links {n} outside 1..={}",
                    scene.links.len()
                )),
            ));
        }
        scene.links.truncate(n);
    }
    let n_links = scene.links.len() as u32;
    let (processed, gt) = render_and_condition(&scene, &motion, cfg.snr_db, cfg.cfo_hz, cfg.seed)
        .map_err(|e| stage("sanitize", 0, e))?;
    timings.insert("synth+sanitize".into(), t0().elapsed().as_secs_f64());
    let t_synth = clock();

    // schedule
    let (aigc_time, steps) =
        scheduler::budget(n_links, &cfg.schedule).map_err(|e| stage("schedule", 0, e))?;

    // skeleton net
    let net_path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| stage("skeleton-net", 0, Error::Config("no checkpoint configured".into())))?;
    if !net_path.exists() {
        return Err(stage(
            "skeleton-net",
            0,
            Error::Config(format!("checkpoint {} does not exist", net_path.display())),
        ));
    }
    let network = net::checkpoint::load(net_path).map_err(|e| stage("skeleton-net", 0, e))?;
    let net_cfg = network
        .config
        .clone()
        .ok_or_else(|| stage("skeleton-net", 0, Error::Config("checkpoint lacks a config".into())))?;
    let expected_c = if cfg.multiscale { 4 } else { 2 };
    if net_cfg.input_c != expected_c {
        return Err(stage(
            "skeleton-net",
            0,
            Error::Config(format!(
                "checkpoint expects {} input channels but the pipeline produces {expected_c}",
                net_cfg.input_c
            )),
        ));
    }
    timings.insert("load-net".into(), t_synth().elapsed().as_secs_f64());
    let t_net = clock();

    let opts = EstimatorOptions::default();
    let n_frames = motion.len();
    let t_len = cfg.window_t;
    if n_frames < t_len {
        return Err(stage(
            "fuse",
            0,
            Error::Input(format!("trace of {n_frames} frames shorter than window {t_len}")),
        ));
    }
    let n_windows = (n_frames - t_len) / cfg.window_stride + 1;
    let ref_stats = metrics::default_ref_stats();

    let mut windows = Vec::with_capacity(n_windows);
    let mut warm: Option<Vec2> = None;
    let mut est_time = 0.0;
    let mut gen_time = 0.0;
    for w in 0..n_windows {
        let t0 = w * cfg.window_stride;
        let center = t0 + t_len / 2;

        let te = clock();
        let est = estimate_window(&processed, center, &opts, warm);
        warm = est.position.as_ref().map(|p| p.pos);
        est_time += te().elapsed().as_secs_f64();

        let input = window_input(
            &processed,
            &est.weights_distance,
            &est.weights_orientation,
            t0,
            t_len,
            cfg.multiscale,
        )
        .map_err(|e| stage("fuse", w, e))?;

        let pred = network.forward(&input.data);
        let pred_kps: Vec<[f64; 2]> = (0..net_cfg.n_joints)
            .map(|j| net::soft_argmax(&pred, j))
            .collect();
        let gt_kps = gt.keypoints_px(center, net_cfg.out_h, net_cfg.out_w);
        let joint_err = pred_kps
            .iter()
            .zip(&gt_kps)
            .map(|(p, g)| (p[0] - g[0]).hypot(p[1] - g[1]))
            .sum::<f64>()
            / gt_kps.len() as f64;
        let render_pred =
            skeleton::render_skeleton(&pred_kps, net_cfg.out_h, net_cfg.out_w, &skeleton::BONES);
        let render_gt =
            skeleton::render_skeleton(&gt_kps, net_cfg.out_h, net_cfg.out_w, &skeleton::BONES);
        let similarity =
            metrics::ssim(&render_gt, &render_pred).map_err(|e| stage("metrics", w, e))?;

        let position_err = est
            .position
            .as_ref()
            .map(|p| p.pos.distance(gt.user_pos[center]));
        let orientation_err = est.orientation.as_ref().map(|o| {
            axis_error_deg(o.phi_rad, gt.orientation_rad[center])
        });

        // generation + no-reference metrics on a subsample of windows
        let (mut tv, mut naturalness) = (None, None);
        if w % cfg.generate_every.max(1) == 0 {
            let tg = clock();
            let scale = GEN_IMAGE_SIZE as f64 / net_cfg.out_w as f64;
            let gen_kps: Vec<[f64; 2]> = pred_kps
                .iter()
                .map(|&[x, y]| [x * scale, y * scale])
                .collect();
            let req = GenerationRequest {
                skeleton_image: skeleton::render_skeleton(
                    &gen_kps,
                    GEN_IMAGE_SIZE,
                    GEN_IMAGE_SIZE,
                    &skeleton::BONES,
                ),
                instruction: cfg.instruction.clone(),
                steps,
                text_guidance: cfg.text_guidance,
                image_guidance: cfg.image_guidance,
                timeout_s: 10.0,
            };
            let generated = match &cfg.aigc {
                AigcMode::Stub => {
                    aigc::stub_generate(&req, crate::mix_seed(cfg.seed, 0xA16C ^ w as u64))
                        .map_err(|e| stage("generate", w, e))?
                }
                AigcMode::Endpoint(url) => aigc::generate(&req, url)
                    .map_err(|e| stage("generate", w, e))?
                    .image,
            };
            tv = Some(metrics::total_variation(&generated).map_err(|e| stage("metrics", w, e))?);
            naturalness = Some(
                metrics::naturalness_score(&generated, ref_stats)
                    .map_err(|e| stage("metrics", w, e))?,
            );
            gen_time += tg().elapsed().as_secs_f64();

            if w == 0 {
                if let Some(dir) = &cfg.out_dir {
                    std::fs::create_dir_all(dir)?;
                    render_gt.save_png(dir.join("skeleton_gt.png"))?;
                    render_pred.save_png(dir.join("skeleton_pred.png"))?;
                    generated.save_png(dir.join("generated.png"))?;
                }
            }
        }

        windows.push(WindowReport {
            window: w,
            center_t: center,
            position_err_m: position_err,
            orientation_err_deg: orientation_err,
            joint_err_px: joint_err,
            similarity,
            tv,
            naturalness,
        });
    }
    timings.insert("estimate".into(), est_time);
    timings.insert("generate+metrics".into(), gen_time);
    timings.insert(
        "net+fuse".into(),
        t_net().elapsed().as_secs_f64() - est_time - gen_time,
    );

    let mut pos_errs: Vec<f64> = windows.iter().filter_map(|w| w.position_err_m).collect();
    let mut ori_errs: Vec<f64> = windows.iter().filter_map(|w| w.orientation_err_deg).collect();
    let tvs: Vec<f64> = windows.iter().filter_map(|w| w.tv).collect();
    let nats: Vec<f64> = windows.iter().filter_map(|w| w.naturalness).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let report = Report {
        n_links,
        n_windows,
        aigc_time_s: aigc_time,
        steps,
        median_position_err_m: median(&mut pos_errs),
        median_orientation_err_deg: median(&mut ori_errs),
        mean_joint_err_px: mean(&windows.iter().map(|w| w.joint_err_px).collect::<Vec<_>>()),
        mean_similarity: mean(&windows.iter().map(|w| w.similarity).collect::<Vec<_>>()),
        mean_tv: mean(&tvs),
        mean_naturalness: mean(&nats),
        stage_timings_s: timings,
        windows,
    };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        io::write_json(dir.join("report.json"), &report)?;
        io::write_json(dir.join("manifest.json"), &serde_json::json!({
            "config": cfg,
            "artifacts": ["report.json", "skeleton_gt.png", "skeleton_pred.png", "generated.png"],
        }))?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Link-count sweep (the case-study tradeoff experiment)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub preset: String,
    pub seeds: usize,
    pub base_seed: u64,
    pub duration_s: f64,
    pub snr_db: f64,
    pub multiscale: bool,
    pub checkpoint: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub out_dir: Option<PathBuf>,
    /// Evaluate generation metrics on every k-th window.
    pub generate_every: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            preset: "case_study_5rx".into(),
            seeds: 20,
            base_seed: 1,
            duration_s: 6.0,
            snr_db: 20.0,
            multiscale: true,
            checkpoint: None,
            schedule: ScheduleConfig::default(),
            out_dir: None,
            generate_every: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_links: u32,
    pub aigc_time_s: f64,
    pub steps: u32,
    pub similarity: f64,
    pub tv: f64,
    pub naturalness: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub similarity_non_decreasing: bool,
    pub tv_non_decreasing: bool,
    pub naturalness_non_decreasing: bool,
    /// Fraction of seeds where the n=max endpoint strictly beats n=1 on all
    /// three metrics.
    pub endpoint_agreement: f64,
    /// Per-seed endpoint deltas (max n minus n=1) for each metric.
    pub per_seed_endpoint_delta: Vec<[f64; 3]>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_links,aigc_time_s,steps,similarity,tv,naturalness\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n_links, r.aigc_time_s, r.steps, r.similarity, r.tv, r.naturalness
            ));
        }
        out
    }
}

/// Trains the default sweep checkpoint if none is supplied (shorter recipe
/// than the full training run; deterministic).
pub fn ensure_sweep_checkpoint(cfg: &SweepConfig) -> Result<PathBuf> {
    if let Some(p) = &cfg.checkpoint {
        return Ok(p.clone());
    }
    let dir = std::env::temp_dir().join("wavepose-sweep-net");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!(
        "sweep-{}-{}-{}.skc",
        cfg.preset,
        cfg.multiscale,
        cfg.base_seed
    ));
    if !path.exists() {
        let tc = TrainConfig {
            epochs: 24,
            seed: 0xF16,
            ..TrainConfig::default()
        };
        train_checkpoint(&cfg.preset, 0xF16, 160, cfg.multiscale, &tc, &path)?;
    }
    Ok(path)
}

/// Sweeps the link count over the feasible range (capped at the scene's
/// link count), running the full perception + generation chain per seed
/// with common random numbers across n, and reports the quality trends.
pub fn link_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let checkpoint = ensure_sweep_checkpoint(cfg)?;
    let network = net::checkpoint::load(&checkpoint)?;
    let net_cfg = network
        .config
        .clone()
        .ok_or_else(|| Error::Config("sweep checkpoint lacks a config".into()))?;
    let (_, n_feasible) = scheduler::feasible_range(&cfg.schedule)?;
    let ref_stats = metrics::default_ref_stats();
    let opts = EstimatorOptions::default();

    // probe scene to size the sweep
    let (scene0, _) = synth::preset_scenario(&cfg.preset, cfg.base_seed)?;
    let n_max = (scene0.links.len() as u32).min(n_feasible);
    let t_len = net_cfg.input_t;
    let stride = 4;

    let mut sums: Vec<[f64; 3]> = vec![[0.0; 3]; n_max as usize];
    let mut per_seed_metrics: Vec<Vec<[f64; 3]>> = Vec::with_capacity(cfg.seeds);

    for s in 0..cfg.seeds {
        let seed = crate::mix_seed(cfg.base_seed, s as u64);
        let frames = (cfg.duration_s * scene0.radio.sample_rate_hz) as usize;
        let (scene, motion) = preset_with_frames(&cfg.preset, seed, frames)?;
        // render every link once; the n-link runs reuse the same noise
        let (processed_all, gt) =
            render_and_condition(&scene, &motion, cfg.snr_db, 0.0, seed)?;
        let n_windows = (motion.len() - t_len) / stride + 1;
        let mut this_seed = Vec::with_capacity(n_max as usize);
        for n in 1..=n_max {
            let processed = &processed_all[..n as usize];
            let (_, steps) = scheduler::budget(n, &cfg.schedule)?;
            let mut warm = None;
            let mut sim_sum = 0.0;
            let mut tv_sum = 0.0;
            let mut nat_sum = 0.0;
            let mut gen_count = 0.0;
            for w in 0..n_windows {
                let t0 = w * stride;
                let center = t0 + t_len / 2;
                let est = estimate_window(processed, center, &opts, warm);
                warm = est.position.as_ref().map(|p| p.pos);
                let input = window_input(
                    processed,
                    &est.weights_distance,
                    &est.weights_orientation,
                    t0,
                    t_len,
                    cfg.multiscale,
                )?;
                let pred = network.forward(&input.data);
                let pred_kps: Vec<[f64; 2]> = (0..net_cfg.n_joints)
                    .map(|j| net::soft_argmax(&pred, j))
                    .collect();
                let gt_kps = gt.keypoints_px(center, net_cfg.out_h, net_cfg.out_w);
                let render_pred = skeleton::render_skeleton(
                    &pred_kps,
                    net_cfg.out_h,
                    net_cfg.out_w,
                    &skeleton::BONES,
                );
                let render_gt = skeleton::render_skeleton(
                    &gt_kps,
                    net_cfg.out_h,
                    net_cfg.out_w,
                    &skeleton::BONES,
                );
                sim_sum += metrics::ssim(&render_gt, &render_pred)?;
                if w % cfg.generate_every.max(1) == 0 {
                    let scale = GEN_IMAGE_SIZE as f64 / net_cfg.out_w as f64;
                    let gen_kps: Vec<[f64; 2]> = pred_kps
                        .iter()
                        .map(|&[x, y]| [x * scale, y * scale])
                        .collect();
                    let req = GenerationRequest {
                        skeleton_image: skeleton::render_skeleton(
                            &gen_kps,
                            GEN_IMAGE_SIZE,
                            GEN_IMAGE_SIZE,
                            &skeleton::BONES,
                        ),
                        instruction: "render the user as a boxer in a ring".into(),
                        steps,
                        text_guidance: 7.5,
                        image_guidance: 1.5,
                        timeout_s: 10.0,
                    };
                    // same seed across n: only the step count differs
                    let img = aigc::stub_generate(&req, crate::mix_seed(seed, 0xA16C ^ w as u64))?;
                    tv_sum += metrics::total_variation(&img)?;
                    nat_sum += metrics::naturalness_score(&img, ref_stats)?;
                    gen_count += 1.0;
                }
            }
            let row = [
                sim_sum / n_windows as f64,
                tv_sum / gen_count.max(1.0),
                nat_sum / gen_count.max(1.0),
            ];
            sums[(n - 1) as usize][0] += row[0];
            sums[(n - 1) as usize][1] += row[1];
            sums[(n - 1) as usize][2] += row[2];
            this_seed.push(row);
        }
        per_seed_metrics.push(this_seed);
    }

    let mut rows = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let (aigc_time, steps) = scheduler::budget(n, &cfg.schedule)?;
        let s = sums[(n - 1) as usize];
        rows.push(SweepRow {
            n_links: n,
            aigc_time_s: aigc_time,
            steps,
            similarity: s[0] / cfg.seeds as f64,
            tv: s[1] / cfg.seeds as f64,
            naturalness: s[2] / cfg.seeds as f64,
        });
    }
    let non_decreasing = |pick: &dyn Fn(&SweepRow) -> f64| {
        rows.windows(2).all(|w| pick(&w[1]) >= pick(&w[0]) - 1e-12)
    };
    let per_seed_endpoint_delta: Vec<[f64; 3]> = per_seed_metrics
        .iter()
        .map(|seed_rows| {
            let first = seed_rows.first().expect("n >= 1");
            let last = seed_rows.last().expect("n >= 1");
            [last[0] - first[0], last[1] - first[1], last[2] - first[2]]
        })
        .collect();
    let agreeing = per_seed_endpoint_delta
        .iter()
        .filter(|d| d[0] > 0.0 && d[1] > 0.0 && d[2] > 0.0)
        .count();
    let result = SweepResult {
        similarity_non_decreasing: non_decreasing(&|r| r.similarity),
        tv_non_decreasing: non_decreasing(&|r| r.tv),
        naturalness_non_decreasing: non_decreasing(&|r| r.naturalness),
        endpoint_agreement: agreeing as f64 / cfg.seeds.max(1) as f64,
        per_seed_endpoint_delta,
        rows,
    };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        io::atomic_write(dir.join("link_sweep.csv"), result.to_csv().as_bytes())?;
        io::write_json(dir.join("link_sweep_summary.json"), &result)?;
    }
    Ok(result)
}
