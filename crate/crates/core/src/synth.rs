//! Synthetic multipath CSI with full ground truth.
//!
//! Scenes are planar: links, static reflectors, and a 14-joint body model
//! all live in a 2D floor plane. Each joint is a point scatterer; its scene
//! position follows the user, and its body-frame coordinates (lateral,
//! vertical) drive the skeleton ground truth. Vertical joint motion couples
//! weakly into the propagation plane through a small anterior lean, so pose
//! changes modulate the channel without a 3D ray tracer.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::csi::{CsiFrame, CsiStream, Link, LinkId, RadioConfig};
use crate::error::{Error, Result};
use crate::skeleton::{self, SkeletonFrame, N_JOINTS};
use crate::vec2::Vec2;
use crate::SPEED_OF_LIGHT;

/// Path-loss rolloff scale in meters: gain magnitude = d0 / (d0 + path_len).
const ROLLOFF_D0: f64 = 4.0;

/// Meters of anterior lean per meter of body-frame height above 1 m; couples
/// vertical joint motion into the propagation plane.
const LEAN_COUPLING: f64 = 0.12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScattererKind {
    Static,
    BodySegment(usize),
}

/// A point scatterer with a complex reflectivity of magnitude ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub pos: Vec2,
    pub reflectivity: Complex64,
    pub kind: ScattererKind,
}

impl Scatterer {
    pub fn validate(&self) -> Result<()> {
        if self.reflectivity.norm() > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "scatterer reflectivity magnitude {} exceeds 1",
                self.reflectivity.norm()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub links: Vec<Link>,
    pub statics: Vec<Scatterer>,
    pub radio: RadioConfig,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::Config("scene needs at least one link".into()));
        }
        self.radio.validate()?;
        for l in &self.links {
            l.validate()?;
        }
        for s in &self.statics {
            s.validate()?;
        }
        Ok(())
    }

    /// Axis-aligned bounding box over all link endpoints, padded by `pad` m.
    pub fn bounding_box(&self, pad: f64) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for l in &self.links {
            for p in [l.tx_pos, l.rx_pos] {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad))
    }
}

/// Time series of user position, facing angle, and body-frame joints
/// (lateral, vertical) in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionTrace {
    pub timestamps: Vec<f64>,
    pub user_pos: Vec<Vec2>,
    pub orientation_rad: Vec<f64>,
    pub joints_body: Vec<Vec<Vec2>>,
}

impl MotionTrace {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.timestamps.len();
        if self.user_pos.len() != n || self.orientation_rad.len() != n || self.joints_body.len() != n
        {
            return Err(Error::Input("motion trace field lengths differ".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.timestamps {
            if t <= prev {
                return Err(Error::Input("motion timestamps not strictly increasing".into()));
            }
            prev = t;
        }
        let joints = self.joints_body.first().map_or(N_JOINTS, Vec::len);
        for j in &self.joints_body {
            if j.len() != joints {
                return Err(Error::Input("joint count varies across the trace".into()));
            }
        }
        for &phi in &self.orientation_rad {
            if !(0.0..std::f64::consts::TAU).contains(&phi) {
                return Err(Error::Input(format!("orientation {phi} outside [0, 2π)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    Static(usize),
    Body(usize),
}

/// True parameters of one propagation path at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTruth {
    pub kind: PathKind,
    pub aoa_rad: f64,
    pub tof_s: f64,
    pub gain: Complex64,
}

/// Everything the estimators are later asked to recover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub user_pos: Vec<Vec2>,
    pub orientation_rad: Vec<f64>,
    pub joints_body: Vec<Vec<Vec2>>,
    /// Per link, per timestep, the true path list (direct path first).
    pub per_link: BTreeMap<LinkId, Vec<Vec<PathTruth>>>,
}

impl GroundTruth {
    /// Body paths only (direct and static reflections stripped).
    pub fn body_paths(&self, link: LinkId, t: usize) -> Vec<PathTruth> {
        self.per_link[&link][t]
            .iter()
            .filter(|p| matches!(p.kind, PathKind::Body(_)))
            .copied()
            .collect()
    }

    pub fn keypoints_px(&self, t: usize, height: usize, width: usize) -> Vec<[f64; 2]> {
        self.joints_body[t]
            .iter()
            .map(|&j| skeleton::body_to_pixel(j, height, width))
            .collect()
    }

    pub fn skeleton_frame(
        &self,
        t: usize,
        height: usize,
        width: usize,
        sigma_px: f64,
    ) -> SkeletonFrame {
        SkeletonFrame::from_keypoints(self.keypoints_px(t, height, width), height, width, sigma_px)
    }
}

/// Rest pose of the 14-joint body model: (lateral, vertical) meters.
pub const REST_POSE: [(f64, f64); N_JOINTS] = [
    (0.00, 1.75),  // head
    (0.00, 1.55),  // neck
    (0.22, 1.45),  // l_shoulder
    (-0.22, 1.45), // r_shoulder
    (0.32, 1.18),  // l_elbow
    (-0.32, 1.18), // r_elbow
    (0.38, 0.92),  // l_wrist
    (-0.38, 0.92), // r_wrist
    (0.12, 0.95),  // l_hip
    (-0.12, 0.95), // r_hip
    (0.14, 0.52),  // l_knee
    (-0.14, 0.52), // r_knee
    (0.16, 0.08),  // l_ankle
    (-0.16, 0.08), // r_ankle
];

/// Per-joint reflectivity magnitudes.
const JOINT_REFLECTIVITY: [f64; N_JOINTS] = [
    0.50, 0.55, 0.45, 0.45, 0.35, 0.35, 0.30, 0.30, 0.50, 0.50, 0.32, 0.32, 0.25, 0.25,
];

/// Scene-plane position of a body joint given user pose.
pub fn joint_scene_pos(user_pos: Vec2, orientation_rad: f64, joint_body: Vec2) -> Vec2 {
    let face = Vec2::from_angle(orientation_rad);
    let lateral = face.perp();
    user_pos + lateral * joint_body.x + face * (LEAN_COUPLING * (joint_body.y - 1.0))
}

/// The rendering kernel: sums path phasors over subcarriers and antennas.
///
/// `h[k,a] = Σ_p g_p · exp(−j2π(f_c + kΔf)τ_p) · exp(j2π(d/λ)·a·sin θ_p)`
pub(crate) fn synth_field(paths: &[PathTruth], radio: &RadioConfig) -> Array2<Complex64> {
    let k_count = radio.n_subcarriers;
    let a_count = radio.n_rx_antennas;
    let fc = radio.carrier_hz();
    let spatial = std::f64::consts::TAU * radio.antenna_spacing_m / radio.carrier_wavelength_m;
    let mut h = Array2::from_elem((k_count, a_count), Complex64::default());
    for p in paths {
        let sin_theta = p.aoa_rad.sin();
        let base = Complex64::from_polar(1.0, -std::f64::consts::TAU * fc * p.tof_s) * p.gain;
        let dk = Complex64::from_polar(
            1.0,
            -std::f64::consts::TAU * radio.subcarrier_spacing_hz * p.tof_s,
        );
        let da = Complex64::from_polar(1.0, spatial * sin_theta);
        let mut row = base;
        for k in 0..k_count {
            let mut v = row;
            for a in 0..a_count {
                h[(k, a)] += v;
                v *= da;
            }
            row *= dk;
        }
    }
    h
}

fn rolloff(path_len: f64) -> f64 {
    ROLLOFF_D0 / (ROLLOFF_D0 + path_len)
}

fn scatter_path(link: &Link, pos: Vec2, reflectivity: Complex64, kind: PathKind) -> Result<PathTruth> {
    let d_tx = link.tx_pos.distance(pos);
    let d_rx = link.rx_pos.distance(pos);
    if d_tx < 1e-9 || d_rx < 1e-9 {
        return Err(Error::Geometry(format!(
            "scatterer at ({:.3}, {:.3}) coincides with an endpoint of {}",
            pos.x, pos.y, link.id
        )));
    }
    let total = d_tx + d_rx;
    Ok(PathTruth {
        kind,
        aoa_rad: link.aoa_of(pos),
        tof_s: total / SPEED_OF_LIGHT,
        gain: reflectivity * rolloff(total),
    })
}

/// All paths of one link at one motion step: direct, statics, body joints.
pub fn link_paths(
    link: &Link,
    statics: &[Scatterer],
    user_pos: Vec2,
    orientation_rad: f64,
    joints_body: &[Vec2],
) -> Result<Vec<PathTruth>> {
    let mut paths = Vec::with_capacity(1 + statics.len() + joints_body.len());
    paths.push(PathTruth {
        kind: PathKind::Direct,
        aoa_rad: 0.0,
        tof_s: link.length() / SPEED_OF_LIGHT,
        gain: Complex64::new(rolloff(link.length()), 0.0),
    });
    for (i, s) in statics.iter().enumerate() {
        paths.push(scatter_path(link, s.pos, s.reflectivity, PathKind::Static(i))?);
    }
    for (j, &jb) in joints_body.iter().enumerate() {
        let pos = joint_scene_pos(user_pos, orientation_rad, jb);
        let refl = Complex64::new(JOINT_REFLECTIVITY[j.min(N_JOINTS - 1)], 0.0);
        paths.push(scatter_path(link, pos, refl, PathKind::Body(j))?);
    }
    Ok(paths)
}

/// Renders per-link CSI streams for a motion trace, with ground truth.
pub fn render_csi(
    scene: &Scene,
    motion: &MotionTrace,
) -> Result<(BTreeMap<LinkId, CsiStream>, GroundTruth)> {
    scene.validate()?;
    motion.validate()?;
    if motion.is_empty() {
        return Err(Error::Input("motion trace is empty".into()));
    }
    let mut streams = BTreeMap::new();
    let mut per_link = BTreeMap::new();
    for link in &scene.links {
        let mut frames = Vec::with_capacity(motion.len());
        let mut truths = Vec::with_capacity(motion.len());
        for t in 0..motion.len() {
            let paths = link_paths(
                link,
                &scene.statics,
                motion.user_pos[t],
                motion.orientation_rad[t],
                &motion.joints_body[t],
            )?;
            frames.push(CsiFrame {
                h: synth_field(&paths, &scene.radio),
                timestamp_s: motion.timestamps[t],
                link_id: link.id,
            });
            truths.push(paths);
        }
        streams.insert(link.id, CsiStream::new(scene.radio, frames)?);
        per_link.insert(link.id, truths);
    }
    Ok((
        streams,
        GroundTruth {
            user_pos: motion.user_pos.clone(),
            orientation_rad: motion.orientation_rad.clone(),
            joints_body: motion.joints_body.clone(),
            per_link,
        },
    ))
}

/// Applies a carrier frequency offset and additive circular complex Gaussian
/// noise at the stated SNR (relative to each frame's mean power). A
/// non-finite `snr_db` means noiseless. Deterministic per seed.
pub fn inject_impairments(stream: &CsiStream, cfo_hz: f64, snr_db: f64, seed: u64) -> CsiStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut frames = Vec::with_capacity(stream.len());
    for f in &stream.frames {
        let rot = Complex64::from_polar(1.0, std::f64::consts::TAU * cfo_hz * f.timestamp_s);
        let mut h = f.h.clone();
        if cfo_hz != 0.0 {
            for z in h.iter_mut() {
                *z *= rot;
            }
        }
        if snr_db.is_finite() {
            let noise_var = f.power() / 10f64.powf(snr_db / 10.0);
            let sigma = (noise_var / 2.0).sqrt();
            for z in h.iter_mut() {
                *z += Complex64::new(
                    sigma * normal.sample(&mut rng),
                    sigma * normal.sample(&mut rng),
                );
            }
        }
        frames.push(CsiFrame {
            h,
            timestamp_s: f.timestamp_s,
            link_id: f.link_id,
        });
    }
    CsiStream {
        frames,
        config: stream.config,
    }
}

// ---------------------------------------------------------------------------
// Motion generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MotionPath {
    Line { from: Vec2, to: Vec2 },
    Orbit { center: Vec2, radius: f64, start_angle: f64, turns: f64 },
}

impl MotionPath {
    fn position(&self, frac: f64) -> Vec2 {
        match *self {
            MotionPath::Line { from, to } => from.lerp(to, frac),
            MotionPath::Orbit {
                center,
                radius,
                start_angle,
                turns,
            } => center + Vec2::from_angle(start_angle + std::f64::consts::TAU * turns * frac) * radius,
        }
    }

    fn heading(&self, frac: f64) -> f64 {
        let eps = 1e-6;
        let a = self.position((frac - eps).max(0.0));
        let b = self.position((frac + eps).min(1.0));
        match (b - a).try_unit() {
            Some(u) => u.angle(),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PoseStyle {
    /// Alternating punches: wrists extend up and outward.
    Boxing { rate_hz: f64, amp: f64 },
    /// Walking swing: arms and ankles oscillate laterally.
    Swing { rate_hz: f64, amp: f64 },
    /// Arms held close to the torso with small movements.
    Subtle { rate_hz: f64, amp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub path: MotionPath,
    pub pose: PoseStyle,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Pose oscillator phase offset in radians.
    pub phase: f64,
}

/// Joint index pairs used by pose modulation.
const L_ELBOW: usize = 4;
const R_ELBOW: usize = 5;
const L_WRIST: usize = 6;
const R_WRIST: usize = 7;
const L_KNEE: usize = 10;
const R_KNEE: usize = 11;
const L_ANKLE: usize = 12;
const R_ANKLE: usize = 13;

fn pose_at(style: PoseStyle, t: f64, phase: f64, arms_close: bool) -> Vec<Vec2> {
    let mut joints: Vec<Vec2> = REST_POSE.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
    if arms_close {
        joints[2] = Vec2::new(0.20, 1.45);
        joints[3] = Vec2::new(-0.20, 1.45);
        joints[L_ELBOW] = Vec2::new(0.22, 1.15);
        joints[R_ELBOW] = Vec2::new(-0.22, 1.15);
        joints[L_WRIST] = Vec2::new(0.17, 0.93);
        joints[R_WRIST] = Vec2::new(-0.17, 0.93);
    }
    match style {
        PoseStyle::Boxing { rate_hz, amp } | PoseStyle::Subtle { rate_hz, amp } => {
            let p = (std::f64::consts::TAU * rate_hz * t + phase).sin();
            let e_l = p.max(0.0).powi(2) * amp;
            let e_r = (-p).max(0.0).powi(2) * amp;
            joints[L_WRIST] += Vec2::new(0.12 * e_l, 0.48 * e_l);
            joints[L_ELBOW] += Vec2::new(0.06 * e_l, 0.20 * e_l);
            joints[R_WRIST] += Vec2::new(-0.12 * e_r, 0.48 * e_r);
            joints[R_ELBOW] += Vec2::new(-0.06 * e_r, 0.20 * e_r);
            // slight bob
            let bob = 0.02 * (2.0 * std::f64::consts::TAU * rate_hz * t + phase).sin() * amp;
            joints[0].y += bob;
            joints[1].y += bob;
        }
        PoseStyle::Swing { rate_hz, amp } => {
            let s = (std::f64::consts::TAU * rate_hz * t + phase).sin();
            joints[L_WRIST].x += 0.10 * amp * s;
            joints[L_ELBOW].x += 0.05 * amp * s;
            joints[R_WRIST].x -= 0.10 * amp * s;
            joints[R_ELBOW].x -= 0.05 * amp * s;
            joints[L_ANKLE].x += 0.06 * amp * s;
            joints[R_ANKLE].x -= 0.06 * amp * s;
            joints[L_KNEE].x += 0.03 * amp * s;
            joints[R_KNEE].x -= 0.03 * amp * s;
        }
    }
    joints
}

/// Samples a deterministic motion trace from a spec.
pub fn generate_motion(spec: &MotionSpec) -> MotionTrace {
    generate_motion_styled(spec, false)
}

fn generate_motion_styled(spec: &MotionSpec, arms_close: bool) -> MotionTrace {
    let n = (spec.duration_s * spec.sample_rate_hz).round().max(1.0) as usize;
    let mut timestamps = Vec::with_capacity(n);
    let mut user_pos = Vec::with_capacity(n);
    let mut orientation = Vec::with_capacity(n);
    let mut joints = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / spec.sample_rate_hz;
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        timestamps.push(t);
        user_pos.push(spec.path.position(frac));
        orientation.push(spec.path.heading(frac).rem_euclid(std::f64::consts::TAU));
        joints.push(pose_at(spec.pose, t, spec.phase, arms_close));
    }
    MotionTrace {
        timestamps,
        user_pos,
        orientation_rad: orientation,
        joints_body: joints,
    }
}

// ---------------------------------------------------------------------------
// Preset scenarios
// ---------------------------------------------------------------------------

pub const PRESET_NAMES: [&str; 3] = ["case_study_5rx", "single_link_walk", "torso_arm_ambiguity"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetOptions {
    pub duration_s: f64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions { duration_s: 12.0 }
    }
}

/// Builds one of the documented preset scenarios, deterministic per seed.
pub fn preset_scenario(name: &str, seed: u64) -> Result<(Scene, MotionTrace)> {
    preset_scenario_with(name, seed, PresetOptions::default())
}

pub fn preset_scenario_with(
    name: &str,
    seed: u64,
    opts: PresetOptions,
) -> Result<(Scene, MotionTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |r: &mut ChaCha8Rng, amp: f64| r.random_range(-amp..=amp);
    match name {
        "case_study_5rx" => {
            let radio = RadioConfig::desk();
            let tx = Vec2::new(3.0 + jitter(&mut rng, 0.15), 5.5);
            let rx_base = [
                Vec2::new(0.5, 0.5),
                Vec2::new(2.0, 0.35),
                Vec2::new(4.0, 0.35),
                Vec2::new(5.5, 0.5),
                Vec2::new(5.6, 3.0),
            ];
            let links = rx_base
                .iter()
                .enumerate()
                .map(|(i, &rx)| {
                    Link::new(
                        i as u32,
                        tx,
                        rx + Vec2::new(jitter(&mut rng, 0.15), jitter(&mut rng, 0.15)),
                    )
                })
                .collect();
            let statics = wall_statics(&mut rng);
            let scene = Scene {
                links,
                statics,
                radio,
                seed,
            };
            let spec = MotionSpec {
                path: MotionPath::Orbit {
                    center: Vec2::new(3.0 + jitter(&mut rng, 0.2), 2.6 + jitter(&mut rng, 0.2)),
                    radius: 0.8 + jitter(&mut rng, 0.1),
                    start_angle: rng.random_range(0.0..std::f64::consts::TAU),
                    turns: 0.6,
                },
                pose: PoseStyle::Boxing {
                    rate_hz: 0.9 + jitter(&mut rng, 0.1),
                    amp: 1.0,
                },
                duration_s: opts.duration_s,
                sample_rate_hz: radio.sample_rate_hz,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            };
            Ok((scene, generate_motion(&spec)))
        }
        "single_link_walk" => {
            let mut radio = RadioConfig::desk();
            radio.carrier_wavelength_m = 0.25;
            radio.antenna_spacing_m = 0.125;
            let links = vec![Link::new(0, Vec2::new(0.5, 3.0), Vec2::new(5.5, 3.0))];
            let statics = wall_statics(&mut rng);
            let scene = Scene {
                links,
                statics,
                radio,
                seed,
            };
            let x = 3.0 + jitter(&mut rng, 0.2);
            let spec = MotionSpec {
                path: MotionPath::Line {
                    from: Vec2::new(x, 3.15),
                    to: Vec2::new(x + jitter(&mut rng, 0.15), 5.7),
                },
                pose: PoseStyle::Swing {
                    rate_hz: 0.8 + jitter(&mut rng, 0.1),
                    amp: 1.0,
                },
                duration_s: opts.duration_s,
                sample_rate_hz: radio.sample_rate_hz,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            };
            Ok((scene, generate_motion(&spec)))
        }
        "torso_arm_ambiguity" => {
            let radio = RadioConfig::desk();
            let tx = Vec2::new(3.0 + jitter(&mut rng, 0.15), 5.5);
            let rx_base = [
                Vec2::new(0.5, 0.5),
                Vec2::new(2.0, 0.35),
                Vec2::new(4.0, 0.35),
                Vec2::new(5.5, 0.5),
                Vec2::new(5.6, 3.0),
            ];
            let links = rx_base
                .iter()
                .enumerate()
                .map(|(i, &rx)| {
                    Link::new(
                        i as u32,
                        tx,
                        rx + Vec2::new(jitter(&mut rng, 0.15), jitter(&mut rng, 0.15)),
                    )
                })
                .collect();
            let statics = wall_statics(&mut rng);
            let scene = Scene {
                links,
                statics,
                radio,
                seed,
            };
            let spec = MotionSpec {
                path: MotionPath::Orbit {
                    center: Vec2::new(3.0 + jitter(&mut rng, 0.2), 2.6 + jitter(&mut rng, 0.2)),
                    radius: 0.5 + jitter(&mut rng, 0.05),
                    start_angle: rng.random_range(0.0..std::f64::consts::TAU),
                    turns: 0.35,
                },
                pose: PoseStyle::Subtle {
                    rate_hz: 0.9 + jitter(&mut rng, 0.1),
                    amp: 0.12,
                },
                duration_s: opts.duration_s,
                sample_rate_hz: radio.sample_rate_hz,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            };
            Ok((scene, generate_motion_styled(&spec, true)))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

fn wall_statics(rng: &mut ChaCha8Rng) -> Vec<Scatterer> {
    let mut statics: Vec<Scatterer> = [
        Vec2::new(3.0, 5.95),
        Vec2::new(0.05, 3.0),
        Vec2::new(5.95, 3.0),
        Vec2::new(3.0, 0.05),
    ]
    .iter()
    .map(|&pos| Scatterer {
        pos,
        reflectivity: Complex64::from_polar(
            0.45,
            rng.random_range(0.0..std::f64::consts::TAU),
        ),
        kind: ScattererKind::Static,
    })
    .collect();
    // one piece of furniture somewhere off-center
    statics.push(Scatterer {
        pos: Vec2::new(rng.random_range(0.8..1.8), rng.random_range(3.8..4.8)),
        reflectivity: Complex64::from_polar(0.5, rng.random_range(0.0..std::f64::consts::TAU)),
        kind: ScattererKind::Static,
    });
    statics
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;
    use approx::assert_relative_eq;

    fn single_link_scene() -> Scene {
        Scene {
            links: vec![Link::new(0, Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0))],
            statics: vec![],
            radio: RadioConfig::desk(),
            seed: 0,
        }
    }

    fn still_motion(n: usize, rate: f64, pos: Vec2) -> MotionTrace {
        MotionTrace {
            timestamps: (0..n).map(|i| i as f64 / rate).collect(),
            user_pos: vec![pos; n],
            orientation_rad: vec![0.0; n],
            joints_body: vec![REST_POSE.iter().map(|&(x, y)| Vec2::new(x, y)).collect(); n],
        }
    }

    #[test]
    fn direct_path_phase_slope() {
        // Direct path only: no statics, no body.
        let mut scene = single_link_scene();
        scene.radio.n_subcarriers = 16;
        let motion = MotionTrace {
            timestamps: vec![0.0],
            user_pos: vec![Vec2::new(2.0, 2.0)],
            orientation_rad: vec![0.0],
            joints_body: vec![vec![]],
        };
        let (streams, _) = render_csi(&scene, &motion).unwrap();
        let frame = &streams[&LinkId(0)].frames[0];
        let tau = 4.0 / SPEED_OF_LIGHT;
        let expected_step = -std::f64::consts::TAU * scene.radio.subcarrier_spacing_hz * tau;
        for k in 0..15 {
            let step = (frame.h[(k + 1, 0)] / frame.h[(k, 0)]).arg();
            assert_relative_eq!(step, expected_step, epsilon = 1e-9);
        }
    }

    #[test]
    fn scatterer_excess_path_exact() {
        let scene = single_link_scene();
        let s = Vec2::new(1.0, 2.0);
        let link = scene.links[0];
        let paths = link_paths(&link, &[Scatterer {
            pos: s,
            reflectivity: Complex64::new(0.5, 0.0),
            kind: ScattererKind::Static,
        }], Vec2::new(2.0, 1.0), 0.0, &[])
        .unwrap();
        let geometric = (link.tx_pos.distance(s) + s.distance(link.rx_pos)) / SPEED_OF_LIGHT;
        let gap = paths[1].tof_s - paths[0].tof_s;
        assert_relative_eq!(gap, geometric - link.length() / SPEED_OF_LIGHT, epsilon = 1e-18);
    }

    #[test]
    fn geometry_reciprocity() {
        let link = Link::new(0, Vec2::new(0.3, 1.0), Vec2::new(4.0, -0.5));
        let swapped = Link::new(0, link.rx_pos, link.tx_pos);
        let statics = vec![Scatterer {
            pos: Vec2::new(2.0, 2.5),
            reflectivity: Complex64::new(0.4, 0.1),
            kind: ScattererKind::Static,
        }];
        let joints: Vec<Vec2> = REST_POSE.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let a = link_paths(&link, &statics, Vec2::new(1.5, 1.5), 0.3, &joints).unwrap();
        let b = link_paths(&swapped, &statics, Vec2::new(1.5, 1.5), 0.3, &joints).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_relative_eq!(p.tof_s, q.tof_s, epsilon = 1e-18);
        }
    }

    #[test]
    fn energy_additivity_on_orthogonal_paths() {
        // Delays at distinct DFT bins make paths incoherent across
        // subcarriers, so cross terms cancel exactly over the k-sum.
        let radio = RadioConfig::desk();
        let bin = 1.0 / (radio.n_subcarriers as f64 * radio.subcarrier_spacing_hz);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut bins: Vec<u64> = Vec::new();
            while bins.len() < 3 {
                let b = rng.random_range(1..radio.n_subcarriers as u64);
                if !bins.contains(&b) {
                    bins.push(b);
                }
            }
            let paths: Vec<PathTruth> = bins
                .iter()
                .map(|&b| PathTruth {
                    kind: PathKind::Static(b as usize),
                    aoa_rad: rng.random_range(-1.0..1.0),
                    tof_s: b as f64 * bin,
                    gain: Complex64::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ),
                })
                .collect();
            let h = synth_field(&paths, &radio);
            let total: f64 = h.iter().map(|z| z.norm_sqr()).sum();
            let expected: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum::<f64>()
                * (radio.n_subcarriers * radio.n_rx_antennas) as f64;
            assert_relative_eq!(total, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn impairments_identity_when_clean() {
        let scene = single_link_scene();
        let motion = still_motion(5, scene.radio.sample_rate_hz, Vec2::new(2.0, 1.5));
        let (streams, _) = render_csi(&scene, &motion).unwrap();
        let stream = &streams[&LinkId(0)];
        let out = inject_impairments(stream, 0.0, f64::INFINITY, 3);
        assert_eq!(out, *stream);
    }

    #[test]
    fn impairments_snr_calibrated() {
        let scene = single_link_scene();
        let n = 90; // 90 frames x 120 entries > 1e4 samples
        let motion = still_motion(n, scene.radio.sample_rate_hz, Vec2::new(2.0, 1.5));
        let (streams, _) = render_csi(&scene, &motion).unwrap();
        let stream = &streams[&LinkId(0)];
        let noisy = inject_impairments(stream, 0.0, 20.0, 7);
        let mut signal = 0.0;
        let mut noise = 0.0;
        for (a, b) in stream.frames.iter().zip(&noisy.frames) {
            for (x, y) in a.h.iter().zip(b.h.iter()) {
                signal += x.norm_sqr();
                noise += (y - x).norm_sqr();
            }
        }
        let snr_db = 10.0 * (signal / noise).log10();
        assert!((snr_db - 20.0).abs() < 0.5, "measured snr {snr_db}");
    }

    #[test]
    fn impairments_deterministic() {
        let scene = single_link_scene();
        let motion = still_motion(4, scene.radio.sample_rate_hz, Vec2::new(2.0, 1.5));
        let (streams, _) = render_csi(&scene, &motion).unwrap();
        let a = inject_impairments(&streams[&LinkId(0)], 50.0, 15.0, 99);
        let b = inject_impairments(&streams[&LinkId(0)], 50.0, 15.0, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn cfo_sanitizes_away() {
        // A 100 Hz CFO scrambles phase over time; after conjugate
        // multiplication the cross-antenna phase is constant again.
        let scene = single_link_scene();
        let motion = still_motion(50, scene.radio.sample_rate_hz, Vec2::new(2.0, 1.5));
        let (streams, _) = render_csi(&scene, &motion).unwrap();
        let noisy = inject_impairments(&streams[&LinkId(0)], 100.0, f64::INFINITY, 0);
        let mut phases = Vec::new();
        for f in &noisy.frames {
            let clean = crate::csi::sanitize_phase(f, 0).unwrap();
            phases.push(clean.h[(3, 1)].arg());
        }
        let first = phases[0];
        for p in &phases {
            assert!((p - first).abs() < 1e-9, "phase drifted by {}", (p - first).abs());
        }
    }

    #[test]
    fn presets_deterministic_and_valid() {
        for name in PRESET_NAMES {
            let (s1, m1) = preset_scenario(name, 7).unwrap();
            let (s2, m2) = preset_scenario(name, 7).unwrap();
            assert_eq!(s1, s2, "{name} scene not deterministic");
            assert_eq!(m1, m2, "{name} motion not deterministic");
            s1.validate().unwrap();
            m1.validate().unwrap();
            let (s3, _) = preset_scenario(name, 8).unwrap();
            assert_ne!(s1, s3, "{name} ignores the seed");
        }
    }

    #[test]
    fn case_study_has_five_links() {
        let (scene, _) = preset_scenario("case_study_5rx", 7).unwrap();
        assert_eq!(scene.links.len(), 5);
        let tx = scene.links[0].tx_pos;
        for l in &scene.links {
            assert_eq!(l.tx_pos, tx, "single transmitter shared by all links");
        }
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(
            preset_scenario("no_such_preset", 0),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn single_link_walk_crosses_boundaries() {
        let (scene, motion) = preset_scenario("single_link_walk", 3).unwrap();
        let link = scene.links[0];
        let n = geometry::crossing_count(
            motion.user_pos[0],
            *motion.user_pos.last().unwrap(),
            &link,
            scene.radio.carrier_wavelength_m,
        );
        assert!(n >= 10, "only {n} boundary crossings");
    }
}
