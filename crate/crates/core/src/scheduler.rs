//! Frame-time budget between perception links and generative-inference
//! steps, and the feedback controller that reallocates between them with
//! dwell hysteresis.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Content refresh period in seconds (1 Hz default).
    pub frame_period_s: f64,
    /// Processing time of one perception link.
    pub per_link_s: f64,
    /// Skeleton-image generation time.
    pub skeleton_s: f64,
    /// Time per generative-inference step.
    pub per_step_s: f64,
    pub n_links_max: u32,
    pub min_steps: u32,
    /// Frames a change is held before the next one is allowed.
    pub dwell_frames: u32,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            frame_period_s: 1.0,
            per_link_s: 0.1,
            skeleton_s: 0.05,
            per_step_s: 0.02,
            n_links_max: 16,
            min_steps: 1,
            dwell_frames: 3,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frame_period_s", self.frame_period_s),
            ("per_link_s", self.per_link_s),
            ("skeleton_s", self.skeleton_s),
            ("per_step_s", self.per_step_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.min_steps < 1 {
            return Err(Error::Config("min_steps must be >= 1".into()));
        }
        if self.per_link_s + self.skeleton_s >= self.frame_period_s {
            return Err(Error::Config(
                "even one perception link does not fit in the frame period".into(),
            ));
        }
        Ok(())
    }
}

/// Time left for generative inference after perception, and the step count
/// it buys: `aigc_time = period − n·per_link − skeleton`.
pub fn budget(n_links: u32, cfg: &ScheduleConfig) -> Result<(f64, u32)> {
    if n_links < 1 || n_links > cfg.n_links_max {
        return Err(Error::Input(format!(
            "link count {n_links} outside [1, {}]",
            cfg.n_links_max
        )));
    }
    let aigc_time =
        cfg.frame_period_s - n_links as f64 * cfg.per_link_s - cfg.skeleton_s;
    if aigc_time < cfg.min_steps as f64 * cfg.per_step_s {
        let (_, max_feasible) = feasible_range(cfg)?;
        return Err(Error::Infeasible {
            requested: n_links,
            max_feasible,
        });
    }
    let steps = (aigc_time / cfg.per_step_s).floor() as u32;
    Ok((aigc_time, steps))
}

/// Smallest and largest feasible link counts (n_min is always 1).
pub fn feasible_range(cfg: &ScheduleConfig) -> Result<(u32, u32)> {
    cfg.validate()?;
    let budget_for = |n: u32| {
        cfg.frame_period_s - n as f64 * cfg.per_link_s - cfg.skeleton_s
            >= cfg.min_steps as f64 * cfg.per_step_s
    };
    if !budget_for(1) {
        return Err(Error::Config(
            "config leaves no room for the minimum inference steps at one link".into(),
        ));
    }
    let mut n_max = 1;
    while n_max + 1 <= cfg.n_links_max && budget_for(n_max + 1) {
        n_max += 1;
    }
    Ok((1, n_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackKind {
    /// Generated pose does not match the user: perception needs links.
    PostureMismatch,
    /// Generated image quality too low: inference needs steps.
    QualityLow,
    Ok,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub kind: FeedbackKind,
    pub timestamp_s: f64,
}

/// Controller state: always feasible under the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub n_links: u32,
    pub steps: u32,
    /// Frames remaining before another change is allowed.
    pub dwell_counter: u32,
    /// Recent feedback, newest last (bounded).
    pub history: VecDeque<Feedback>,
    /// Set when the last request hit a bound instead of changing state.
    pub saturated: bool,
}

const HISTORY_CAP: usize = 32;

impl ScheduleState {
    pub fn new(n_links: u32, cfg: &ScheduleConfig) -> Result<ScheduleState> {
        let (_, steps) = budget(n_links, cfg)?;
        Ok(ScheduleState {
            n_links,
            steps,
            dwell_counter: 0,
            history: VecDeque::new(),
            saturated: false,
        })
    }
}

/// One controller step. Posture mismatch adds a link; low quality removes
/// one; both only when the dwell expired and the move stays feasible.
/// Bound hits set the saturation flag instead of erroring.
pub fn feedback_step(state: &ScheduleState, fb: Feedback, cfg: &ScheduleConfig) -> ScheduleState {
    let mut next = state.clone();
    next.saturated = false;
    next.history.push_back(fb);
    while next.history.len() > HISTORY_CAP {
        next.history.pop_front();
    }
    if next.dwell_counter > 0 {
        next.dwell_counter -= 1;
    }
    let dwell_open = next.dwell_counter == 0;
    match fb.kind {
        FeedbackKind::PostureMismatch => {
            if dwell_open {
                match budget(state.n_links + 1, cfg) {
                    Ok((_, steps)) => {
                        next.n_links = state.n_links + 1;
                        next.steps = steps;
                        next.dwell_counter = cfg.dwell_frames;
                    }
                    Err(_) => next.saturated = true,
                }
            }
        }
        FeedbackKind::QualityLow => {
            if dwell_open {
                if state.n_links > 1 {
                    let (_, steps) = budget(state.n_links - 1, cfg)
                        .expect("fewer links always fit if more did");
                    next.n_links = state.n_links - 1;
                    next.steps = steps;
                    next.dwell_counter = cfg.dwell_frames;
                } else {
                    next.saturated = true;
                }
            }
        }
        FeedbackKind::Ok => {}
    }
    next
}

/// Maps a schedule point to the (similarity, tv, naturalness) it produces.
pub trait QualityModel {
    fn evaluate(&self, n_links: u32, steps: u32, rng: &mut ChaCha8Rng) -> (f64, f64, f64);
}

/// Parametric model: similarity saturates with links,
/// `s(n) = s_max(1 − e^{−n/k})`; smoothness and naturalness degrade as
/// steps shrink (both `a + b/steps`), with optional seeded jitter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParametricQuality {
    pub s_max: f64,
    pub k_links: f64,
    pub tv_base: f64,
    pub tv_per_inv_step: f64,
    pub nat_base: f64,
    pub nat_per_inv_step: f64,
    pub jitter: f64,
}

impl Default for ParametricQuality {
    fn default() -> Self {
        ParametricQuality {
            s_max: 0.95,
            k_links: 2.0,
            tv_base: 0.05,
            tv_per_inv_step: 2.0,
            nat_base: 3.0,
            nat_per_inv_step: 120.0,
            jitter: 0.0,
        }
    }
}

impl QualityModel for ParametricQuality {
    fn evaluate(&self, n_links: u32, steps: u32, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        let noise = |rng: &mut ChaCha8Rng, amp: f64| {
            if self.jitter > 0.0 {
                rng.random_range(-amp..=amp)
            } else {
                0.0
            }
        };
        let s = self.s_max * (1.0 - (-(n_links as f64) / self.k_links).exp())
            + noise(rng, self.jitter);
        let tv = self.tv_base + self.tv_per_inv_step / steps.max(1) as f64
            + noise(rng, self.jitter * 0.1);
        let nat = self.nat_base + self.nat_per_inv_step / steps.max(1) as f64
            + noise(rng, self.jitter * 10.0);
        (s, tv, nat)
    }
}

/// Produces feedback from the current frame's quality readings.
pub trait FeedbackPolicy {
    fn feedback(
        &mut self,
        state: &ScheduleState,
        similarity: f64,
        tv: f64,
        naturalness: f64,
        rng: &mut ChaCha8Rng,
    ) -> FeedbackKind;
}

/// Complains about posture while similarity is below target, and probes one
/// link down (at most once per level) when similarity is satisfied; settles
/// at the smallest feasible link count meeting the target.
#[derive(Debug, Clone)]
pub struct ThresholdPolicy {
    pub similarity_target: f64,
    tried_down_from: std::collections::BTreeSet<u32>,
}

impl ThresholdPolicy {
    pub fn new(similarity_target: f64) -> ThresholdPolicy {
        ThresholdPolicy {
            similarity_target,
            tried_down_from: Default::default(),
        }
    }
}

impl FeedbackPolicy for ThresholdPolicy {
    fn feedback(
        &mut self,
        state: &ScheduleState,
        similarity: f64,
        _tv: f64,
        _naturalness: f64,
        _rng: &mut ChaCha8Rng,
    ) -> FeedbackKind {
        if similarity < self.similarity_target {
            FeedbackKind::PostureMismatch
        } else if state.dwell_counter <= 1 && !self.tried_down_from.contains(&state.n_links) {
            // probe one link down, once per level, only when the controller
            // will actually honor it
            self.tried_down_from.insert(state.n_links);
            FeedbackKind::QualityLow
        } else {
            FeedbackKind::Ok
        }
    }
}

/// Always-content policy (steady state fixture).
pub struct AlwaysOk;

impl FeedbackPolicy for AlwaysOk {
    fn feedback(
        &mut self,
        _: &ScheduleState,
        _: f64,
        _: f64,
        _: f64,
        _: &mut ChaCha8Rng,
    ) -> FeedbackKind {
        FeedbackKind::Ok
    }
}

/// One simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub n_links: u32,
    pub steps: u32,
    pub similarity: f64,
    pub tv: f64,
    pub naturalness: f64,
    pub feedback: FeedbackKind,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub frames: Vec<FrameRecord>,
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("frame,n_links,steps,similarity,tv,naturalness,feedback,saturated\n");
        for r in &self.frames {
            let fb = match r.feedback {
                FeedbackKind::PostureMismatch => "posture_mismatch",
                FeedbackKind::QualityLow => "quality_low",
                FeedbackKind::Ok => "ok",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.frame, r.n_links, r.steps, r.similarity, r.tv, r.naturalness, fb, r.saturated
            ));
        }
        out
    }
}

/// Closed-loop simulation: quality model → feedback policy → controller,
/// deterministic per seed.
pub fn simulate(
    cfg: &ScheduleConfig,
    initial_links: u32,
    quality: &dyn QualityModel,
    policy: &mut dyn FeedbackPolicy,
    n_frames: usize,
    seed: u64,
) -> Result<Trace> {
    cfg.validate()?;
    let mut state = ScheduleState::new(initial_links, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let (similarity, tv, naturalness) = quality.evaluate(state.n_links, state.steps, &mut rng);
        let kind = policy.feedback(&state, similarity, tv, naturalness, &mut rng);
        let fb = Feedback {
            kind,
            timestamp_s: frame as f64 * cfg.frame_period_s,
        };
        state = feedback_step(&state, fb, cfg);
        frames.push(FrameRecord {
            frame,
            n_links: state.n_links,
            steps: state.steps,
            similarity,
            tv,
            naturalness,
            feedback: kind,
            saturated: state.saturated,
        });
    }
    Ok(Trace { frames })
}
