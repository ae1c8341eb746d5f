//! Multi-link wireless sensing pipeline at desk scale.
//!
//! The crate turns channel state information (CSI) from several synthetic
//! radio links into human skeleton images, and schedules a fixed per-frame
//! compute budget between perception links and generative-inference steps:
//!
//! * [`csi`] — CSI domain types and sanitization (phase-error removal,
//!   static-component suppression).
//! * [`synth`] — a multipath channel simulator with full ground truth; every
//!   estimator in the crate is tested against it.
//! * [`pencil`] — matrix-pencil estimation of per-path delay (across
//!   subcarriers) and arrival angle (across antennas).
//! * [`geometry`] — ellipse/bearing localization, Fresnel-zone indexing, and
//!   motion-axis orientation estimation.
//! * [`features`] — distance- and orientation-weighted fusion of per-link
//!   amplitude/phase vectors into windowed network inputs.
//! * [`net`] — a small convolutional encoder–decoder mapping fused CSI
//!   windows to per-joint heatmaps, trained from scratch.
//! * [`skeleton`] — keypoint/heatmap ground-truth types and line rendering.
//! * [`metrics`] — total variation, SSIM, and an MSCN/AGGD naturalness score
//!   against a procedural reference corpus.
//! * [`scheduler`] — the frame-time budget model and the feedback controller
//!   that trades links against inference steps.
//! * [`aigc`] — client for an instruction-guided image-editing endpoint plus
//!   a deterministic offline stub.
//! * [`pipeline`] — end-to-end orchestration and experiment reproduction.

pub mod aigc;
pub mod csi;
pub mod error;
pub mod features;
pub mod geometry;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod pencil;
pub mod pipeline;
pub mod scheduler;
pub mod skeleton;
pub mod synth;
pub mod tensor;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;

pub use csi::{CsiFrame, CsiStream, Link, LinkId, RadioConfig};
pub use features::{InputTensor, WeightVector};
pub use geometry::{FresnelIndex, PositionEstimate};
pub use net::{Net, NetConfig, TrainConfig};

pub use pencil::{LinkObservation, PoleSet};
pub use scheduler::{Feedback, ScheduleConfig, ScheduleState};

pub use skeleton::SkeletonFrame;
pub use synth::{GroundTruth, MotionTrace, Scene};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Per-link RNG stream: XOR of the base seed with the link index.
pub fn link_seed(seed: u64, link: LinkId) -> u64 {
    seed ^ u64::from(link.0)
}

/// General-purpose seed splitting for independent substreams.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
