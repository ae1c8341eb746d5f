//! Skeleton ground-truth types: 14 keypoints in image pixels, per-joint
//! heatmaps (normalized Gaussians), and monochrome line rendering of the
//! fixed bone topology.

use crate::image::GrayImage;
use crate::tensor::Tensor3;
use crate::vec2::Vec2;

/// Number of keypoints in the body model.
pub const N_JOINTS: usize = 14;

pub const JOINT_NAMES: [&str; N_JOINTS] = [
    "head",
    "neck",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
];

/// Fixed 13-bone topology over the 14 joints.
pub const BONES: [(usize, usize); 13] = [
    (0, 1),
    (1, 2),
    (1, 3),
    (2, 4),
    (4, 6),
    (3, 5),
    (5, 7),
    (1, 8),
    (1, 9),
    (8, 10),
    (10, 12),
    (9, 11),
    (11, 13),
];

/// Body-frame extent mapped onto skeleton images: lateral ∈ [−1, 1] m,
/// vertical ∈ [0, 2] m, with this fraction of the image kept as margin.
const BODY_LATERAL_HALF_M: f64 = 1.0;
const BODY_HEIGHT_M: f64 = 2.0;
const IMAGE_MARGIN_FRAC: f64 = 0.15;

/// Maps a body-frame joint (lateral, vertical) in meters to image pixels.
/// Vertical-up becomes row-down; the margin keeps heatmap mass in frame.
pub fn body_to_pixel(joint: Vec2, height: usize, width: usize) -> [f64; 2] {
    let mx = IMAGE_MARGIN_FRAC * (width - 1) as f64;
    let my = IMAGE_MARGIN_FRAC * (height - 1) as f64;
    let sx = (width - 1) as f64 - 2.0 * mx;
    let sy = (height - 1) as f64 - 2.0 * my;
    let u = (joint.x + BODY_LATERAL_HALF_M) / (2.0 * BODY_LATERAL_HALF_M);
    let v = 1.0 - joint.y / BODY_HEIGHT_M;
    [mx + u * sx, my + v * sy]
}

/// Ground-truth (or decoded) skeleton: keypoints plus per-joint heatmaps.
#[derive(Debug, Clone)]
pub struct SkeletonFrame {
    /// Keypoint pixel coordinates, (x, y) per joint.
    pub keypoints: Vec<[f64; 2]>,
    /// (H, W, J) heatmaps; each in-frame joint's map sums to 1.
    pub heatmaps: Tensor3,
    /// Joints whose Gaussian mass fell (almost) entirely outside the image.
    pub off_frame: Vec<bool>,
    /// Heatmap Gaussian width in pixels.
    pub sigma_px: f64,
}

impl SkeletonFrame {
    /// Renders normalized Gaussian heatmaps (σ `sigma_px`) around each
    /// keypoint. A joint whose mass is entirely off-image is flagged and
    /// gets an all-zero map.
    pub fn from_keypoints(
        keypoints: Vec<[f64; 2]>,
        height: usize,
        width: usize,
        sigma_px: f64,
    ) -> SkeletonFrame {
        let n = keypoints.len();
        let mut heatmaps = Tensor3::zeros(height, width, n);
        let mut off_frame = vec![false; n];
        let inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
        for (j, kp) in keypoints.iter().enumerate() {
            let mut mass = 0.0;
            for y in 0..height {
                for x in 0..width {
                    let dx = x as f64 - kp[0];
                    let dy = y as f64 - kp[1];
                    let v = (-(dx * dx + dy * dy) * inv2s2).exp();
                    heatmaps.set(y, x, j, v);
                    mass += v;
                }
            }
            if mass < 1e-6 {
                off_frame[j] = true;
                for y in 0..height {
                    for x in 0..width {
                        heatmaps.set(y, x, j, 0.0);
                    }
                }
            } else {
                for y in 0..height {
                    for x in 0..width {
                        let v = heatmaps.get(y, x, j) / mass;
                        heatmaps.set(y, x, j, v);
                    }
                }
            }
        }
        SkeletonFrame {
            keypoints,
            heatmaps,
            off_frame,
            sigma_px,
        }
    }

    pub fn height(&self) -> usize {
        self.heatmaps.h
    }

    pub fn width(&self) -> usize {
        self.heatmaps.w
    }

    pub fn n_joints(&self) -> usize {
        self.keypoints.len()
    }
}

/// Draws the skeleton as 1-px Bresenham bone lines plus 3×3 joint dots.
pub fn render_skeleton(
    keypoints: &[[f64; 2]],
    height: usize,
    width: usize,
    bones: &[(usize, usize)],
) -> GrayImage {
    let mut img = GrayImage::new(width, height);
    for &(a, b) in bones {
        if a >= keypoints.len() || b >= keypoints.len() {
            continue;
        }
        draw_line(
            &mut img,
            keypoints[a][0].round() as i64,
            keypoints[a][1].round() as i64,
            keypoints[b][0].round() as i64,
            keypoints[b][1].round() as i64,
        );
    }
    for kp in keypoints {
        let (cx, cy) = (kp[0].round() as i64, kp[1].round() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                img.set_clipped(cx + dx, cy + dy, 1.0);
            }
        }
    }
    img
}

fn draw_line(img: &mut GrayImage, mut x0: i64, mut y0: i64, x1: i64, y1: i64) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.set_clipped(x0, y0, 1.0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
