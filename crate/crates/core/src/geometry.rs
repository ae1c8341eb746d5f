//! Large-scale geometry: ellipse/bearing localization from multi-link
//! observations, Fresnel-zone indexing around a link, and motion-axis
//! orientation estimation from per-link fluctuation statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::csi::{Link, LinkId};
use crate::error::{Error, Result};
use crate::pencil::LinkObservation;
use crate::vec2::Vec2;
use crate::SPEED_OF_LIGHT;

/// Converged (or best-found) user position with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub pos: Vec2,
    /// Weighted RMS constraint residual in meters.
    pub residual: f64,
    /// 2×2 covariance, row-major.
    pub covariance: [[f64; 2]; 2],
    pub n_constraints: usize,
    /// False when the solver hit its iteration cap before the step shrank.
    pub converged: bool,
}

/// Continuous Fresnel-zone index of a point relative to a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FresnelIndex {
    pub n: f64,
    pub link_id: LinkId,
}

/// n = (|p−TX| + |p−RX| − |TX−RX|) / (λ/2); zero exactly on the segment.
pub fn fresnel_index(p: Vec2, link: &Link, wavelength_m: f64) -> FresnelIndex {
    let excess = p.distance(link.tx_pos) + p.distance(link.rx_pos) - link.length();
    FresnelIndex {
        n: excess / (wavelength_m / 2.0),
        link_id: link.id,
    }
}

/// Outward unit normal of the confocal ellipse through `p`: the normalized
/// gradient of |p−TX| + |p−RX|.
pub fn boundary_normal(p: Vec2, link: &Link) -> Result<Vec2> {
    let to_tx = p - link.tx_pos;
    let to_rx = p - link.rx_pos;
    let (u1, u2) = match (to_tx.try_unit(), to_rx.try_unit()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::FocusSingularity { link: link.id.0 }),
    };
    (u1 + u2)
        .try_unit()
        .ok_or(Error::FocusSingularity { link: link.id.0 })
}

/// Number of integer Fresnel-zone boundaries crossed along the straight
/// segment, counted with multiplicity over monotone pieces. The path-sum
/// |p−TX| + |p−RX| is convex along a line, so there are at most two pieces.
pub fn crossing_count(seg_start: Vec2, seg_end: Vec2, link: &Link, wavelength_m: f64) -> usize {
    let n_at = |t: f64| fresnel_index(seg_start.lerp(seg_end, t), link, wavelength_m).n;
    // ternary search for the minimum of the convex index profile
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if n_at(m1) <= n_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t_min = 0.5 * (lo + hi);
    let pieces = [(n_at(0.0), n_at(t_min)), (n_at(t_min), n_at(1.0))];
    let mut count = 0usize;
    for (a, b) in pieces {
        let (lo, hi) = (a.min(b), a.max(b));
        // integers strictly inside (lo, hi); tangencies do not count
        let eps = 1e-9;
        let first = (lo + eps).floor() as i64 + 1;
        let last = (hi - eps).ceil() as i64 - 1;
        if last >= first {
            count += (last - first + 1) as usize;
        }
    }
    count
}

struct Constraint {
    link: Link,
    weight: f64,
    kind: ConstraintKind,
}

enum ConstraintKind {
    /// Path-sum ellipse: |u−TX| + |u−RX| = c·τ.
    Ellipse { path_sum_m: f64 },
    /// Bearing at the RX array, radians from broadside.
    Bearing { theta: f64 },
}

impl Constraint {
    /// Residual in meters and its gradient at `u`.
    fn eval(&self, u: Vec2) -> (f64, Vec2) {
        match self.kind {
            ConstraintKind::Ellipse { path_sum_m } => {
                let to_tx = u - self.link.tx_pos;
                let to_rx = u - self.link.rx_pos;
                let r = to_tx.norm() + to_rx.norm() - path_sum_m;
                let g = to_tx.try_unit().unwrap_or(Vec2::ZERO)
                    + to_rx.try_unit().unwrap_or(Vec2::ZERO);
                (r, g)
            }
            ConstraintKind::Bearing { theta } => {
                let axis = self.link.array_axis();
                let broad = self.link.broadside();
                let v = u - self.link.rx_pos;
                let s = v.dot(axis);
                let c = v.dot(broad);
                let norm2 = (s * s + c * c).max(1e-18);
                let dist = v.norm();
                let mut dtheta = s.atan2(c) - theta;
                // wrap to (−π, π]
                dtheta -= std::f64::consts::TAU * (dtheta / std::f64::consts::TAU).round();
                let r = dist * dtheta;
                let dtheta_du = (axis * c - broad * s) / norm2;
                let g = v.try_unit().unwrap_or(Vec2::ZERO) * dtheta + dtheta_du * dist;
                (r, g)
            }
        }
    }
}

fn objective(constraints: &[Constraint], u: Vec2) -> f64 {
    constraints
        .iter()
        .map(|c| {
            let (r, _) = c.eval(u);
            c.weight * r * r
        })
        .sum()
}

/// Estimates the user position from the strongest per-link ellipse and
/// bearing constraints by damped Gauss–Newton. Without an initial guess the
/// best point of a 0.25 m lattice over the link bounding box seeds the solve.
pub fn locate_user(
    obs: &[LinkObservation],
    links: &[Link],
    init: Option<Vec2>,
) -> Result<PositionEstimate> {
    let by_id: BTreeMap<LinkId, Link> = links.iter().map(|l| (l.id, *l)).collect();
    let mut constraints = Vec::new();
    for o in obs {
        let link = *by_id
            .get(&o.link_id)
            .ok_or_else(|| Error::Input(format!("observation references unknown {}", o.link_id)))?;
        if let Some(i) = argmax(&o.tof_powers) {
            constraints.push(Constraint {
                link,
                weight: o.tof_powers[i].max(1e-12),
                kind: ConstraintKind::Ellipse {
                    path_sum_m: SPEED_OF_LIGHT * o.tof_s[i],
                },
            });
        }
        if let Some(i) = argmax(&o.aoa_powers) {
            constraints.push(Constraint {
                link,
                weight: o.aoa_powers[i].max(1e-12),
                kind: ConstraintKind::Bearing {
                    theta: o.aoa_rad[i],
                },
            });
        }
    }
    if constraints.len() < 2 {
        return Err(Error::Underdetermined {
            constraints: constraints.len(),
        });
    }
    // normalize weights to mean one
    let mean_w: f64 =
        constraints.iter().map(|c| c.weight).sum::<f64>() / constraints.len() as f64;
    for c in &mut constraints {
        c.weight /= mean_w.max(1e-30);
    }

    let mut u = match init {
        Some(p) => p,
        None => grid_init(&constraints, links),
    };

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut cost = objective(&constraints, u);
    for _ in 0..100 {
        // assemble normal equations JᵀWJ δ = −JᵀWr
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in &constraints {
            let (r, g) = c.eval(u);
            a11 += c.weight * g.x * g.x;
            a12 += c.weight * g.x * g.y;
            a22 += c.weight * g.y * g.y;
            b1 -= c.weight * g.x * r;
            b2 -= c.weight * g.y * r;
        }
        let mut accepted = false;
        for _ in 0..8 {
            let d11 = a11 + lambda;
            let d22 = a22 + lambda;
            let det = d11 * d22 - a12 * a12;
            if det.abs() < 1e-18 {
                lambda *= 10.0;
                continue;
            }
            let step = Vec2::new((b1 * d22 - b2 * a12) / det, (b2 * d11 - b1 * a12) / det);
            let candidate = u + step;
            let c_cost = objective(&constraints, candidate);
            if c_cost <= cost {
                u = candidate;
                cost = c_cost;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if step.norm() < 1e-6 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !accepted {
            converged = converged || !accepted && cost < 1e-18;
            break;
        }
    }

    // covariance from the Gauss-Newton normal matrix at the solution
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for c in &constraints {
        let (_, g) = c.eval(u);
        a11 += c.weight * g.x * g.x;
        a12 += c.weight * g.x * g.y;
        a22 += c.weight * g.y * g.y;
    }
    let m = constraints.len();
    let sigma2 = cost / (m.saturating_sub(2).max(1)) as f64;
    let det = (a11 * a22 - a12 * a12).max(1e-18);
    let covariance = [
        [sigma2 * a22 / det, -sigma2 * a12 / det],
        [-sigma2 * a12 / det, sigma2 * a11 / det],
    ];
    Ok(PositionEstimate {
        pos: u,
        residual: (cost / m as f64).sqrt(),
        covariance,
        n_constraints: m,
        converged,
    })
}

fn grid_init(constraints: &[Constraint], links: &[Link]) -> Vec2 {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for l in links {
        for p in [l.tx_pos, l.rx_pos] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
    }
    lo = lo - Vec2::new(1.0, 1.0);
    hi = hi + Vec2::new(1.0, 1.0);
    let mut best = lo;
    let mut best_cost = f64::INFINITY;
    let step = 0.25;
    let nx = ((hi.x - lo.x) / step).ceil() as usize + 1;
    let ny = ((hi.y - lo.y) / step).ceil() as usize + 1;
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Vec2::new(lo.x + ix as f64 * step, lo.y + iy as f64 * step);
            let c = objective(constraints, p);
            if c < best_cost {
                best_cost = c;
                best = p;
            }
        }
    }
    best
}

fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
}

/// Motion-axis estimate in [0, π) with a flat-objective flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrientationEstimate {
    pub phi_rad: f64,
    pub objective: f64,
    /// True when the objective is nearly constant (ambiguous geometry).
    pub flat: bool,
}

/// Estimates the user's motion axis from per-link fluctuation variances.
///
/// The predicted relative fluctuation of link `l` for motion along `φ` is
/// `|cos(φ − β_l)|` with `β_l` the boundary-normal angle at the user. The
/// returned axis minimizes the L2-normalized mismatch over a 1° grid with
/// golden-section refinement; `φ` and `φ+π` are inherently equivalent.
pub fn estimate_orientation(
    fluct: &BTreeMap<LinkId, f64>,
    user_pos: Vec2,
    links: &[Link],
) -> Result<OrientationEstimate> {
    let by_id: BTreeMap<LinkId, Link> = links.iter().map(|l| (l.id, *l)).collect();
    let mut betas = Vec::new();
    let mut f = Vec::new();
    for (id, &v) in fluct {
        if v < 0.0 {
            return Err(Error::Input(format!("negative variance for {id}")));
        }
        let link = by_id
            .get(id)
            .ok_or_else(|| Error::Input(format!("fluctuation references unknown {id}")))?;
        betas.push(boundary_normal(user_pos, link)?.angle());
        f.push(v);
    }
    if f.len() < 2 {
        return Err(Error::Input(format!(
            "orientation needs at least 2 links, got {}",
            f.len()
        )));
    }
    let f_norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if f_norm == 0.0 {
        return Err(Error::NoMotion);
    }
    let f_hat: Vec<f64> = f.iter().map(|x| x / f_norm).collect();

    let mismatch = |phi: f64| -> f64 {
        let m: Vec<f64> = betas.iter().map(|b| (phi - b).cos().abs()).collect();
        let m_norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if m_norm < 1e-12 {
            return f64::INFINITY;
        }
        f_hat
            .iter()
            .zip(&m)
            .map(|(fi, mi)| {
                let d = fi - mi / m_norm;
                d * d
            })
            .sum()
    };

    let deg = std::f64::consts::PI / 180.0;
    let mut best_phi = 0.0;
    let mut best = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..180 {
        let phi = i as f64 * deg;
        let j = mismatch(phi);
        if j < best {
            best = j;
            best_phi = phi;
        }
        worst = worst.max(j);
    }
    // golden-section refinement within ±1° of the best grid point
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_phi - deg, best_phi + deg);
    let (mut c, mut d) = (b - gr * (b - a), a + gr * (b - a));
    let (mut fc, mut fd) = (mismatch(c), mismatch(d));
    for _ in 0..50 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = mismatch(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = mismatch(d);
        }
    }
    let phi = 0.5 * (a + b);
    let value = mismatch(phi);
    let flat = worst - value < 1e-3 * worst.max(1e-12);
    Ok(OrientationEstimate {
        phi_rad: phi.rem_euclid(std::f64::consts::PI),
        objective: value,
        flat,
    })
}
