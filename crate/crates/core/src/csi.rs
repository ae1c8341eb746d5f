//! CSI domain types and the two sanitization passes: phase-error elimination
//! by conjugate multiplication against a reference antenna, and removal of
//! the static (user-independent) signal component by a centered moving
//! average over time.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Radio front-end parameters shared by every frame of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Carrier wavelength λ in meters.
    pub carrier_wavelength_m: f64,
    /// Subcarrier spacing Δf in Hz.
    pub subcarrier_spacing_hz: f64,
    /// Number of subcarriers K.
    pub n_subcarriers: usize,
    /// Number of receive antennas A.
    pub n_rx_antennas: usize,
    /// Uniform linear array element spacing d in meters.
    pub antenna_spacing_m: f64,
    /// CSI frame rate in Hz.
    pub sample_rate_hz: f64,
    /// Noise floor in dB relative to unit signal power.
    pub noise_floor_db: f64,
}

impl RadioConfig {
    /// Desk-scale defaults: a long-wavelength link so Fresnel boundaries are
    /// centimeters-to-decimeters apart at walking speed.
    pub fn desk() -> RadioConfig {
        RadioConfig {
            carrier_wavelength_m: 0.5,
            subcarrier_spacing_hz: 312_500.0,
            n_subcarriers: 30,
            n_rx_antennas: 4,
            antenna_spacing_m: 0.25,
            sample_rate_hz: 100.0,
            noise_floor_db: -90.0,
        }
    }

    /// Carrier frequency derived from the wavelength.
    pub fn carrier_hz(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_wavelength_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_wavelength_m > 0.0) {
            return Err(Error::Config("carrier wavelength must be > 0".into()));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::Config("subcarrier spacing must be > 0".into()));
        }
        if self.n_subcarriers < 4 {
            return Err(Error::Config("need at least 4 subcarriers".into()));
        }
        if self.n_rx_antennas < 2 {
            return Err(Error::Config("need at least 2 rx antennas".into()));
        }
        if !(self.antenna_spacing_m > 0.0)
            || self.antenna_spacing_m > self.carrier_wavelength_m / 2.0 + 1e-12
        {
            return Err(Error::Config(
                "antenna spacing must be in (0, lambda/2] to avoid spatial aliasing".into(),
            ));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Identifier of a TX–RX link.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl std::fmt::Display for LinkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "link-{}", self.0)
    }
}

/// A transmitter–receiver pair with known positions.
///
/// The receive array sits at `rx_pos` with its broadside pointing at the
/// transmitter; element `a` is offset by `a·d` along the broadside's
/// counterclockwise perpendicular. Arrival angles are measured from
/// broadside, positive toward that perpendicular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub tx_pos: Vec2,
    pub rx_pos: Vec2,
}

impl Link {
    pub fn new(id: u32, tx_pos: Vec2, rx_pos: Vec2) -> Link {
        Link {
            id: LinkId(id),
            tx_pos,
            rx_pos,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_pos.distance(self.rx_pos) < 1e-9 {
            return Err(Error::Geometry(format!(
                "{}: tx and rx positions coincide",
                self.id
            )));
        }
        Ok(())
    }

    /// Unit vector from the array toward the transmitter (array broadside).
    pub fn broadside(&self) -> Vec2 {
        (self.tx_pos - self.rx_pos).try_unit().unwrap_or(Vec2::new(1.0, 0.0))
    }

    /// Unit vector along the antenna array axis.
    pub fn array_axis(&self) -> Vec2 {
        self.broadside().perp()
    }

    /// Signed arrival angle of a path from `p`, measured from broadside.
    pub fn aoa_of(&self, p: Vec2) -> f64 {
        let v = p - self.rx_pos;
        v.dot(self.array_axis()).atan2(v.dot(self.broadside()))
    }

    pub fn length(&self) -> f64 {
        self.tx_pos.distance(self.rx_pos)
    }
}

/// One CSI capture: the K×A complex channel response at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    /// Channel response, subcarrier-major (row k, column a).
    pub h: Array2<Complex64>,
    pub timestamp_s: f64,
    pub link_id: LinkId,
}

impl CsiFrame {
    pub fn n_subcarriers(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Mean |h|^2 over all entries.
    pub fn power(&self) -> f64 {
        let n = self.h.len().max(1) as f64;
        self.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n
    }
}

/// Time-ordered CSI frames of a single link.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiStream {
    pub frames: Vec<CsiFrame>,
    pub config: RadioConfig,
}

impl CsiStream {
    pub fn new(config: RadioConfig, frames: Vec<CsiFrame>) -> Result<CsiStream> {
        let stream = CsiStream { frames, config };
        stream.validate()?;
        Ok(stream)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut prev_t = f64::NEG_INFINITY;
        let link = self.frames.first().map(|f| f.link_id);
        for (i, f) in self.frames.iter().enumerate() {
            if f.h.nrows() != self.config.n_subcarriers || f.h.ncols() != self.config.n_rx_antennas
            {
                return Err(Error::Shape {
                    expected: format!(
                        "{}x{}",
                        self.config.n_subcarriers, self.config.n_rx_antennas
                    ),
                    got: format!("{}x{}", f.h.nrows(), f.h.ncols()),
                });
            }
            if f.timestamp_s <= prev_t {
                return Err(Error::Input(format!(
                    "timestamps not strictly increasing at frame {i}"
                )));
            }
            prev_t = f.timestamp_s;
            if Some(f.link_id) != link {
                return Err(Error::Input(format!(
                    "frame {i} belongs to {} but stream starts with {}",
                    f.link_id,
                    link.unwrap_or_default()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Cancels phase errors common to all antennas of a subcarrier by
/// multiplying each antenna's response with the conjugate of the reference
/// antenna's response: `h'[k,a] = h[k,a] · conj(h[k,ref])`.
pub fn sanitize_phase(frame: &CsiFrame, ref_antenna: usize) -> Result<CsiFrame> {
    let (k_count, a_count) = (frame.n_subcarriers(), frame.n_antennas());
    if ref_antenna >= a_count {
        return Err(Error::Input(format!(
            "reference antenna {ref_antenna} out of range (A = {a_count})"
        )));
    }
    for k in 0..k_count {
        if frame.h[(k, ref_antenna)].norm_sqr() < 1e-30 {
            return Err(Error::DegenerateReference { subcarrier: k });
        }
    }
    let mut h = Array2::zeros((k_count, a_count));
    for k in 0..k_count {
        let r = frame.h[(k, ref_antenna)].conj();
        for a in 0..a_count {
            h[(k, a)] = frame.h[(k, a)] * r;
        }
    }
    Ok(CsiFrame {
        h,
        timestamp_s: frame.timestamp_s,
        link_id: frame.link_id,
    })
}

/// Subtracts the centered moving average (window `window_s` seconds) from
/// every entry, leaving only the time-varying component. A time-constant
/// stream maps to (near-)zero frames.
pub fn remove_static(stream: &CsiStream, window_s: f64) -> Result<CsiStream> {
    if stream.is_empty() {
        return Err(Error::Input("cannot remove static from an empty stream".into()));
    }
    let w = (window_s * stream.config.sample_rate_hz).round() as i64;
    if w < 2 {
        return Err(Error::Config(format!(
            "static-removal window of {w} sample(s) is shorter than 2"
        )));
    }
    let n = stream.frames.len();
    let (k_count, a_count) = (
        stream.config.n_subcarriers,
        stream.config.n_rx_antennas,
    );
    // Prefix sums over time for each (k, a) entry, so each windowed mean is O(1).
    let entries = k_count * a_count;
    let mut prefix = vec![Complex64::default(); (n + 1) * entries];
    for (t, f) in stream.frames.iter().enumerate() {
        for (e, z) in f.h.iter().enumerate() {
            prefix[(t + 1) * entries + e] = prefix[t * entries + e] + z;
        }
    }
    let half_lo = (w - 1) / 2;
    let half_hi = w / 2;
    let mut frames = Vec::with_capacity(n);
    for (t, f) in stream.frames.iter().enumerate() {
        let lo = (t as i64 - half_lo).max(0) as usize;
        let hi = ((t as i64 + half_hi) as usize).min(n - 1);
        let count = (hi - lo + 1) as f64;
        let mut h = f.h.clone();
        for (e, z) in h.iter_mut().enumerate() {
            let sum = prefix[(hi + 1) * entries + e] - prefix[lo * entries + e];
            *z -= sum / count;
        }
        frames.push(CsiFrame {
            h,
            timestamp_s: f.timestamp_s,
            link_id: f.link_id,
        });
    }
    Ok(CsiStream {
        frames,
        config: stream.config,
    })
}

/// Per-subcarrier amplitude (mean antenna magnitude) and unwrapped phase
/// (circular mean over antennas, then unwrapped across the subcarrier axis).
pub fn amp_phase(frame: &CsiFrame) -> (Vec<f64>, Vec<f64>) {
    let (k_count, a_count) = (frame.n_subcarriers(), frame.n_antennas());
    let mut amplitude = Vec::with_capacity(k_count);
    let mut phase = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut amp = 0.0;
        let mut phasor = Complex64::default();
        for a in 0..a_count {
            let z = frame.h[(k, a)];
            let m = z.norm();
            amp += m;
            if m > 1e-30 {
                phasor += z / m;
            }
        }
        amplitude.push(amp / a_count as f64);
        phase.push(if phasor.norm_sqr() > 1e-30 {
            phasor.arg()
        } else {
            0.0
        });
    }
    unwrap_in_place(&mut phase);
    (amplitude, phase)
}

/// Unwraps a phase sequence so successive differences lie in (−π, π].
pub fn unwrap_in_place(phase: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for k in 1..phase.len() {
        let mut d = phase[k] - phase[k - 1];
        d -= TAU * (d / TAU).round();
        if d <= -PI {
            d += TAU;
        }
        phase[k] = phase[k - 1] + d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, k: usize, a: usize, t: f64) -> CsiFrame {
        let h = Array2::from_shape_fn((k, a), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        CsiFrame {
            h,
            timestamp_s: t,
            link_id: LinkId(0),
        }
    }

    #[test]
    fn common_phase_cancels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frame = random_frame(&mut rng, 8, 3, 0.0);
        let mut rotated = frame.clone();
        for k in 0..8 {
            let phi = Complex64::from_polar(1.0, rng.random_range(-3.0..3.0));
            for a in 0..3 {
                rotated.h[(k, a)] *= phi;
            }
        }
        let clean = sanitize_phase(&frame, 0).unwrap();
        let rot = sanitize_phase(&rotated, 0).unwrap();
        for (a, b) in clean.h.iter().zip(rot.h.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn sanitize_identity_example() {
        let h = Array2::from_shape_vec(
            (1, 2),
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        )
        .unwrap();
        let frame = CsiFrame {
            h,
            timestamp_s: 0.0,
            link_id: LinkId(0),
        };
        let out = sanitize_phase(&frame, 0).unwrap();
        assert_relative_eq!(out.h[(0, 0)].re, 1.0);
        assert_relative_eq!(out.h[(0, 0)].im, 0.0);
        assert_relative_eq!(out.h[(0, 1)].re, 0.0);
        assert_relative_eq!(out.h[(0, 1)].im, 1.0);
    }

    #[test]
    fn sanitize_reference_column_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = random_frame(&mut rng, 16, 4, 0.0);
        let out = sanitize_phase(&frame, 2).unwrap();
        for k in 0..16 {
            let z = out.h[(k, 2)];
            assert!(z.re >= 0.0);
            assert!(z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn sanitize_zero_reference_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut frame = random_frame(&mut rng, 4, 2, 0.0);
        frame.h[(2, 0)] = Complex64::default();
        match sanitize_phase(&frame, 0) {
            Err(Error::DegenerateReference { subcarrier }) => assert_eq!(subcarrier, 2),
            other => panic!("expected degenerate-reference error, got {other:?}"),
        }
    }

    fn constant_stream(c: Complex64, n: usize) -> CsiStream {
        let config = RadioConfig::desk();
        let frames = (0..n)
            .map(|t| CsiFrame {
                h: Array2::from_elem((config.n_subcarriers, config.n_rx_antennas), c),
                timestamp_s: t as f64 / config.sample_rate_hz,
                link_id: LinkId(0),
            })
            .collect();
        CsiStream { frames, config }
    }

    #[test]
    fn static_removal_zeroes_constant_stream() {
        let stream = constant_stream(Complex64::new(0.4, -1.1), 50);
        let out = remove_static(&stream, 0.2).unwrap();
        for f in &out.frames {
            for z in f.h.iter() {
                assert!(z.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn static_removal_window_too_short() {
        let stream = constant_stream(Complex64::new(1.0, 0.0), 10);
        assert!(matches!(
            remove_static(&stream, 0.001),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn static_removal_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let config = RadioConfig::desk();
        let mk = |rng: &mut ChaCha8Rng| {
            let frames = (0..80)
                .map(|t| {
                    let mut f = random_frame(
                        rng,
                        config.n_subcarriers,
                        config.n_rx_antennas,
                        t as f64 / config.sample_rate_hz,
                    );
                    f.timestamp_s = t as f64 / config.sample_rate_hz;
                    f
                })
                .collect();
            CsiStream { frames, config }
        };
        let s1 = mk(&mut rng);
        let s2 = mk(&mut rng);
        let (a, b) = (0.7, -1.3);
        let mut combined = s1.clone();
        for (f, g) in combined.frames.iter_mut().zip(&s2.frames) {
            for (x, y) in f.h.iter_mut().zip(g.h.iter()) {
                *x = *x * a + *y * b;
            }
        }
        let r1 = remove_static(&s1, 0.3).unwrap();
        let r2 = remove_static(&s2, 0.3).unwrap();
        let rc = remove_static(&combined, 0.3).unwrap();
        for ((f, g), c) in r1.frames.iter().zip(&r2.frames).zip(&rc.frames) {
            for ((x, y), z) in f.h.iter().zip(g.h.iter()).zip(c.h.iter()) {
                assert!((*x * a + *y * b - *z).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn static_removal_passes_sinusoid() {
        // 1 Hz sinusoid + constant, 100 Hz sampling, 1 s window: the moving
        // average of a whole period vanishes, so the interior residual keeps
        // the sinusoid's power.
        let config = RadioConfig::desk();
        let n = 600;
        let amp = 0.8;
        let frames: Vec<CsiFrame> = (0..n)
            .map(|t| {
                let time = t as f64 / config.sample_rate_hz;
                let v = Complex64::new(2.0 + amp * (std::f64::consts::TAU * time).sin(), 0.5);
                CsiFrame {
                    h: Array2::from_elem((config.n_subcarriers, config.n_rx_antennas), v),
                    timestamp_s: time,
                    link_id: LinkId(0),
                }
            })
            .collect();
        let stream = CsiStream { frames, config };
        let out = remove_static(&stream, 1.0).unwrap();
        // whole periods only, away from the clipped window edges
        let interior = 100..n - 100;
        let mut residual_power = 0.0;
        for t in interior.clone() {
            residual_power += out.frames[t].h[(0, 0)].norm_sqr();
        }
        residual_power /= interior.len() as f64;
        let sinusoid_power = amp * amp / 2.0;
        assert!(
            (residual_power - sinusoid_power).abs() < 0.01 * sinusoid_power,
            "residual power {residual_power} vs sinusoid power {sinusoid_power}"
        );
    }

    #[test]
    fn amp_phase_linear_phase() {
        let k_count = 100;
        let h = Array2::from_shape_fn((k_count, 3), |(k, _)| {
            Complex64::from_polar(1.0, 0.1 * k as f64)
        });
        let frame = CsiFrame {
            h,
            timestamp_s: 0.0,
            link_id: LinkId(0),
        };
        let (amp, phase) = amp_phase(&frame);
        for k in 0..k_count {
            assert_relative_eq!(amp[k], 1.0, epsilon = 1e-12);
            assert_relative_eq!(phase[k], 0.1 * k as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn amp_phase_all_ones() {
        let frame = CsiFrame {
            h: Array2::from_elem((8, 2), Complex64::new(1.0, 0.0)),
            timestamp_s: 0.0,
            link_id: LinkId(0),
        };
        let (amp, phase) = amp_phase(&frame);
        assert!(amp.iter().all(|&a| (a - 1.0).abs() < 1e-15));
        assert!(phase.iter().all(|&p| p.abs() < 1e-15));
    }

    #[test]
    fn unwrap_bounds_successive_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut phase: Vec<f64> = (0..200).map(|_| rng.random_range(-30.0..30.0)).collect();
        unwrap_in_place(&mut phase);
        for w in phase.windows(2) {
            assert!((w[1] - w[0]).abs() <= std::f64::consts::PI + 1e-12);
        }
    }
}
