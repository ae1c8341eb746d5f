//! Matrix-pencil estimation of damped complex exponentials, mapped to path
//! delay (poles across subcarriers) and arrival angle (poles across the
//! antenna array).

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{CsiFrame, LinkId, RadioConfig};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleDomain {
    Tof,
    Aoa,
}

/// Poles and least-squares amplitudes recovered from one data vector.
#[derive(Debug, Clone)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub domain: PoleDomain,
    /// L2 norm of the reconstruction residual.
    pub residual: f64,
}

impl PoleSet {
    pub fn order(&self) -> usize {
        self.poles.len()
    }
}

/// Model-order choice for the pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelOrder {
    /// Keep singular values with σ_i/σ_0 at or above the threshold.
    Auto { threshold: f64 },
    Fixed(usize),
}

impl Default for ModelOrder {
    fn default() -> Self {
        ModelOrder::Auto { threshold: 0.05 }
    }
}

/// Counts singular values at or above `threshold` relative to the largest,
/// capped at len−1. All-zero input selects order 0.
pub fn select_order(singular_values: &[f64], threshold: f64) -> usize {
    let s0 = match singular_values.first() {
        Some(&s) => s,
        None => return 0,
    };
    if s0 <= 0.0 {
        return 0;
    }
    let count = singular_values
        .iter()
        .filter(|&&s| s / s0 >= threshold)
        .count();
    count.min(singular_values.len().saturating_sub(1).max(1)).min(
        if singular_values.len() > 1 {
            singular_values.len() - 1
        } else {
            1
        },
    )
}

/// Matrix-pencil pole extraction from `x[n] = Σ a_i z_i^n`.
///
/// Builds the (N−L)×(L+1) Hankel matrix, truncates the shifted pair to the
/// selected order via the SVD of Y0, and takes the pole matrix eigenvalues
/// in the reduced subspace. Amplitudes come from a Vandermonde least-squares
/// fit; the reconstruction residual is reported.
pub fn matrix_pencil(x: &[Complex64], l: usize, order: ModelOrder) -> Result<PoleSet> {
    matrix_pencil_in(x, l, order, PoleDomain::Tof)
}

pub fn matrix_pencil_in(
    x: &[Complex64],
    l: usize,
    order: ModelOrder,
    domain: PoleDomain,
) -> Result<PoleSet> {
    let n = x.len();
    if n < 4 {
        return Err(Error::Input(format!(
            "matrix pencil needs at least 4 samples, got {n}"
        )));
    }
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Input("matrix pencil input contains non-finite values".into()));
    }
    if l < 2 || l > n - 2 {
        return Err(Error::Input(format!(
            "pencil parameter L={l} outside [2, {}]",
            n - 2
        )));
    }
    let rows = n - l;
    let y0 = Array2::from_shape_fn((rows, l), |(i, j)| x[i + j]);
    let y1 = Array2::from_shape_fn((rows, l), |(i, j)| x[i + j + 1]);

    // Singular structure of Y0 through its Gram matrix: eigenvalues of
    // Y0^H·Y0 are squared singular values and V holds the right subspace.
    let g00 = linalg::adjoint_mul(&y0, &y0);
    let (lambda, v) = linalg::hermitian_eigen(&g00);
    let sv: Vec<f64> = lambda.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let p = match order {
        ModelOrder::Auto { threshold } => select_order(&sv, threshold),
        ModelOrder::Fixed(p) => {
            if p > sv.len().min(rows) {
                return Err(Error::OrderSelection(format!(
                    "requested order {p} exceeds pencil rank bound {}",
                    sv.len().min(rows)
                )));
            }
            if p > 0 && (sv[0] <= 0.0 || sv[p - 1] / sv[0] < 1e-10) {
                return Err(Error::OrderSelection(format!(
                    "data is rank deficient below requested order {p}"
                )));
            }
            p
        }
    };
    if p == 0 {
        return Ok(PoleSet {
            poles: vec![],
            amplitudes: vec![],
            domain,
            residual: x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        });
    }

    // W = S_p^{-2} · V_p^H (Y0^H Y1) V_p shares its spectrum with the
    // truncated pinv(Y0)·Y1 restricted to the signal subspace.
    let g01 = linalg::adjoint_mul(&y0, &y1);
    let vp = Array2::from_shape_fn((l, p), |(i, j)| v[(i, j)]);
    let proj = linalg::adjoint_mul(&vp, &linalg::mat_mul(&g01, &vp));
    let mut w = proj;
    for i in 0..p {
        let inv = 1.0 / (sv[i] * sv[i]);
        for j in 0..p {
            w[(i, j)] *= inv;
        }
    }
    let poles = linalg::eigenvalues_small(&w)?;

    // Vandermonde least squares for the amplitudes (normal equations).
    let mut vand = Array2::from_elem((n, p), Complex64::default());
    for (i, &z) in poles.iter().enumerate() {
        let mut zn = Complex64::new(1.0, 0.0);
        for r in 0..n {
            vand[(r, i)] = zn;
            zn *= z;
        }
    }
    let gram = linalg::adjoint_mul(&vand, &vand);
    let mut rhs = vec![Complex64::default(); p];
    for i in 0..p {
        for r in 0..n {
            rhs[i] += vand[(r, i)].conj() * x[r];
        }
    }
    let amplitudes = linalg::solve_hpd(&gram, &rhs)?;
    let mut residual = 0.0;
    for r in 0..n {
        let mut recon = Complex64::default();
        for i in 0..p {
            recon += vand[(r, i)] * amplitudes[i];
        }
        residual += (x[r] - recon).norm_sqr();
    }
    Ok(PoleSet {
        poles,
        amplitudes,
        domain,
        residual: residual.sqrt(),
    })
}

/// Estimator knobs shared by the delay and angle paths.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Relative singular-value threshold for automatic order selection.
    pub order_threshold: f64,
    /// Pole association window (radians) when merging per-subcarrier
    /// arrival-angle poles.
    pub assoc_angle_rad: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            order_threshold: 0.05,
            assoc_angle_rad: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofEstimate {
    pub tof_s: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaEstimate {
    pub aoa_rad: f64,
    pub power: f64,
    /// True when the pole fell outside the physical sine range and was
    /// clamped to ±90°.
    pub clamped: bool,
}

/// Path delays from the antenna-averaged subcarrier profile, mapped into
/// [0, 1/Δf) and sorted by descending power. Expects a sanitized,
/// static-removed frame.
pub fn estimate_tof(
    frame: &CsiFrame,
    radio: &RadioConfig,
    opts: &EstimatorOptions,
) -> Result<Vec<TofEstimate>> {
    let k_count = frame.n_subcarriers();
    if k_count < 8 {
        return Err(Error::Input(format!(
            "delay estimation needs K >= 8 subcarriers, got {k_count}"
        )));
    }
    let a_count = frame.n_antennas() as f64;
    let profile: Vec<Complex64> = (0..k_count)
        .map(|k| frame.h.row(k).iter().sum::<Complex64>() / a_count)
        .collect();
    let poles = matrix_pencil_in(
        &profile,
        k_count / 2,
        ModelOrder::Auto {
            threshold: opts.order_threshold,
        },
        PoleDomain::Tof,
    )?;
    let unambiguous = 1.0 / radio.subcarrier_spacing_hz;
    let mut out: Vec<TofEstimate> = poles
        .poles
        .iter()
        .zip(&poles.amplitudes)
        .map(|(z, a)| {
            let mut tof = -z.arg() / (std::f64::consts::TAU * radio.subcarrier_spacing_hz);
            if tof < 0.0 {
                tof += unambiguous;
            }
            TofEstimate {
                tof_s: tof,
                power: a.norm_sqr(),
            }
        })
        .collect();
    out.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Arrival angles from per-subcarrier pencils across the antenna axis,
/// merged by phasor averaging, sorted by descending power.
///
/// Arrays with fewer than 4 elements fall back to the adjacent-element
/// correlation (a single pole); fewer than 2 elements is an error.
pub fn estimate_aoa(
    frame: &CsiFrame,
    radio: &RadioConfig,
    opts: &EstimatorOptions,
) -> Result<Vec<AoaEstimate>> {
    let a_count = frame.n_antennas();
    if a_count < 2 {
        return Err(Error::Input(format!(
            "angle estimation needs at least 2 antennas, got {a_count}"
        )));
    }
    let k_count = frame.n_subcarriers();
    let spatial = std::f64::consts::TAU * radio.antenna_spacing_m / radio.carrier_wavelength_m;

    if a_count < 4 {
        // adjacent-element correlation: single dominant pole
        let mut acc = Complex64::default();
        let mut power = 0.0;
        for k in 0..k_count {
            for a in 0..a_count - 1 {
                acc += frame.h[(k, a + 1)] * frame.h[(k, a)].conj();
                power += frame.h[(k, a)].norm_sqr();
            }
        }
        if acc.norm_sqr() < 1e-30 {
            return Ok(vec![]);
        }
        power /= (k_count * (a_count - 1)) as f64;
        return Ok(vec![sine_to_estimate(acc.arg() / spatial, power)]);
    }

    // Clusters of unit pole phasors accumulated across subcarriers.
    let mut clusters: Vec<(Complex64, f64)> = Vec::new();
    for k in 0..k_count {
        let row: Vec<Complex64> = frame.h.row(k).iter().copied().collect();
        let set = matrix_pencil_in(
            &row,
            a_count / 2,
            ModelOrder::Auto {
                threshold: opts.order_threshold,
            },
            PoleDomain::Aoa,
        )?;
        for (z, a) in set.poles.iter().zip(&set.amplitudes) {
            let m = z.norm();
            if m < 1e-12 {
                continue;
            }
            let dir = z / m;
            let weight = a.norm_sqr();
            let mut merged = false;
            for (sum, pw) in clusters.iter_mut() {
                let mean_dir = *sum / sum.norm().max(1e-30);
                if (dir * mean_dir.conj()).arg().abs() < opts.assoc_angle_rad {
                    *sum += dir * weight;
                    *pw += weight;
                    merged = true;
                    break;
                }
            }
            if !merged {
                clusters.push((dir * weight, weight));
            }
        }
    }
    let mut out: Vec<AoaEstimate> = clusters
        .iter()
        .filter(|(sum, pw)| *pw > 0.0 && sum.norm_sqr() > 0.0)
        .map(|(sum, pw)| sine_to_estimate(sum.arg() / spatial, *pw))
        .collect();
    out.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

fn sine_to_estimate(sine: f64, power: f64) -> AoaEstimate {
    let clamped = !(-1.0..=1.0).contains(&sine);
    AoaEstimate {
        aoa_rad: sine.clamp(-1.0, 1.0).asin(),
        power,
        clamped,
    }
}

/// Per-link estimates at one instant: the localization constraint inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkObservation {
    pub link_id: LinkId,
    pub aoa_rad: Vec<f64>,
    pub aoa_powers: Vec<f64>,
    pub tof_s: Vec<f64>,
    pub tof_powers: Vec<f64>,
    pub timestamp_s: f64,
}

impl LinkObservation {
    pub fn validate(&self) -> Result<()> {
        if self.aoa_rad.len() != self.aoa_powers.len()
            || self.tof_s.len() != self.tof_powers.len()
        {
            return Err(Error::Input("observation list lengths differ per domain".into()));
        }
        if self.aoa_rad.iter().any(|t| t.abs() > std::f64::consts::FRAC_PI_2 + 1e-9) {
            return Err(Error::Input("arrival angle outside [-pi/2, pi/2]".into()));
        }
        if self.tof_s.iter().any(|&t| t < 0.0) {
            return Err(Error::Input("negative delay".into()));
        }
        Ok(())
    }
}

/// Runs both estimators on a frame and bundles the result.
pub fn observe(
    frame: &CsiFrame,
    radio: &RadioConfig,
    opts: &EstimatorOptions,
) -> Result<LinkObservation> {
    let tof = estimate_tof(frame, radio, opts)?;
    let aoa = estimate_aoa(frame, radio, opts)?;
    Ok(LinkObservation {
        link_id: frame.link_id,
        aoa_rad: aoa.iter().map(|e| e.aoa_rad).collect(),
        aoa_powers: aoa.iter().map(|e| e.power).collect(),
        tof_s: tof.iter().map(|e| e.tof_s).collect(),
        tof_powers: tof.iter().map(|e| e.power).collect(),
        timestamp_s: frame.timestamp_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn exp_signal(poles: &[(Complex64, Complex64)], n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                poles
                    .iter()
                    .map(|(z, a)| a * z.powu(i as u32))
                    .sum::<Complex64>()
            })
            .collect()
    }

    #[test]
    fn single_exponential_exact() {
        let z = Complex64::from_polar(1.0, 0.3);
        let x = exp_signal(&[(z, Complex64::new(1.0, 0.0))], 16);
        let set = matrix_pencil(&x, 8, ModelOrder::default()).unwrap();
        assert_eq!(set.order(), 1);
        assert!((set.poles[0] - z).norm() < 1e-9);
        assert!((set.amplitudes[0] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(set.residual < 1e-9);
    }

    #[test]
    fn zeros_give_empty_set() {
        let x = vec![Complex64::default(); 16];
        let set = matrix_pencil(&x, 8, ModelOrder::default()).unwrap();
        assert_eq!(set.order(), 0);
    }

    #[test]
    fn short_input_rejected() {
        let x = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            matrix_pencil(&x, 2, ModelOrder::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn bad_pencil_parameter_rejected() {
        let x = vec![Complex64::new(1.0, 0.0); 16];
        assert!(matrix_pencil(&x, 1, ModelOrder::default()).is_err());
        assert!(matrix_pencil(&x, 15, ModelOrder::default()).is_err());
    }

    #[test]
    fn two_poles_at_30db_within_tolerance() {
        let z1 = Complex64::from_polar(1.0, 0.4);
        let z2 = Complex64::from_polar(1.0, 0.9);
        let n = 16;
        let snr = 10f64.powf(30.0 / 10.0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut err1 = 0.0;
        let mut err2 = 0.0;
        let trials = 100;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let clean = exp_signal(
                &[
                    (z1, Complex64::new(1.0, 0.0)),
                    (z2, Complex64::new(0.8, 0.3)),
                ],
                n,
            );
            let sig_power = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            let sigma = (sig_power / snr / 2.0).sqrt();
            let x: Vec<Complex64> = clean
                .iter()
                .map(|z| {
                    z + Complex64::new(
                        sigma * normal.sample(&mut rng),
                        sigma * normal.sample(&mut rng),
                    )
                })
                .collect();
            let set = matrix_pencil(&x, 8, ModelOrder::Fixed(2)).unwrap();
            let mut angles: Vec<f64> = set.poles.iter().map(|z| z.arg()).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            err1 += (angles[0] - 0.4).abs();
            err2 += (angles[1] - 0.9).abs();
        }
        assert!(err1 / (trials as f64) < 0.01, "mean err1 {}", err1 / trials as f64);
        assert!(err2 / (trials as f64) < 0.01, "mean err2 {}", err2 / trials as f64);
    }

    #[test]
    fn noiseless_exactness_up_to_three_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for q in 1..=3usize {
            for _ in 0..20 {
                // well-separated unit-circle poles
                let mut angles: Vec<f64> = Vec::new();
                while angles.len() < q {
                    let cand = rng.random_range(-3.0..3.0);
                    let circ_sep = |a: f64, b: f64| {
                        let d = (a - b).rem_euclid(std::f64::consts::TAU);
                        d.min(std::f64::consts::TAU - d)
                    };
                    if angles.iter().all(|&a| circ_sep(a, cand) > 0.35) {
                        angles.push(cand);
                    }
                }
                let poles: Vec<(Complex64, Complex64)> = angles
                    .iter()
                    .map(|&a| {
                        (
                            Complex64::from_polar(1.0, a),
                            Complex64::new(
                                rng.random_range(0.3..1.0),
                                rng.random_range(-0.5..0.5),
                            ),
                        )
                    })
                    .collect();
                let x = exp_signal(&poles, 24);
                let set = matrix_pencil(&x, 12, ModelOrder::default()).unwrap();
                assert_eq!(set.order(), q, "angles {angles:?}");
                let mut est: Vec<f64> = set.poles.iter().map(|z| z.arg()).collect();
                let mut truth = angles.clone();
                est.sort_by(|a, b| a.partial_cmp(b).unwrap());
                truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
                for (e, t) in est.iter().zip(&truth) {
                    assert!((e - t).abs() < 1e-8, "pole angle {e} vs {t}");
                }
            }
        }
    }

    #[test]
    fn conjugation_conjugates_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let poles: Vec<(Complex64, Complex64)> = (0..2)
            .map(|i| {
                (
                    Complex64::from_polar(1.0, 0.35 + 0.9 * i as f64),
                    Complex64::new(rng.random_range(0.5..1.0), rng.random_range(-0.3..0.3)),
                )
            })
            .collect();
        let x = exp_signal(&poles, 20);
        let xc: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
        let a = matrix_pencil(&x, 10, ModelOrder::default()).unwrap();
        let b = matrix_pencil(&xc, 10, ModelOrder::default()).unwrap();
        let mut pa: Vec<(f64, f64)> = a.poles.iter().map(|z| (z.re, z.im)).collect();
        let mut pb: Vec<(f64, f64)> = b.poles.iter().map(|z| (z.re, -z.im)).collect();
        let key = |p: &(f64, f64)| (p.0 * 1e9) as i64;
        pa.sort_by_key(key);
        pb.sort_by_key(key);
        for (x, y) in pa.iter().zip(&pb) {
            assert_relative_eq!(x.0, y.0, epsilon = 1e-8);
            assert_relative_eq!(x.1, y.1, epsilon = 1e-8);
        }
    }

    #[test]
    fn select_order_examples() {
        assert_eq!(select_order(&[10.0, 5.0, 0.01], 0.05), 2);
        assert_eq!(select_order(&[0.0, 0.0, 0.0], 0.05), 0);
        assert_eq!(select_order(&[], 0.05), 0);
        // cap at len−1
        assert_eq!(select_order(&[10.0, 9.0], 0.05), 1);
    }

    #[test]
    fn select_order_on_hankel_of_three_exponentials() {
        let poles: Vec<(Complex64, Complex64)> = [0.2f64, 1.0, 2.2]
            .iter()
            .map(|&a| (Complex64::from_polar(1.0, a), Complex64::new(1.0, 0.2)))
            .collect();
        let x = exp_signal(&poles, 20);
        let rows = 10;
        let y0 = Array2::from_shape_fn((rows, 10), |(i, j)| x[i + j]);
        let g = crate::linalg::adjoint_mul(&y0, &y0);
        let (lambda, _) = crate::linalg::hermitian_eigen(&g);
        let sv: Vec<f64> = lambda.iter().map(|&l| l.max(0.0).sqrt()).collect();
        assert_eq!(select_order(&sv, 0.05), 3);
    }

    fn frame_from_pole(k_count: usize, a_count: usize, pole: Complex64) -> CsiFrame {
        // identical antenna progression on every subcarrier
        let h = Array2::from_shape_fn((k_count, a_count), |(_, a)| pole.powu(a as u32));
        CsiFrame {
            h,
            timestamp_s: 0.0,
            link_id: LinkId(0),
        }
    }

    #[test]
    fn aoa_broadside_is_zero() {
        let radio = RadioConfig::desk();
        let frame = frame_from_pole(radio.n_subcarriers, radio.n_rx_antennas, Complex64::new(1.0, 0.0));
        let est = estimate_aoa(&frame, &radio, &EstimatorOptions::default()).unwrap();
        assert!(!est.is_empty());
        assert!(est[0].aoa_rad.abs() < 1e-6);
        assert!(!est[0].clamped);
    }

    #[test]
    fn aoa_clamp_flagged_for_superunity_sine() {
        let mut radio = RadioConfig::desk();
        radio.antenna_spacing_m = radio.carrier_wavelength_m / 4.0;
        // pole angle 2.0 rad → sine = 2.0/(2π·d/λ) = 4/π > 1
        let frame = frame_from_pole(
            radio.n_subcarriers,
            radio.n_rx_antennas,
            Complex64::from_polar(1.0, 2.0),
        );
        let est = estimate_aoa(&frame, &radio, &EstimatorOptions::default()).unwrap();
        assert!(est[0].clamped);
        assert_relative_eq!(est[0].aoa_rad, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn aoa_two_antenna_fallback() {
        let mut radio = RadioConfig::desk();
        radio.n_rx_antennas = 2;
        let theta: f64 = 0.4;
        let pole = Complex64::from_polar(
            1.0,
            std::f64::consts::TAU * radio.antenna_spacing_m / radio.carrier_wavelength_m
                * theta.sin(),
        );
        let frame = frame_from_pole(radio.n_subcarriers, 2, pole);
        let est = estimate_aoa(&frame, &radio, &EstimatorOptions::default()).unwrap();
        assert_relative_eq!(est[0].aoa_rad, theta, epsilon = 1e-9);
    }

    #[test]
    fn aoa_single_antenna_rejected() {
        let radio = RadioConfig::desk();
        let frame = frame_from_pole(radio.n_subcarriers, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(
            estimate_aoa(&frame, &radio, &EstimatorOptions::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn tof_requires_eight_subcarriers() {
        let radio = RadioConfig::desk();
        let frame = frame_from_pole(6, radio.n_rx_antennas, Complex64::new(1.0, 0.0));
        assert!(matches!(
            estimate_tof(&frame, &radio, &EstimatorOptions::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn tof_zero_delay_direct_path() {
        let radio = RadioConfig::desk();
        // constant across subcarriers = zero delay
        let frame = frame_from_pole(radio.n_subcarriers, radio.n_rx_antennas, Complex64::new(1.0, 0.0));
        let est = estimate_tof(&frame, &radio, &EstimatorOptions::default()).unwrap();
        assert!(!est.is_empty());
        let unambiguous = 1.0 / radio.subcarrier_spacing_hz;
        let t = est[0].tof_s.min(unambiguous - est[0].tof_s);
        assert!(t.abs() < 1e-12, "delay {t}");
    }
}
