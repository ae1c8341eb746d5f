//! Small dense linear-algebra kernels used by the estimators: a cyclic
//! Jacobi eigensolver for complex Hermitian matrices, characteristic-
//! polynomial eigenvalues for small general complex matrices, and Cholesky
//! solves. Matrices are `ndarray::Array2` in row-major order.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A^H · B for complex matrices.
pub fn adjoint_mul(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, m) = (a.ncols(), b.ncols());
    let rows = a.nrows();
    assert_eq!(rows, b.nrows(), "adjoint_mul dimension mismatch");
    let mut out = Array2::from_elem((n, m), Complex64::default());
    for i in 0..n {
        for j in 0..m {
            let mut acc = Complex64::default();
            for r in 0..rows {
                acc += a[(r, i)].conj() * b[(r, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Eigendecomposition of a complex Hermitian matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with matching
/// eigenvector columns (unitary).
pub fn hermitian_eigen(a: &Array2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigen needs a square matrix");
    let mut m = a.clone();
    let mut q = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    });
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = 1e-15 * norm.max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for r in p + 1..n {
                off += m[(p, r)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apq = m[(p, r)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                // Unitary 2x2 rotation diagonalizing the Hermitian block
                // [[app, apq], [conj(apq), aqq]]: columns (c, -s̄; s, c)
                // with s = sin·e^{i·arg(apq)}.
                let app = m[(p, p)].re;
                let aqq = m[(r, r)].re;
                let abs_apq = apq.norm();
                let phase = apq / abs_apq;
                // zero the pivot: t² − 2τt − 1 = 0, smaller-magnitude root
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);
                // apply on the right: columns p and r of M and Q
                for i in 0..n {
                    let mp = m[(i, p)];
                    let mr = m[(i, r)];
                    m[(i, p)] = mp * c + mr * s.conj();
                    m[(i, r)] = mr * c - mp * s;
                    let qp = q[(i, p)];
                    let qr = q[(i, r)];
                    q[(i, p)] = qp * c + qr * s.conj();
                    q[(i, r)] = qr * c - qp * s;
                }
                // apply on the left (conjugate transpose): rows p and r of M
                for j in 0..n {
                    let mp = m[(p, j)];
                    let mr = m[(r, j)];
                    m[(p, j)] = mp * c + mr * s;
                    m[(r, j)] = mr * c - mp * s.conj();
                }
                // clean the hermitian pair we just zeroed
                m[(p, r)] = Complex64::default();
                m[(r, p)] = Complex64::default();
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| q[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a small general complex matrix via the characteristic
/// polynomial (Faddeev–LeVerrier) and Durand–Kerner root iteration.
/// Intended for matrices up to ~8×8 with simple, well-scaled spectra.
pub fn eigenvalues_small(a: &Array2<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigenvalues_small needs a square matrix");
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    // Faddeev–LeVerrier: coefficients of λ^n + c1 λ^{n-1} + ... + cn.
    let ident = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    });
    let mut coeffs = Vec::with_capacity(n);
    let mut mk = a.clone();
    for k in 1..=n {
        let trace: Complex64 = (0..n).map(|i| mk[(i, i)]).sum();
        let ck = -trace / k as f64;
        coeffs.push(ck);
        if k < n {
            let shifted = &mk + &(&ident * ck);
            mk = mat_mul(a, &shifted);
        }
    }
    // Durand–Kerner on p(λ) = λ^n + Σ c_k λ^{n-k}.
    let eval = |z: Complex64| -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for c in &coeffs {
            v = v * z + c;
        }
        v
    };
    let scale = a
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(
                scale * 1.2,
                0.37 + std::f64::consts::TAU * k as f64 / n as f64,
            )
        })
        .collect();
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-290 {
                denom = Complex64::new(1e-290, 0.0);
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * scale.max(1.0) {
            break;
        }
    }
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::OrderSelection(
            "eigenvalue iteration diverged".into(),
        ));
    }
    Ok(roots)
}

pub fn mat_mul(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    assert_eq!(k, b.nrows(), "mat_mul dimension mismatch");
    let mut out = Array2::from_elem((n, m), Complex64::default());
    for i in 0..n {
        for l in 0..k {
            let v = a[(i, l)];
            for j in 0..m {
                out[(i, j)] += v * b[(l, j)];
            }
        }
    }
    out
}

/// Solves the Hermitian positive-definite system A x = b by Cholesky.
/// A small ridge stabilizes near-singular systems.
pub fn solve_hpd(a: &Array2<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
    let ridge = 1e-14 * (trace / n.max(1) as f64).max(1e-300);
    let mut l = a.clone();
    for i in 0..n {
        l[(i, i)] += ridge;
    }
    // in-place lower Cholesky
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            for i in j..n {
                let v = l[(i, k)];
                l[(i, j)] = l[(i, j)] - v * ljk.conj();
            }
        }
        let d = l[(j, j)].re;
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::OrderSelection(
                "normal equations not positive definite".into(),
            ));
        }
        let root = d.sqrt();
        for i in j..n {
            l[(i, j)] /= root;
        }
    }
    // forward: L y = b
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[(i, k)] * v;
        }
        y[i] /= l[(i, i)].re;
    }
    // backward: L^H x = y
    for i in (0..n).rev() {
        for k in i + 1..n {
            let v = y[k];
            y[i] -= l[(k, i)].conj() * v;
        }
        y[i] /= l[(i, i)].re;
    }
    Ok(y)
}

/// Solves the real symmetric positive-definite system A x = b by Cholesky,
/// with a caller-supplied diagonal regularizer.
pub fn solve_spd_real(a: &[f64], n: usize, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut l = a.to_vec();
    for i in 0..n {
        l[i * n + i] += ridge;
    }
    for j in 0..n {
        for k in 0..j {
            let ljk = l[j * n + k];
            for i in j..n {
                l[i * n + j] -= l[i * n + k] * ljk;
            }
        }
        let d = l[j * n + j];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Config(
                "covariance is singular even after regularization".into(),
            ));
        }
        let root = d.sqrt();
        for i in j..n {
            l[i * n + j] /= root;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
        // Gram-Schmidt on a random complex matrix
        let mut cols: Vec<Vec<Complex64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in 0..i {
                let proj: Complex64 = (0..n).map(|r| cols[j][r].conj() * cols[i][r]).sum();
                for r in 0..n {
                    let v = cols[j][r];
                    cols[i][r] -= proj * v;
                }
            }
            let norm: f64 = cols[i].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for r in 0..n {
                cols[i][r] /= norm;
            }
        }
        Array2::from_shape_fn((n, n), |(r, c)| cols[c][r])
    }

    #[test]
    fn hermitian_eigen_recovers_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3, 6, 12] {
            let q = random_unitary(n, &mut rng);
            let lambda: Vec<f64> = (0..n).map(|i| (n - i) as f64 * 1.7 - 2.0).collect();
            let mut a = Array2::from_elem((n, n), Complex64::default());
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        a[(i, j)] += q[(i, k)] * lambda[k] * q[(j, k)].conj();
                    }
                }
            }
            let (vals, vecs) = hermitian_eigen(&a);
            for (got, want) in vals.iter().zip(&lambda) {
                assert!((got - want).abs() < 1e-10, "n={n}: {got} vs {want}");
            }
            // residual ||A v - λ v||
            for j in 0..n {
                for i in 0..n {
                    let av: Complex64 = (0..n).map(|k| a[(i, k)] * vecs[(k, j)]).sum();
                    assert!((av - vecs[(i, j)] * vals[j]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn hermitian_eigen_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let a = Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj());
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let (vals, _) = hermitian_eigen(&a);
        assert!((vals[0] - norm2).abs() < 1e-12 * norm2);
        for &l in &vals[1..] {
            assert!(l.abs() < 1e-12 * norm2, "trailing eigenvalue {l}");
        }
    }

    #[test]
    fn eigenvalues_small_unit_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1usize, 2, 3, 5] {
            let q = random_unitary(n, &mut rng);
            let mut truth: Vec<Complex64> = Vec::new();
            while truth.len() < n {
                let cand = Complex64::from_polar(1.0, rng.random_range(-3.1..3.1));
                if truth.iter().all(|z| (z - cand).norm() > 0.3) {
                    truth.push(cand);
                }
            }
            // normal matrix Q D Q^H has exactly those eigenvalues
            let mut a = Array2::from_elem((n, n), Complex64::default());
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        a[(i, j)] += q[(i, k)] * truth[k] * q[(j, k)].conj();
                    }
                }
            }
            let mut est = eigenvalues_small(&a).unwrap();
            let mut want = truth.clone();
            est.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
            want.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
            for (e, w) in est.iter().zip(&want) {
                assert!((e - w).norm() < 1e-10, "n={n}: {e} vs {w}");
            }
        }
    }

    #[test]
    fn eigenvalues_small_triangular() {
        let a = Array2::from_shape_vec(
            (3, 3),
            vec![
                Complex64::new(2.0, 1.0),
                Complex64::new(5.0, -2.0),
                Complex64::new(0.3, 0.0),
                Complex64::default(),
                Complex64::new(-1.0, 0.5),
                Complex64::new(1.0, 1.0),
                Complex64::default(),
                Complex64::default(),
                Complex64::new(0.5, -3.0),
            ],
        )
        .unwrap();
        let mut est = eigenvalues_small(&a).unwrap();
        est.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        let mut want = [
            Complex64::new(2.0, 1.0),
            Complex64::new(-1.0, 0.5),
            Complex64::new(0.5, -3.0),
        ];
        want.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        for (e, w) in est.iter().zip(&want) {
            assert!((e - w).norm() < 1e-9, "{e} vs {w}");
        }
    }

    #[test]
    fn hpd_solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 5;
        let b = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut a = adjoint_mul(&b, &b);
        for i in 0..n {
            a[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut rhs = vec![Complex64::default(); n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += a[(i, j)] * x[j];
            }
        }
        let sol = solve_hpd(&a, &rhs).unwrap();
        for (s, t) in sol.iter().zip(&x) {
            assert!((s - t).norm() < 1e-10);
        }
    }

    #[test]
    fn spd_real_solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let mut b = vec![0.0; n * n];
        for v in b.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[i * n + j] += b[i * n + k] * b[j * n + k];
                }
            }
            a[i * n + i] += 1.0;
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += a[i * n + j] * x[j];
            }
        }
        let sol = solve_spd_real(&a, n, &rhs, 0.0).unwrap();
        for (s, t) in sol.iter().zip(&x) {
            assert!((s - t).abs() < 1e-9);
        }
    }
}
