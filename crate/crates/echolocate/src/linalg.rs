//! Minimal dense linear algebra for the small fixed-size systems in this
//! crate: a cyclic Jacobi eigensolver for real symmetric matrices (capsule
//! grid pseudo-inverse and conditioning) and a complex Cholesky factorization
//! (Hermitian positive-definite MVDR solves). Matrices are row-major flat
//! slices.

use crate::{Error, Result};
use num_complex::Complex64;

/// Eigendecomposition of a real symmetric n x n matrix by cyclic Jacobi.
/// Returns (eigenvalues, V) with `v[i * n + j]` = component i of eigenvector j,
/// so A = V diag(w) V^T. Eigenvalues are unsorted.
pub fn jacobi_eigh(n: usize, a_in: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a_in.len(), n * n);
    let mut a = a_in.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * fro.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = (0..n).map(|i| a[i * n + i]).collect();
    (w, v)
}

/// Moore-Penrose pseudo-inverse of a full-column-rank m x n matrix (m >= n)
/// via the normal equations, plus its 2-norm condition number.
pub fn pinv_tall(m: usize, n: usize, y: &[f64]) -> (Vec<f64>, f64) {
    assert_eq!(y.len(), m * n);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..m {
                s += y[r * n + i] * y[r * n + j];
            }
            gram[i * n + j] = s;
        }
    }
    let (w, v) = jacobi_eigh(n, &gram);
    let wmax = w.iter().cloned().fold(f64::MIN, f64::max);
    let wmin = w.iter().cloned().fold(f64::MAX, f64::min);
    let cond = if wmin <= 0.0 { f64::INFINITY } else { (wmax / wmin).sqrt() };

    // pinv = V diag(1/w) V^T Y^T, computed as (V diag(1/w) V^T) applied to Y^T.
    let mut ginv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                if w[k] > 0.0 {
                    s += v[i * n + k] * v[j * n + k] / w[k];
                }
            }
            ginv[i * n + j] = s;
        }
    }
    let mut pinv = vec![0.0; n * m];
    for i in 0..n {
        for r in 0..m {
            let mut s = 0.0;
            for j in 0..n {
                s += ginv[i * n + j] * y[r * n + j];
            }
            pinv[i * m + r] = s;
        }
    }
    (pinv, cond)
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix:
/// A = L L^H. Fails on a non-positive pivot.
pub fn cholesky_hermitian(n: usize, a: &[Complex64]) -> Result<Vec<Complex64>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut diag = a[j * n + j].re;
        for k in 0..j {
            diag -= l[j * n + k].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Singular(format!("non-positive pivot {diag:.3e} at column {j}")));
        }
        let ljj = diag.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves L z = b for lower-triangular L.
pub fn forward_substitute(n: usize, l: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Quadratic form y^H A^{-1} y for A = L L^H and a real vector y, as
/// || L^{-1} y ||^2.
pub fn inv_quadratic_form(n: usize, l: &[Complex64], y: &[f64]) -> f64 {
    let b: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_substitute(n, l, &b).iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // A = Q diag(1, 3, 7) Q^T for a hand-built rotation Q.
        let (c, s) = (0.8, 0.6);
        let q = [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
        let d = [1.0, 3.0, 7.0];
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[i * 3 + j] += q[i * 3 + k] * d[k] * q[j * 3 + k];
                }
            }
        }
        let (mut w, v) = jacobi_eigh(3, &a);
        w.sort_by(f64::total_cmp);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(w[2], 7.0, epsilon = 1e-12);
        // V orthogonal.
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| v[k * 3 + i] * v[k * 3 + j]).sum();
                assert_relative_eq!(dot, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pinv_left_inverse() {
        // Random-ish tall 6x3 matrix with full column rank.
        let m = 6;
        let n = 3;
        let y: Vec<f64> = (0..m * n)
            .map(|i| ((i * 2654435761usize) % 1000) as f64 / 500.0 - 1.0 + if i % n == i / n { 2.0 } else { 0.0 })
            .collect();
        let (pinv, cond) = pinv_tall(m, n, &y);
        assert!(cond.is_finite() && cond >= 1.0);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for r in 0..m {
                    s += pinv[i * m + r] * y[r * n + j];
                }
                assert_relative_eq!(s, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cholesky_round_trip() {
        // A = M M^H + I is Hermitian positive definite.
        let n = 4;
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = Complex64::new(
                    ((i * 7 + j * 3) % 5) as f64 - 2.0,
                    ((i * 5 + j * 11) % 7) as f64 - 3.0,
                );
            }
        }
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0);
                for k in 0..n {
                    s += m[i * n + k] * m[j * n + k].conj();
                }
                a[i * n + j] = s;
            }
        }
        let l = cholesky_hermitian(n, &a).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += l[i * n + k] * l[j * n + k].conj();
                }
                assert_relative_eq!(s.re, a[i * n + j].re, epsilon = 1e-10);
                assert_relative_eq!(s.im, a[i * n + j].im, epsilon = 1e-10);
            }
        }
        // Solve against a known vector.
        let y = [1.0, -2.0, 0.5, 3.0];
        let q = inv_quadratic_form(n, &l, &y);
        assert!(q > 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        assert!(cholesky_hermitian(2, &a).is_err());
    }
}
