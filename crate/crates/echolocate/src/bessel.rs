//! Spherical Bessel functions and the rigid-sphere mode strength b_n(ka).
//!
//! j_n is evaluated by Miller's downward recurrence (stable for all orders),
//! y_n by upward recurrence (stable), derivatives by
//! f_n'(x) = f_{n-1}(x) - (n+1)/x f_n(x).

use crate::SOUND_SPEED;
use num_complex::Complex64;
use std::f64::consts::PI;

/// j_0..j_n_max at `x >= 0`.
pub fn spherical_jn_all(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite());
    if x == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }
    // Downward recurrence from well above both n_max and x, then normalize
    // against the closed forms for j_0/j_1 (whichever is better conditioned).
    let start = n_max.max(x.ceil() as usize) + 24;
    let mut fp = 0.0f64; // f_{k+1}
    let mut fc = 1e-30f64; // f_k
    let mut out = vec![0.0; n_max + 1];
    for k in (0..=start).rev() {
        let fm = (2.0 * k as f64 + 3.0) / x * fc - fp;
        fp = fc;
        fc = fm;
        if k <= n_max {
            out[k] = fc;
        }
        if fc.abs() > 1e250 {
            let s = 1e-250;
            fc *= s;
            fp *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    // fc = unnormalized f_0; fp = unnormalized f_1 after the loop ended at k=0.
    let scale = if j0.abs() >= j1.abs() || n_max == 0 { j0 / fc } else { j1 / fp };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// y_0..y_n_max at `x > 0`.
pub fn spherical_yn_all(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0 && x.is_finite());
    let mut out = vec![0.0; n_max + 1];
    out[0] = -x.cos() / x;
    if n_max >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for n in 2..=n_max {
        out[n] = (2.0 * n as f64 - 1.0) / x * out[n - 1] - out[n - 2];
    }
    out
}

/// Derivatives f_0'..f_n_max' from the values f_0..f_{n_max}; needs at least
/// two values since f_0' = -f_1 (holds for both j and y).
fn derivatives(vals: &[f64], x: f64) -> Vec<f64> {
    assert!(vals.len() >= 2);
    let n_max = vals.len() - 1;
    let mut out = vec![0.0; n_max + 1];
    out[0] = -vals[1];
    for n in 1..=n_max {
        out[n] = vals[n - 1] - (n as f64 + 1.0) / x * vals[n];
    }
    out
}

/// Rigid-sphere mode strengths b_0..b_n_max at dimensionless frequency `ka`.
///
/// b_n = 4 pi i^n [ j_n(ka) - (j_n'(ka)/h_n'(ka)) h_n(ka) ], h_n = j_n + i y_n.
/// At ka = 0 the limit is (4 pi, 0, 0, ...).
pub fn mode_strengths(n_max: usize, ka: f64) -> Vec<Complex64> {
    assert!(ka >= 0.0 && ka.is_finite());
    if ka == 0.0 {
        let mut out = vec![Complex64::new(0.0, 0.0); n_max + 1];
        out[0] = Complex64::new(4.0 * PI, 0.0);
        return out;
    }
    let j = spherical_jn_all(n_max + 1, ka);
    let y = spherical_yn_all(n_max + 1, ka);
    let jd = derivatives(&j, ka);
    let yd = derivatives(&y, ka);
    let i_pow = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    (0..=n_max)
        .map(|n| {
            let h = Complex64::new(j[n], y[n]);
            let hd = Complex64::new(jd[n], yd[n]);
            let bracket = Complex64::new(j[n], 0.0) - h * (jd[n] / hd);
            4.0 * PI * i_pow[n % 4] * bracket
        })
        .collect()
}

/// Mode strength of order `n` at `frequency` Hz for sphere radius `radius` m,
/// using the default speed of sound.
pub fn mode_strength(n: usize, frequency: f64, radius: f64) -> Complex64 {
    mode_strength_ka(n, 2.0 * PI * frequency * radius / SOUND_SPEED)
}

/// Mode strength of order `n` at dimensionless frequency `ka`.
pub fn mode_strength_ka(n: usize, ka: f64) -> Complex64 {
    mode_strengths(n, ka)[n]
}

/// Table of mode strengths: `table[n][i]` = b_n at `freqs[i]`.
pub fn mode_strength_table(
    n_max: usize,
    freqs: &[f64],
    radius: f64,
    sound_speed: f64,
) -> Vec<Vec<Complex64>> {
    let mut table = vec![vec![Complex64::new(0.0, 0.0); freqs.len()]; n_max + 1];
    for (i, f) in freqs.iter().enumerate() {
        let ka = 2.0 * PI * f * radius / sound_speed;
        for (n, b) in mode_strengths(n_max, ka).into_iter().enumerate() {
            table[n][i] = b;
        }
    }
    table
}
