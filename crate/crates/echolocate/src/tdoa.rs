//! Per-direction beam extraction (maximum-WNG phase-mode beamformer) and
//! reflection delay estimation via band-limited GCC-PHAT.

use crate::encode::HoaFrames;
use crate::geometry::Direction;
use crate::sh;
use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Mono signal steered toward one direction.
#[derive(Clone, Debug)]
pub struct BeamSignal {
    pub samples: Vec<f64>,
    pub steering: Direction,
    pub sample_rate: f64,
}

/// y(t) = w^T B_eq(t) with w = (4 pi / (N+1)^2) * sh_basis(dir), which gives
/// unit gain toward a plane wave from `dir` (||Y||^2 = (N+1)^2 / 4 pi).
pub fn extract_beam(hoa: &HoaFrames, dir: Direction) -> BeamSignal {
    let y = sh::sh_basis(hoa.order, dir);
    let scale = 4.0 * PI / y.len() as f64;
    let n = hoa.n_samples;
    let mut samples = vec![0.0; n];
    for (w, ch) in y.iter().zip(&hoa.eb_time) {
        let w = w * scale;
        for (s, v) in samples.iter_mut().zip(ch) {
            *s += w * v;
        }
    }
    BeamSignal { samples, steering: dir, sample_rate: hoa.sample_rate }
}

/// Normalized cross-correlation over lags -max_lag..=max_lag; values scaled
/// so a fully coherent pair peaks at 1.
#[derive(Clone, Debug)]
pub struct CorrelationFunction {
    pub max_lag: usize,
    /// 2*max_lag + 1 values, lag 0 at index max_lag.
    pub values: Vec<f64>,
}

impl CorrelationFunction {
    pub fn value_at(&self, lag: i64) -> f64 {
        self.values[(lag + self.max_lag as i64) as usize]
    }

    /// (lag, value) of the global maximum.
    pub fn argmax(&self) -> (i64, f64) {
        let mut best = (0i64, f64::MIN);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i as i64 - self.max_lag as i64, v);
            }
        }
        best
    }

    /// CSV rows "lag_samples,value".
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag_samples,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{:.6}\n", i as i64 - self.max_lag as i64, v));
        }
        out
    }
}

/// PHAT-whitened cross-correlation restricted to `band`. Zero-magnitude
/// cross-spectrum bins are dropped. Positive lag means `xi` lags `x0`.
pub fn gcc_phat(
    x0: &[f64],
    xi: &[f64],
    sample_rate: f64,
    band: (f64, f64),
    max_lag: usize,
) -> Result<CorrelationFunction> {
    if x0.len() != xi.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    if x0.len() < 2 * max_lag {
        return Err(Error::InvalidArgument("frame shorter than 2*max_lag".into()));
    }
    if x0.iter().all(|&v| v == 0.0) || xi.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("all-zero input".into()));
    }
    let n_fft = (x0.len() + max_lag).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut s0 = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut si = vec![Complex64::new(0.0, 0.0); n_fft];
    for (slot, &v) in s0.iter_mut().zip(x0) {
        slot.re = v;
    }
    for (slot, &v) in si.iter_mut().zip(xi) {
        slot.re = v;
    }
    fft.process(&mut s0);
    fft.process(&mut si);
    let bins = n_fft / 2 + 1;
    let k_lo = (band.0 * n_fft as f64 / sample_rate).ceil().max(1.0) as usize;
    let k_hi = ((band.1 * n_fft as f64 / sample_rate).floor() as usize).min(bins.saturating_sub(2));
    if k_lo > k_hi {
        return Err(Error::EmptySelection);
    }
    let mut w = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut n_active = 0usize;
    for k in k_lo..=k_hi {
        let c = s0[k] * si[k].conj();
        let mag = c.norm();
        if mag > 1e-150 {
            w[k] = c / mag;
            w[n_fft - k] = w[k].conj();
            n_active += 1;
        }
    }
    if n_active == 0 {
        return Err(Error::EmptySelection);
    }
    // Forward transform of the whitened cross-spectrum evaluates
    // sum_k W[k] e^{-i 2 pi k lam / N}, which peaks at lam = true delay of
    // xi relative to x0. Each active bin and its mirror contribute 2 when
    // coherent, hence the bound normalizer.
    fft.process(&mut w);
    let norm = 1.0 / (2.0 * n_active as f64);
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        let idx = lag.rem_euclid(n_fft as i64) as usize;
        values.push(w[idx].re * norm);
    }
    Ok(CorrelationFunction { max_lag, values })
}

/// A reflection's delay estimate relative to the direct beam.
#[derive(Clone, Copy, Debug)]
pub struct TdoaEstimate {
    pub tau: f64,
    pub lag: i64,
    pub peak: f64,
    pub valid: bool,
}

/// Searches positive lags in (exclusion, max_delay * f_s]; the peak must
/// reach `sigma_thresh` to count as valid. tau = lag / f_s.
pub fn estimate_tdoa(
    corr: &CorrelationFunction,
    sample_rate: f64,
    sigma_thresh: f64,
    exclusion: usize,
    max_delay_s: f64,
) -> TdoaEstimate {
    let hi = ((max_delay_s * sample_rate).floor() as usize).min(corr.max_lag);
    let mut best_lag = 0i64;
    let mut best = f64::MIN;
    for lag in (exclusion + 1)..=hi {
        let v = corr.value_at(lag as i64);
        if v > best {
            best = v;
            best_lag = lag as i64;
        }
    }
    if best == f64::MIN {
        return TdoaEstimate { tau: 0.0, lag: 0, peak: 0.0, valid: false };
    }
    TdoaEstimate {
        tau: best_lag as f64 / sample_rate,
        lag: best_lag,
        peak: best,
        valid: best >= sigma_thresh,
    }
}

/// Deterministic median of the valid estimates' delays; None when all frames
/// were invalid.
pub fn aggregate_tdoa(estimates: &[TdoaEstimate]) -> Option<f64> {
    let mut taus: Vec<f64> = estimates.iter().filter(|e| e.valid).map(|e| e.tau).collect();
    if taus.is_empty() {
        return None;
    }
    taus.sort_by(f64::total_cmp);
    let n = taus.len();
    Some(if n % 2 == 1 { taus[n / 2] } else { 0.5 * (taus[n / 2 - 1] + taus[n / 2]) })
}
