//! Image-source simulation of a source in a shoebox room, rendered to a rigid
//! spherical microphone array.
//!
//! Every propagation path is treated as a plane wave hitting the sphere from
//! the image direction, filtered by the exact rigid-sphere scattering response
//! (mode strengths), with amplitude 1/distance and a frequency-domain phase
//! ramp for its (fractional) delay. Per-channel transfer functions are
//! accumulated once in the spherical-harmonic domain and applied to the source
//! with overlap-add blocks, so cost scales with paths + channels rather than
//! their product.

use crate::array::ArraySpec;
use crate::bessel;
use crate::geometry::{direction_of, Direction, RoomScene, Vec3};
use crate::sh;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Channels x samples audio buffer.
#[derive(Clone, Debug)]
pub struct MultichannelSignal {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl MultichannelSignal {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One image-source propagation path.
#[derive(Clone, Copy, Debug)]
pub struct ImagePath {
    /// Image position in room coordinates.
    pub position: Vec3,
    /// Total reflection count.
    pub order: u32,
    /// Product of the reflection coefficients met along the path.
    pub gain: f64,
    /// Absolute propagation delay to the array center, in seconds.
    pub delay: f64,
}

/// Uniform Sabine absorption calibrated to the scene's T60, as per-face
/// amplitude reflection coefficients sqrt(1 - alpha).
pub fn absorption_from_t60(scene: &RoomScene) -> Result<[f64; 6]> {
    if scene.t60 <= 0.0 || !scene.t60.is_finite() {
        return Err(Error::Geometry("t60 must be positive".into()));
    }
    let d = scene.dims;
    let volume = d.x * d.y * d.z;
    let surface = 2.0 * (d.x * d.y + d.x * d.z + d.y * d.z);
    let alpha = 0.161 * volume / (surface * scene.t60);
    if alpha >= 1.0 {
        return Err(Error::InfeasibleT60 { alpha });
    }
    Ok([(1.0 - alpha).sqrt(); 6])
}

/// All image paths up to `max_order` reflections, direct path included,
/// sorted by delay (direct first).
pub fn image_paths(scene: &RoomScene, max_order: u32) -> Vec<ImagePath> {
    let k = max_order as i64;
    let src = scene.source_pos;
    let arr = scene.array_pos;
    let dims = [scene.dims.x, scene.dims.y, scene.dims.z];
    let s = [src.x, src.y, src.z];
    let b = scene.reflection_coeffs;
    // Per-axis reflection exponents: |m - q| against the near face (x = 0
    // style), |m| against the far face, for image coordinate
    // (1 - 2q) s + 2 m L.
    let mut paths = Vec::new();
    for qx in 0..=1i64 {
        for mx in -(k + 1)..=(k + 1) {
            let ox = (mx - qx).unsigned_abs() + mx.unsigned_abs();
            if ox as i64 > k {
                continue;
            }
            for qy in 0..=1i64 {
                for my in -(k + 1)..=(k + 1) {
                    let oy = (my - qy).unsigned_abs() + my.unsigned_abs();
                    if (ox + oy) as i64 > k {
                        continue;
                    }
                    for qz in 0..=1i64 {
                        for mz in -(k + 1)..=(k + 1) {
                            let oz = (mz - qz).unsigned_abs() + mz.unsigned_abs();
                            let order = ox + oy + oz;
                            if order as i64 > k {
                                continue;
                            }
                            let q = [qx, qy, qz];
                            let m = [mx, my, mz];
                            let mut pos = [0.0; 3];
                            for a in 0..3 {
                                pos[a] =
                                    (1 - 2 * q[a]) as f64 * s[a] + 2.0 * m[a] as f64 * dims[a];
                            }
                            let gain = b[0].powi((mx - qx).abs() as i32)
                                * b[1].powi(mx.abs() as i32)
                                * b[2].powi((my - qy).abs() as i32)
                                * b[3].powi(my.abs() as i32)
                                * b[4].powi((mz - qz).abs() as i32)
                                * b[5].powi(mz.abs() as i32);
                            let position = Vec3::new(pos[0], pos[1], pos[2]);
                            let delay = (position - arr).norm() / scene.sound_speed;
                            paths.push(ImagePath { position, order: order as u32, gain, delay });
                        }
                    }
                }
            }
        }
    }
    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.position.x.total_cmp(&b.position.x))
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.position.z.total_cmp(&b.position.z))
    });
    paths
}

/// A path reduced to what rendering needs.
#[derive(Clone, Debug)]
struct RenderPath {
    direction: Direction,
    amplitude: f64,
    delay: f64,
}

/// Renders a source in a room to all array channels. `snr_db` is sensor noise
/// relative to the mean direct-path channel power (`None` = noiseless).
/// Deterministic for fixed inputs and seed.
pub fn render_array(
    scene: &RoomScene,
    source: &[f64],
    array: &ArraySpec,
    max_order: u32,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MultichannelSignal> {
    if source.is_empty() {
        return Err(Error::InvalidArgument("empty source signal".into()));
    }
    let paths = image_paths(scene, max_order);
    let mut render_paths = Vec::with_capacity(paths.len());
    for p in &paths {
        let v = p.position - scene.array_pos;
        render_paths.push(RenderPath {
            direction: direction_of(v)?,
            amplitude: p.gain / v.norm().max(1e-6),
            delay: p.delay,
        });
    }
    // Delays are relative to the first arrival so short signals don't drag a
    // long silent preamble; the direct path is index 0 after sorting.
    debug_assert_eq!(paths[0].order, 0);
    let t0 = render_paths[0].delay;
    for p in &mut render_paths {
        p.delay -= t0;
    }
    render(source, array, scene.sound_speed, &render_paths, snr_db, seed)
}

/// Renders a far-field plane wave of unit amplitude from `dir`.
pub fn render_plane_wave(
    source: &[f64],
    dir: Direction,
    array: &ArraySpec,
    sound_speed: f64,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MultichannelSignal> {
    if source.is_empty() {
        return Err(Error::InvalidArgument("empty source signal".into()));
    }
    let paths = [RenderPath { direction: dir, amplitude: 1.0, delay: 0.0 }];
    render(source, array, sound_speed, &paths, snr_db, seed)
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

fn render(
    source: &[f64],
    array: &ArraySpec,
    sound_speed: f64,
    paths: &[RenderPath],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MultichannelSignal> {
    let fs = array.sample_rate;
    let n_ch = array.n_capsules();
    let len = source.len();

    let max_delay = paths.iter().fold(0.0f64, |a, p| a.max(p.delay));
    // Padding holds the longest delay plus the scattering/fractional-delay tail.
    let l_pad = (max_delay * fs).ceil() as usize + 512;
    let target = (len + l_pad).min(32768);
    let n_fft = next_pow2((2 * l_pad).max(target));
    let hop = n_fft - l_pad;
    let bins = n_fft / 2 + 1;
    let out_len = len + l_pad;

    // Per-bin spherical-harmonic order: enough to capture scattering at that
    // frequency; higher orders carry nothing and are skipped.
    let ka_nyq = PI * fs * array.radius / sound_speed;
    let n_render = (ka_nyq.ceil() as usize + 6).max(array.sh_order + 2);
    let dim_full = sh::coeff_count(n_render);
    let order_cap: Vec<usize> = (0..bins)
        .map(|k| {
            let ka = 2.0 * PI * (k as f64 * fs / n_fft as f64) * array.radius / sound_speed;
            ((ka.ceil() as usize) + 6).min(n_render)
        })
        .collect();
    let dim_at: Vec<usize> = order_cap.iter().map(|&n| sh::coeff_count(n)).collect();

    // Mode strengths per bin, truncated at the per-bin order.
    let mode: Vec<Vec<Complex64>> = (0..bins)
        .map(|k| {
            let ka = 2.0 * PI * (k as f64 * fs / n_fft as f64) * array.radius / sound_speed;
            bessel::mode_strengths(order_cap[k], ka)
        })
        .collect();

    let cap_sh: Vec<Vec<f64>> =
        array.capsule_dirs.iter().map(|d| sh::sh_basis(n_render, *d)).collect();

    // Accumulate the SH-domain field A[k][nm] = sum_p amp e^{-i w tau} Y(dir_p),
    // reference (direct) path first so its transfer can be snapshotted.
    let mut a = vec![Complex64::new(0.0, 0.0); bins * dim_full];
    let accumulate = |a: &mut [Complex64], p: &RenderPath| {
        let y = sh::sh_basis(n_render, p.direction);
        let step = Complex64::from_polar(1.0, -2.0 * PI * fs * p.delay / n_fft as f64);
        let mut phase = Complex64::new(p.amplitude, 0.0);
        for k in 0..bins {
            let row = &mut a[k * dim_full..k * dim_full + dim_at[k]];
            for (slot, &ynm) in row.iter_mut().zip(&y) {
                *slot += phase * ynm;
            }
            phase *= step;
            if k % 1024 == 1023 {
                phase *= p.amplitude / phase.norm();
            }
        }
    };

    let assemble = |a: &[Complex64]| -> Vec<Vec<Complex64>> {
        let mut h = vec![vec![Complex64::new(0.0, 0.0); bins]; n_ch];
        for k in 0..bins {
            let row = &a[k * dim_full..k * dim_full + dim_at[k]];
            let b = &mode[k];
            for (q, hq) in h.iter_mut().enumerate() {
                let ys = &cap_sh[q];
                let mut acc = Complex64::new(0.0, 0.0);
                let mut nm = 0;
                for (n, bn) in b.iter().enumerate() {
                    let count = 2 * n + 1;
                    let mut t = Complex64::new(0.0, 0.0);
                    for i in nm..nm + count {
                        t += row[i] * ys[i];
                    }
                    acc += bn * t;
                    nm += count;
                }
                hq[k] = acc;
            }
        }
        h
    };

    accumulate(&mut a, &paths[0]);
    let h_ref = assemble(&a);
    for p in &paths[1..] {
        accumulate(&mut a, p);
    }
    let h_all = if paths.len() > 1 { assemble(&a) } else { h_ref.clone() };
    drop(a);

    // Overlap-add synthesis.
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let mut channels = vec![vec![0.0f64; out_len]; n_ch];
    let mut e_ref = vec![0.0f64; n_ch];
    let mut spec = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut work = vec![Complex64::new(0.0, 0.0); n_fft];
    let n_blocks = len.div_ceil(hop);
    for block in 0..n_blocks {
        let start = block * hop;
        let stop = (start + hop).min(len);
        for (i, slot) in spec.iter_mut().enumerate() {
            let idx = start + i;
            *slot = if idx < stop {
                Complex64::new(source[idx], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fwd.process(&mut spec);
        for q in 0..n_ch {
            let hq = &h_all[q];
            work[0] = spec[0] * hq[0];
            work[bins - 1] = spec[bins - 1] * hq[bins - 1];
            for k in 1..bins - 1 {
                let v = spec[k] * hq[k];
                work[k] = v;
                work[n_fft - k] = v.conj();
            }
            // Direct-path energy via Parseval, for the SNR reference.
            let hr = &h_ref[q];
            let mut e = (spec[0] * hr[0]).norm_sqr() + (spec[bins - 1] * hr[bins - 1]).norm_sqr();
            for k in 1..bins - 1 {
                e += 2.0 * (spec[k] * hr[k]).norm_sqr();
            }
            e_ref[q] += e / n_fft as f64;
            inv.process(&mut work);
            let out = &mut channels[q];
            let scale = 1.0 / n_fft as f64;
            for (i, w) in work.iter().enumerate() {
                let dst = start + i;
                if dst < out_len {
                    out[dst] += w.re * scale;
                }
            }
        }
    }

    if let Some(snr) = snr_db {
        let p_ref = e_ref.iter().sum::<f64>() / (n_ch as f64 * len as f64);
        let sigma = (p_ref * 10f64.powf(-snr / 10.0)).sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for ch in channels.iter_mut() {
            for v in ch.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * n;
            }
        }
    }

    Ok(MultichannelSignal { sample_rate: fs, channels })
}

/// Unit-variance white Gaussian noise.
pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Speech-shaped noise: white noise through a gentle low-pass tilt with the
/// long-term spectrum falling off above ~500 Hz, DC removed, unit RMS.
pub fn speech_shaped_noise(len: usize, sample_rate: f64, seed: u64) -> Vec<f64> {
    let white = white_noise(len, seed);
    let a = (-2.0 * PI * 500.0 / sample_rate).exp();
    let hp = (-2.0 * PI * 80.0 / sample_rate).exp();
    let mut lp_state = 0.0;
    let mut hp_y = 0.0;
    let mut hp_x = 0.0;
    let mut out = Vec::with_capacity(len);
    for x in white {
        lp_state = a * lp_state + (1.0 - a) * x;
        let y = hp * (hp_y + lp_state - hp_x);
        hp_x = lp_state;
        hp_y = y;
        out.push(y);
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in out.iter_mut() {
            *v /= rms;
        }
    }
    out
}
