//! Eigen-beam (HOA) encoding: spherical-harmonic projection of the capsule
//! spectra followed by regularized radial equalization.
//!
//! Per frame and bin, coefficients = diag(g_n) . pinv(Y_grid) . mic_spectra
//! with g_n = conj(b_n) / (|b_n|^2 + lambda). The Tikhonov constant caps the
//! worst-case white-noise amplification of the equalizer at 20 dB, which is
//! what makes low frequencies unusable for high orders (and is reported per
//! order/bin as `support`).

use crate::array::ArraySpec;
use crate::bessel;
use crate::linalg;
use crate::sh;
use crate::simulator::MultichannelSignal;
use crate::stft::{Spectrogram, Stft, StftConfig};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

/// Worst tolerated capsule-grid condition number.
pub const MAX_GRID_CONDITION: f64 = 1e6;

/// Equalizer regularization giving max white-noise gain of 20 dB for a
/// 32-capsule grid: (4 pi / Q) / (4 * 10^2).
pub fn default_lambda(n_capsules: usize) -> f64 {
    4.0 * PI / (n_capsules as f64 * 400.0)
}

/// Time/frequency eigen-beam coefficients plus the equalized broadband
/// time-domain view used by the beamforming stages.
#[derive(Clone, Debug)]
pub struct HoaFrames {
    pub order: usize,
    pub frames: usize,
    pub bins: usize,
    pub fft_len: usize,
    pub hop: usize,
    /// Activity-frame length in samples (block granularity of later stages).
    pub frame_len: usize,
    pub n_samples: usize,
    pub sample_rate: f64,
    /// Frame-major tensor: frames x bins x (order+1)^2.
    pub coeffs: Vec<Complex64>,
    /// Equalized time-domain EB signals, (order+1)^2 x n_samples.
    pub eb_time: Vec<Vec<f64>>,
}

const HOA_MAGIC: &[u8; 4] = b"EHOA";
const HOA_VERSION: u32 = 1;
/// Load guard: coefficient count above this is rejected as corrupt.
const MAX_COEFFS: usize = 1 << 28;

impl HoaFrames {
    pub fn dim(&self) -> usize {
        sh::coeff_count(self.order)
    }

    /// Coefficient vector for one (frame, bin) cell.
    pub fn cell(&self, frame: usize, bin: usize) -> &[Complex64] {
        let d = self.dim();
        let at = (frame * self.bins + bin) * d;
        &self.coeffs[at..at + d]
    }

    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.fft_len as f64
    }

    /// Sample index at the center of an STFT frame's window.
    pub fn frame_center(&self, frame: usize) -> i64 {
        let pad = (self.fft_len - self.hop) as i64;
        frame as i64 * self.hop as i64 - pad + self.fft_len as i64 / 2
    }

    /// Activity-frame index an STFT frame falls into.
    pub fn activity_index(&self, frame: usize) -> usize {
        let c = self.frame_center(frame).max(0) as usize;
        c / self.frame_len
    }

    pub fn n_activity_frames(&self) -> usize {
        self.n_samples.div_ceil(self.frame_len).max(1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(52 + self.coeffs.len() * 8);
        out.extend_from_slice(HOA_MAGIC);
        out.extend_from_slice(&HOA_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.order as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames as u64).to_le_bytes());
        out.extend_from_slice(&(self.bins as u32).to_le_bytes());
        out.extend_from_slice(&(self.fft_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.hop as u32).to_le_bytes());
        out.extend_from_slice(&(self.frame_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_samples as u64).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&(c.re as f32).to_le_bytes());
            out.extend_from_slice(&(c.im as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::HoaFormat(m.to_string());
        if data.len() < 52 {
            return Err(bad("truncated header"));
        }
        if &data[0..4] != HOA_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(data[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(data[at..at + 8].try_into().unwrap());
        if u32_at(4) != HOA_VERSION {
            return Err(bad("unsupported version"));
        }
        let order = u32_at(8) as usize;
        let frames = u64_at(12) as usize;
        let bins = u32_at(20) as usize;
        let fft_len = u32_at(24) as usize;
        let hop = u32_at(28) as usize;
        let frame_len = u32_at(32) as usize;
        let n_samples = u64_at(36) as usize;
        let sample_rate = f64::from_le_bytes(data[44..52].try_into().unwrap());
        if order > 16 {
            return Err(bad("order out of range"));
        }
        if !(32..=1 << 20).contains(&fft_len) || !fft_len.is_power_of_two() {
            return Err(bad("fft_len out of range"));
        }
        if hop == 0 || hop > fft_len {
            return Err(bad("hop out of range"));
        }
        if bins != fft_len / 2 + 1 {
            return Err(bad("bins inconsistent with fft_len"));
        }
        if frame_len == 0 || frame_len > 1 << 30 {
            return Err(bad("frame_len out of range"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0 && sample_rate <= 1e9) {
            return Err(bad("sample_rate out of range"));
        }
        let dim = sh::coeff_count(order);
        let n_coeffs = frames
            .checked_mul(bins)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| bad("size overflow"))?;
        if n_coeffs > MAX_COEFFS {
            return Err(bad("coefficient tensor too large"));
        }
        let expect = 52usize
            .checked_add(n_coeffs.checked_mul(8).ok_or_else(|| bad("size overflow"))?)
            .ok_or_else(|| bad("size overflow"))?;
        if data.len() != expect {
            return Err(bad("payload length mismatch"));
        }
        let stft = Stft::new(StftConfig { fft_len, hop });
        if stft.n_frames(n_samples) != frames {
            return Err(bad("frame count inconsistent with n_samples"));
        }
        let mut coeffs = Vec::with_capacity(n_coeffs);
        for i in 0..n_coeffs {
            let at = 52 + 8 * i;
            let re = f32::from_le_bytes(data[at..at + 4].try_into().unwrap()) as f64;
            let im = f32::from_le_bytes(data[at + 4..at + 8].try_into().unwrap()) as f64;
            if !(re.is_finite() && im.is_finite()) {
                return Err(bad("non-finite coefficient"));
            }
            coeffs.push(Complex64::new(re, im));
        }
        let mut hoa = HoaFrames {
            order,
            frames,
            bins,
            fft_len,
            hop,
            frame_len,
            n_samples,
            sample_rate,
            coeffs,
            eb_time: Vec::new(),
        };
        hoa.rebuild_eb_time(&stft);
        Ok(hoa)
    }

    fn rebuild_eb_time(&mut self, stft: &Stft) {
        let dim = self.dim();
        self.eb_time = (0..dim)
            .into_par_iter()
            .map(|nm| {
                let mut sg = Spectrogram::zeros(self.frames, self.bins, self.fft_len, self.hop);
                for t in 0..self.frames {
                    let row = sg.frame_mut(t);
                    for k in 0..self.bins {
                        row[k] = self.coeffs[(t * self.bins + k) * dim + nm];
                    }
                }
                stft.synthesize(&sg, self.n_samples)
            })
            .collect();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }
}

/// Precomputed encoding operator for one array geometry and STFT layout.
pub struct Encoder {
    order: usize,
    n_capsules: usize,
    stft: Stft,
    /// Row-major (order+1)^2 x n_capsules pseudo-inverse of the SH grid matrix.
    pinv: Vec<f64>,
    cond: f64,
    lambda: f64,
    /// Equalizers g_n per order and bin.
    eq: Vec<Vec<Complex64>>,
    /// |b_n|^2 / (|b_n|^2 + lambda): fraction of the mode the equalizer recovers.
    support: Vec<Vec<f64>>,
}

impl Encoder {
    pub fn new(array: &ArraySpec, cfg: StftConfig) -> Result<Self> {
        Self::with_lambda(array, cfg, default_lambda(array.n_capsules()))
    }

    pub fn with_lambda(array: &ArraySpec, cfg: StftConfig, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        let order = array.sh_order;
        let dim = sh::coeff_count(order);
        let q = array.n_capsules();
        let mut y_grid = Vec::with_capacity(q * dim);
        for d in &array.capsule_dirs {
            y_grid.extend_from_slice(&sh::sh_basis(order, *d));
        }
        let (pinv, cond) = linalg::pinv_tall(q, dim, &y_grid);
        if !(cond <= MAX_GRID_CONDITION) {
            return Err(Error::IllConditioned { cond });
        }
        let stft = Stft::new(cfg);
        let freqs = stft.bin_freqs(array.sample_rate);
        let table = bessel::mode_strength_table(order, &freqs, array.radius, crate::SOUND_SPEED);
        let mut eq = Vec::with_capacity(order + 1);
        let mut support = Vec::with_capacity(order + 1);
        for bn in &table {
            let mut g = Vec::with_capacity(bn.len());
            let mut s = Vec::with_capacity(bn.len());
            for b in bn {
                let denom = b.norm_sqr() + lambda;
                g.push(b.conj() / denom);
                s.push(b.norm_sqr() / denom);
            }
            eq.push(g);
            support.push(s);
        }
        Ok(Encoder { order, n_capsules: q, stft, pinv, cond, lambda, eq, support })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_condition(&self) -> f64 {
        self.cond
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    /// Equalization support for order `n` at `bin`, in [0, 1).
    pub fn support(&self, n: usize, bin: usize) -> f64 {
        self.support[n][bin]
    }

    /// True when every order up to N is recovered at `bin` with at least
    /// `min_support`.
    pub fn bin_fully_supported(&self, bin: usize, min_support: f64) -> bool {
        (0..=self.order).all(|n| self.support[n][bin] >= min_support)
    }

    pub fn encode(&self, sig: &MultichannelSignal, frame_len: usize) -> Result<HoaFrames> {
        if sig.channels.len() != self.n_capsules {
            return Err(Error::InvalidArgument(format!(
                "expected {} channels, got {}",
                self.n_capsules,
                sig.channels.len()
            )));
        }
        if frame_len == 0 {
            return Err(Error::InvalidArgument("frame_len must be positive".into()));
        }
        let n_samples = sig.len();
        if n_samples == 0 {
            return Err(Error::InvalidArgument("empty signal".into()));
        }
        let specs: Vec<Spectrogram> =
            sig.channels.par_iter().map(|ch| self.stft.analyze(ch)).collect();
        let frames = specs[0].frames;
        let bins = specs[0].bins;
        let dim = sh::coeff_count(self.order);
        let q = self.n_capsules;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); frames * bins * dim];
        coeffs.par_chunks_mut(bins * dim).enumerate().for_each(|(t, row)| {
            let mut p = vec![Complex64::new(0.0, 0.0); q];
            for k in 0..bins {
                for (slot, spec) in p.iter_mut().zip(&specs) {
                    *slot = spec.frame(t)[k];
                }
                let cell = &mut row[k * dim..(k + 1) * dim];
                let mut nm = 0;
                for (n, g) in self.eq.iter().enumerate() {
                    let gk = g[k];
                    for slot in cell.iter_mut().skip(nm).take(2 * n + 1) {
                        let prow = &self.pinv[nm * q..(nm + 1) * q];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (w, pk) in prow.iter().zip(&p) {
                            acc += pk * *w;
                        }
                        *slot = gk * acc;
                        nm += 1;
                    }
                }
            }
        });
        let mut hoa = HoaFrames {
            order: self.order,
            frames,
            bins,
            fft_len: self.stft.config().fft_len,
            hop: self.stft.config().hop,
            frame_len,
            n_samples,
            sample_rate: sig.sample_rate,
            coeffs,
            eb_time: Vec::new(),
        };
        hoa.rebuild_eb_time(&self.stft);
        Ok(hoa)
    }
}
