//! Square-root-Hann WOLA short-time Fourier transform.
//!
//! Analysis and synthesis both use the periodic sqrt-Hann window w[i] =
//! sin(pi i / N); at 50% overlap the windows satisfy w^2[i] + w^2[i + N/2] = 1
//! exactly, so istft(stft(x)) reconstructs x up to rounding. The signal is
//! padded by half a window on both sides so edge samples are covered by two
//! frames like every other sample.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
pub struct StftConfig {
    pub fft_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { fft_len: 1024, hop: 512 }
    }
}

/// One-sided time-frequency tile grid, frame-major.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub fft_len: usize,
    pub hop: usize,
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn zeros(frames: usize, bins: usize, fft_len: usize, hop: usize) -> Spectrogram {
        Spectrogram { frames, bins, fft_len, hop, data: vec![Complex64::ZERO; frames * bins] }
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    /// Sample index of the center of frame `t` in the original signal
    /// (accounts for the leading half-window padding; may be negative for t=0).
    pub fn frame_center(&self, t: usize) -> i64 {
        let pad = (self.fft_len - self.hop) as i64;
        t as i64 * self.hop as i64 - pad + self.fft_len as i64 / 2
    }
}

pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Self {
        assert!(cfg.fft_len >= 2 && cfg.fft_len % 2 == 0);
        assert!(cfg.hop > 0 && cfg.hop <= cfg.fft_len);
        let n = cfg.fft_len;
        let window = (0..n)
            .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let mut planner = FftPlanner::new();
        Stft {
            cfg,
            window,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn bins(&self) -> usize {
        self.cfg.fft_len / 2 + 1
    }

    /// Center frequencies of the one-sided bins in Hz.
    pub fn bin_freqs(&self, sample_rate: f64) -> Vec<f64> {
        (0..self.bins())
            .map(|k| k as f64 * sample_rate / self.cfg.fft_len as f64)
            .collect()
    }

    /// Leading padding applied before the first frame.
    pub fn pad(&self) -> usize {
        self.cfg.fft_len - self.cfg.hop
    }

    pub fn n_frames(&self, len: usize) -> usize {
        // Enough frames that every padded sample up to pad + len is covered by
        // a full complement of windows.
        (len + self.pad()) / self.cfg.hop + 1
    }

    /// Start of frame `t` in original-signal sample coordinates (may be < 0).
    pub fn frame_start(&self, t: usize) -> i64 {
        t as i64 * self.cfg.hop as i64 - self.pad() as i64
    }

    pub fn analyze(&self, x: &[f64]) -> Spectrogram {
        let n = self.cfg.fft_len;
        let bins = self.bins();
        let frames = self.n_frames(x.len());
        let mut data = vec![Complex64::new(0.0, 0.0); frames * bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            let start = self.frame_start(t);
            for i in 0..n {
                let src = start + i as i64;
                let v = if src >= 0 && (src as usize) < x.len() { x[src as usize] } else { 0.0 };
                buf[i] = Complex64::new(v * self.window[i], 0.0);
            }
            self.fwd.process(&mut buf);
            data[t * bins..(t + 1) * bins].copy_from_slice(&buf[..bins]);
        }
        Spectrogram { frames, bins, fft_len: n, hop: self.cfg.hop, data }
    }

    /// Weighted overlap-add synthesis, trimmed to `out_len` samples.
    pub fn synthesize(&self, spec: &Spectrogram, out_len: usize) -> Vec<f64> {
        assert_eq!(spec.fft_len, self.cfg.fft_len);
        assert_eq!(spec.hop, self.cfg.hop);
        let n = self.cfg.fft_len;
        let bins = self.bins();
        let mut out = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..spec.frames {
            let fr = spec.frame(t);
            buf[..bins].copy_from_slice(fr);
            for k in 1..(bins - 1) {
                buf[n - k] = fr[k].conj();
            }
            self.inv.process(&mut buf);
            let start = self.frame_start(t);
            for i in 0..n {
                let dst = start + i as i64;
                if dst >= 0 && (dst as usize) < out_len {
                    out[dst as usize] += buf[i].re / n as f64 * self.window[i];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn perfect_reconstruction_random_signal() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..12345).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stft = Stft::new(StftConfig::default());
        let spec = stft.analyze(&x);
        let y = stft.synthesize(&spec, x.len());
        let err: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(rms(&err) < 1e-6 * rms(&x).max(1e-12), "rms err {}", rms(&err));
    }

    #[test]
    fn reconstruction_covers_edges() {
        let stft = Stft::new(StftConfig::default());
        let x = vec![1.0; 4000];
        let spec = stft.analyze(&x);
        let y = stft.synthesize(&spec, x.len());
        assert!((y[0] - 1.0).abs() < 1e-9, "first sample {}", y[0]);
        assert!((y[3999] - 1.0).abs() < 1e-9, "last sample {}", y[3999]);
    }

    #[test]
    fn pure_tone_concentrates_in_bin() {
        let stft = Stft::new(StftConfig::default());
        let fs = 16000.0;
        let k = 64; // bin-centered tone at 1 kHz
        let f = k as f64 * fs / 1024.0;
        let x: Vec<f64> = (0..8192)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).cos())
            .collect();
        let spec = stft.analyze(&x);
        // Interior frame: the sine window's 4-bin mainlobe holds nearly all
        // of the energy, and the global peak sits at bin k.
        let fr = spec.frame(8);
        let total: f64 = fr.iter().map(|v| v.norm_sqr()).sum();
        let main: f64 = fr[k - 2..=k + 2].iter().map(|v| v.norm_sqr()).sum();
        assert!(main > 0.98 * total, "mainlobe fraction {}", main / total);
        let argmax = (0..fr.len()).max_by(|&a, &b| fr[a].norm().total_cmp(&fr[b].norm())).unwrap();
        assert_eq!(argmax, k);
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.5 * a + b).collect();
        let stft = Stft::new(StftConfig::default());
        let (sx, sy, sz) = (stft.analyze(&x), stft.analyze(&y), stft.analyze(&z));
        for t in 0..sz.frames {
            for b in 0..sz.bins {
                let want = sx.frame(t)[b] * 2.5 + sy.frame(t)[b];
                let got = sz.frame(t)[b];
                assert!((want - got).norm() < 1e-9 * (1.0 + want.norm()));
            }
        }
    }
}
