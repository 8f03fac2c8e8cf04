//! Energy-based voice activity detection over fixed-length frames.

/// Marks each `frame_len` block active when its RMS reaches
/// `threshold_ratio` times the loudest block's RMS. A final partial block is
/// judged on its own RMS. All-silent input yields an all-inactive mask.
pub fn energy_vad(signal: &[f64], frame_len: usize, threshold_ratio: f64) -> Vec<bool> {
    assert!(frame_len > 0, "frame_len must be positive");
    if signal.is_empty() {
        return Vec::new();
    }
    let n_frames = signal.len().div_ceil(frame_len);
    let mut rms = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let lo = f * frame_len;
        let hi = ((f + 1) * frame_len).min(signal.len());
        let e: f64 = signal[lo..hi].iter().map(|v| v * v).sum();
        rms.push((e / (hi - lo) as f64).sqrt());
    }
    let max = rms.iter().fold(0.0f64, |a, &b| a.max(b));
    if max <= 0.0 {
        return vec![false; n_frames];
    }
    rms.iter().map(|&r| r >= threshold_ratio * max).collect()
}
