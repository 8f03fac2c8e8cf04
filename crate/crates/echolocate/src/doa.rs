//! Direction-of-arrival estimation: broadband EB-domain covariance, MVDR
//! spatial pseudo-spectrum on a regular angular grid, and peak picking.
//!
//! Frequency smoothing (averaging the covariance over in-band bins) is valid
//! in the equalized EB domain because the steering vector of a plane wave is
//! the frequency-independent real SH vector of its direction.

use crate::encode::HoaFrames;
use crate::geometry::Direction;
use crate::linalg;
use crate::sh;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use rayon::prelude::*;

/// Broadband EB covariance averaged over active frames and in-band bins.
#[derive(Clone, Debug)]
pub struct EbCovariance {
    pub dim: usize,
    /// Row-major dim x dim Hermitian matrix.
    pub r: Vec<Complex64>,
    pub band: (f64, f64),
    pub frames_used: usize,
    pub bins_used: usize,
}

/// Averages B B^H over STFT frames whose activity frame is marked in
/// `active`, restricted to bins inside `band`. `active` may be empty to
/// accept every frame.
pub fn covariance(hoa: &HoaFrames, band: (f64, f64), active: &[bool]) -> Result<EbCovariance> {
    let dim = hoa.dim();
    let bins: Vec<usize> =
        (0..hoa.bins).filter(|&k| (band.0..=band.1).contains(&hoa.bin_freq(k))).collect();
    let frames: Vec<usize> = (0..hoa.frames)
        .filter(|&t| {
            if active.is_empty() {
                true
            } else {
                let a = hoa.activity_index(t);
                a < active.len() && active[a]
            }
        })
        .collect();
    if bins.is_empty() || frames.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut r = vec![Complex64::new(0.0, 0.0); dim * dim];
    for &t in &frames {
        for &k in &bins {
            let b = hoa.cell(t, k);
            for i in 0..dim {
                let bi = b[i];
                for j in 0..dim {
                    r[i * dim + j] += bi * b[j].conj();
                }
            }
        }
    }
    let count = (frames.len() * bins.len()) as f64;
    for v in r.iter_mut() {
        *v /= count;
    }
    // Exact Hermitian symmetry despite accumulation rounding.
    for i in 0..dim {
        for j in 0..i {
            let avg = (r[i * dim + j] + r[j * dim + i].conj()) * 0.5;
            r[i * dim + j] = avg;
            r[j * dim + i] = avg.conj();
        }
        r[i * dim + i] = Complex64::new(r[i * dim + i].re, 0.0);
    }
    Ok(EbCovariance { dim, r, band, frames_used: frames.len(), bins_used: bins.len() })
}

/// MVDR pseudo-spectrum over a regular azimuth/elevation grid. Pole rows
/// collapse to a single node each.
#[derive(Clone, Debug)]
pub struct SpatialSpectrum {
    pub step_deg: f64,
    /// Row elevations from -90 to +90 in `step_deg` increments.
    pub elevations: Vec<f64>,
    /// Linear powers per row; pole rows hold one entry, others 360/step.
    pub rows: Vec<Vec<f64>>,
}

impl SpatialSpectrum {
    pub fn azimuth_of(&self, col: usize) -> f64 {
        col as f64 * self.step_deg
    }

    pub fn direction(&self, row: usize, col: usize) -> Direction {
        let az = if self.rows[row].len() == 1 { 0.0 } else { self.azimuth_of(col) };
        Direction::new(az, self.elevations[row])
    }

    pub fn max_power(&self) -> f64 {
        self.rows.iter().flatten().fold(f64::MIN, |a, &b| a.max(b))
    }

    pub fn argmax(&self) -> Direction {
        let mut best = (0, 0);
        let mut best_p = f64::MIN;
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > best_p {
                    best_p = p;
                    best = (i, j);
                }
            }
        }
        self.direction(best.0, best.1)
    }

    /// CSV rows "azimuth_deg,elevation_deg,power_db" relative to the map max.
    pub fn to_csv(&self) -> String {
        let max = self.max_power();
        let mut out = String::from("azimuth_deg,elevation_deg,power_db\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let d = self.direction(i, j);
                let db = 10.0 * (p / max).log10();
                out.push_str(&format!("{:.1},{:.1},{:.4}\n", d.azimuth_deg, d.elevation_deg, db));
            }
        }
        out
    }
}

/// P(Omega) = 1 / (y^H (R + eps I)^{-1} y) with diagonal loading
/// eps = loading_scale * trace(R)/dim, evaluated by one Cholesky
/// factorization shared by all grid nodes.
pub fn sps_mvdr(cov: &EbCovariance, step_deg: f64, loading_scale: f64) -> Result<SpatialSpectrum> {
    let dim = cov.dim;
    if step_deg <= 0.0 || (180.0 / step_deg).fract().abs() > 1e-9 || (360.0 / step_deg) < 2.0 {
        return Err(Error::InvalidArgument("grid step must divide 180".into()));
    }
    let trace: f64 = (0..dim).map(|i| cov.r[i * dim + i].re).sum();
    if !(trace.is_finite() && trace >= 0.0) {
        return Err(Error::InvalidArgument("covariance trace not finite".into()));
    }
    let eps = loading_scale * trace / dim as f64;
    let mut loaded = cov.r.clone();
    for i in 0..dim {
        loaded[i * dim + i] += Complex64::new(eps.max(f64::MIN_POSITIVE), 0.0);
    }
    let chol = linalg::cholesky_hermitian(dim, &loaded)?;
    let order = (dim as f64).sqrt() as usize - 1;
    let n_rows = (180.0 / step_deg).round() as usize + 1;
    let n_cols = (360.0 / step_deg).round() as usize;
    let elevations: Vec<f64> = (0..n_rows).map(|i| -90.0 + i as f64 * step_deg).collect();
    let rows: Vec<Vec<f64>> = elevations
        .par_iter()
        .map(|&el| {
            let cols = if el.abs() >= 90.0 - 1e-9 { 1 } else { n_cols };
            (0..cols)
                .map(|j| {
                    let az = j as f64 * step_deg;
                    let y = sh::sh_basis(order, Direction::new(az, el));
                    let q = linalg::inv_quadratic_form(dim, &chol, &y);
                    1.0 / q
                })
                .collect()
        })
        .collect();
    Ok(SpatialSpectrum { step_deg, elevations, rows })
}

/// One detected SPS peak, level relative to the direct-path maximum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DoaPeak {
    pub direction: Direction,
    pub level_db: f64,
}

/// Direct path plus the reflection peaks above threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoaSet {
    pub direct: Direction,
    pub reflections: Vec<DoaPeak>,
}

/// 8-neighborhood local maxima (azimuth wraparound; poles treated as adjacent
/// to every node of the neighboring row), thresholded at `beta_db` below the
/// global maximum, then merged so no two kept peaks lie within `merge_deg`.
///
/// Peak levels are the dB magnitude of the pseudo-spectrum map (root power,
/// 5 log10 of the power ratio). On that scale a -3 dB gate retains the
/// direct lobe and first-order reflection lobes of a reverberant scene while
/// rejecting the diffuse background, which sits near -10 dB in power.
pub fn pick_peaks(sps: &SpatialSpectrum, beta_db: f64, merge_deg: f64) -> DoaSet {
    let n_rows = sps.rows.len();
    let mut candidates: Vec<(f64, Direction)> = Vec::new();
    let neighbor_max = |row: isize, col: usize, az: f64| -> f64 {
        if row < 0 || row as usize >= n_rows {
            return f64::MIN;
        }
        let r = &sps.rows[row as usize];
        if r.len() == 1 {
            return r[0];
        }
        // Columns of the neighboring row nearest in azimuth.
        let n = r.len();
        let jc = (az / sps.step_deg).round() as isize;
        let mut m = f64::MIN;
        for dj in -1..=1isize {
            let j = (jc + dj).rem_euclid(n as isize) as usize;
            m = m.max(r[j]);
        }
        let _ = col;
        m
    };
    for i in 0..n_rows {
        let row = &sps.rows[i];
        let n = row.len();
        for j in 0..n {
            let p = row[j];
            let az = if n == 1 { 0.0 } else { sps.azimuth_of(j) };
            let mut is_peak = true;
            if n > 1 {
                let left = row[(j + n - 1) % n];
                let right = row[(j + 1) % n];
                // Strict maxima only: plateau ties never spawn peaks.
                if left >= p || right >= p {
                    is_peak = false;
                }
            }
            if is_peak && i > 0 && neighbor_max(i as isize - 1, j, az) >= p {
                is_peak = false;
            }
            if is_peak && i + 1 < n_rows && neighbor_max(i as isize + 1, j, az) >= p {
                is_peak = false;
            }
            // A pole node is a peak only if it beats the whole adjacent row.
            if is_peak && n == 1 {
                let adj = if i == 0 { 1 } else { n_rows - 2 };
                if sps.rows[adj].iter().any(|&q| q >= p) {
                    is_peak = false;
                }
            }
            if is_peak {
                candidates.push((p, sps.direction(i, j)));
            }
        }
    }
    if candidates.is_empty() {
        // Fully flat spectrum: fall back to the global argmax so callers
        // always get a direct direction.
        let mut best = (f64::MIN, Direction::new(0.0, 0.0));
        for (i, row) in sps.rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > best.0 {
                    best = (p, sps.direction(i, j));
                }
            }
        }
        candidates.push(best);
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.azimuth_deg.total_cmp(&b.1.azimuth_deg)));
    let p_max = candidates.first().map_or(1.0, |c| c.0);
    let mut kept: Vec<(f64, Direction)> = Vec::new();
    for (p, dir) in candidates {
        let level_db = 5.0 * (p / p_max).log10();
        if level_db < beta_db {
            continue;
        }
        // Inclusive merge, tolerant of acos rounding at separations that
        // land exactly on the radius.
        if kept.iter().any(|(_, d)| d.angle_to(dir) <= merge_deg + 1e-9) {
            continue;
        }
        kept.push((p, dir));
    }
    let direct = kept[0].1;
    let reflections = kept[1..]
        .iter()
        .map(|(p, d)| DoaPeak { direction: *d, level_db: 5.0 * (p / p_max).log10() })
        .collect();
    DoaSet { direct, reflections }
}
