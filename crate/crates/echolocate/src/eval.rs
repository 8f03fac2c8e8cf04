//! Metric aggregation: TDOA error statistics, distance error statistics,
//! boundary detection aggregates, and T60 bucketing.

use crate::room::BoundaryMetrics;
use serde::{Deserialize, Serialize};

/// One reflection's evaluation entry: whether its TDOA estimate validated,
/// and its absolute error against the oracle when ground truth is known.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TdoaErrorEntry {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TdoaStats {
    /// Mean/SD of |error| over valid entries with known truth, milliseconds.
    pub t_mean_ms: f64,
    /// Population standard deviation.
    pub t_sd_ms: f64,
    /// Fraction of entries that validated (and, when a gate is set, also fell
    /// within it).
    pub r_dect: f64,
    pub n_entries: usize,
    pub n_valid: usize,
    pub n_detected: usize,
}

fn mean_sd(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    (mean, var.sqrt())
}

/// With `gate_ms = None`, R_dect is the valid fraction; with a gate, an entry
/// must also have |error| within the gate (entries lacking truth never gate
/// in).
pub fn tdoa_stats(entries: &[TdoaErrorEntry], gate_ms: Option<f64>) -> TdoaStats {
    let errors: Vec<f64> = entries
        .iter()
        .filter(|e| e.valid)
        .filter_map(|e| e.error_ms.map(f64::abs))
        .collect();
    let (t_mean_ms, t_sd_ms) = mean_sd(&errors);
    let n_valid = entries.iter().filter(|e| e.valid).count();
    let n_detected = entries
        .iter()
        .filter(|e| {
            e.valid
                && match gate_ms {
                    None => true,
                    Some(g) => e.error_ms.is_some_and(|err| err.abs() <= g + 1e-12),
                }
        })
        .count();
    TdoaStats {
        t_mean_ms,
        t_sd_ms,
        r_dect: if entries.is_empty() { 0.0 } else { n_detected as f64 / entries.len() as f64 },
        n_entries: entries.len(),
        n_valid,
        n_detected,
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct DistanceStats {
    /// Mean/SD of |distance error| in meters (population SD).
    pub s_mean: f64,
    pub s_sd: f64,
    pub n: usize,
}

pub fn distance_stats(errors_m: &[f64]) -> DistanceStats {
    let abs: Vec<f64> = errors_m.iter().map(|e| e.abs()).collect();
    let (s_mean, s_sd) = mean_sd(&abs);
    DistanceStats { s_mean, s_sd, n: abs.len() }
}

/// Boundary statistics pooled over scenes.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct BoundaryAggregate {
    pub r_dect: f64,
    pub dist_mean: f64,
    pub dist_sd: f64,
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub n_detected: usize,
    pub n_truth: usize,
}

pub fn boundary_aggregate<'a, I>(metrics: I) -> BoundaryAggregate
where
    I: IntoIterator<Item = &'a BoundaryMetrics>,
{
    let mut dists = Vec::new();
    let mut thetas = Vec::new();
    let mut n_truth = 0;
    for m in metrics {
        n_truth += m.truth_count;
        for p in m.pairs.iter().filter(|p| p.detected) {
            dists.push(p.distance_diff.abs());
            thetas.push(p.normal_angle_deg);
        }
    }
    let (dist_mean, dist_sd) = mean_sd(&dists);
    let (theta_mean, theta_sd) = mean_sd(&thetas);
    BoundaryAggregate {
        r_dect: if n_truth == 0 { 0.0 } else { dists.len() as f64 / n_truth as f64 },
        dist_mean,
        dist_sd,
        theta_mean,
        theta_sd,
        n_detected: dists.len(),
        n_truth,
    }
}

/// 100 ms wide reverberation-time buckets, labeled like "0.3-0.4".
pub fn t60_bucket(t60: f64) -> String {
    let lo = (t60 * 10.0).floor() / 10.0;
    format!("{:.1}-{:.1}", lo, lo + 0.1)
}
