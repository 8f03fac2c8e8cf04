//! Boundary inference from localized reflections: each (DOA, TDOA) pair
//! places an image source on a shell beyond the real source; the boundary is
//! the perpendicular bisector plane between source and image. Metrics match
//! inferred planes against the ground-truth room.

use crate::geometry::{BoundaryLabel, BoundaryPlane, Direction, Vec3};
use crate::source_loc::SourceEstimate;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Image position for a reflection: (d_S0 + c T_j) along its arrival
/// direction, array-centered.
pub fn locate_image(d_s0: f64, dir: Direction, t_j: f64, c: f64) -> Vec3 {
    dir.unit_vector() * (d_s0 + c * t_j)
}

/// Perpendicular bisector plane of the source/image pair; the normal points
/// toward the source side.
pub fn boundary_from_pair(p_s: Vec3, p_img: Vec3) -> Result<BoundaryPlane> {
    let diff = p_s - p_img;
    if diff.norm() < 1e-12 {
        return Err(Error::Geometry("source and image coincide".into()));
    }
    BoundaryPlane::new((p_s + p_img) * 0.5, diff, BoundaryLabel::Unknown)
}

/// Signed distance-to-origin difference (truth minus estimate) and the angle
/// between plane normals in degrees.
pub fn plane_metrics(est: &BoundaryPlane, truth: &BoundaryPlane) -> (f64, f64) {
    let distance_diff = truth.distance_to_origin() - est.distance_to_origin();
    let dot = truth.normal.dot(est.normal).clamp(-1.0, 1.0);
    (distance_diff, dot.acos().to_degrees())
}

/// Detection gates: a matched plane counts only within both limits.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MatchGates {
    pub theta_deg: f64,
    pub dist_m: f64,
}

impl Default for MatchGates {
    fn default() -> Self {
        MatchGates { theta_deg: 15.0, dist_m: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth_index: usize,
    pub est_index: usize,
    pub distance_diff: f64,
    pub normal_angle_deg: f64,
    pub detected: bool,
}

/// Per-room matching result with summary statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryMetrics {
    pub pairs: Vec<MatchedPair>,
    pub truth_count: usize,
    pub detected_count: usize,
    pub r_dect: f64,
    /// Means/SDs over detected pairs only (population SD); zero when none.
    pub dist_mean: f64,
    pub dist_sd: f64,
    pub theta_mean: f64,
    pub theta_sd: f64,
}

/// Greedy one-to-one assignment by ascending normal angle, then gate checks.
pub fn match_boundaries(
    est: &[BoundaryPlane],
    truth: &[BoundaryPlane],
    gates: MatchGates,
) -> BoundaryMetrics {
    assert!(!truth.is_empty(), "truth boundary list must be nonempty");
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (ei, e) in est.iter().enumerate() {
            let (_, theta) = plane_metrics(e, t);
            cands.push((theta, ti, ei));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut est_used = vec![false; est.len()];
    let mut pairs = Vec::new();
    for (theta, ti, ei) in cands {
        if truth_used[ti] || est_used[ei] {
            continue;
        }
        truth_used[ti] = true;
        est_used[ei] = true;
        let (dd, _) = plane_metrics(&est[ei], &truth[ti]);
        let detected = theta <= gates.theta_deg && dd.abs() <= gates.dist_m;
        pairs.push(MatchedPair {
            truth_index: ti,
            est_index: ei,
            distance_diff: dd,
            normal_angle_deg: theta,
            detected,
        });
    }
    pairs.sort_by_key(|p| p.truth_index);
    let detected: Vec<&MatchedPair> = pairs.iter().filter(|p| p.detected).collect();
    let n = detected.len();
    let stat = |vals: Vec<f64>| -> (f64, f64) {
        if vals.is_empty() {
            return (0.0, 0.0);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        (mean, var.sqrt())
    };
    let (dist_mean, dist_sd) = stat(detected.iter().map(|p| p.distance_diff.abs()).collect());
    let (theta_mean, theta_sd) = stat(detected.iter().map(|p| p.normal_angle_deg).collect());
    BoundaryMetrics {
        pairs,
        truth_count: truth.len(),
        detected_count: n,
        r_dect: n as f64 / truth.len() as f64,
        dist_mean,
        dist_sd,
        theta_mean,
        theta_sd,
    }
}

/// Boundary label guess from the dominant axis of a normal that points
/// toward the source side, matching the room convention of inward normals.
pub fn label_from_normal(n: Vec3) -> BoundaryLabel {
    let ax = n.x.abs();
    let ay = n.y.abs();
    let az = n.z.abs();
    if az >= ax && az >= ay {
        if n.z >= 0.0 {
            BoundaryLabel::Floor
        } else {
            BoundaryLabel::Ceiling
        }
    } else if ax >= ay {
        if n.x >= 0.0 {
            BoundaryLabel::WallXNeg
        } else {
            BoundaryLabel::WallXPos
        }
    } else if n.y >= 0.0 {
        BoundaryLabel::WallYNeg
    } else {
        BoundaryLabel::WallYPos
    }
}

/// Full geometric reconstruction for one scene, array-centered.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InferredRoom {
    pub source: SourceEstimate,
    /// Image position and the reflection index it came from.
    pub images: Vec<(Vec3, usize)>,
    pub boundaries: Vec<BoundaryPlane>,
}

/// Builds images and boundary planes from all usable reflections.
/// `reflections` pairs each arrival direction with its TDOA in seconds.
pub fn infer_room(
    source: &SourceEstimate,
    reflections: &[(Direction, f64)],
    c: f64,
) -> Result<InferredRoom> {
    let mut images = Vec::new();
    let mut boundaries = Vec::new();
    for (i, (dir, tau)) in reflections.iter().enumerate() {
        let img = locate_image(source.distance, *dir, *tau, c);
        let plane = boundary_from_pair(source.position, img)?;
        let label = label_from_normal(plane.normal);
        images.push((img, i));
        boundaries.push(BoundaryPlane::new(plane.point, plane.normal, label)?);
    }
    Ok(InferredRoom { source: *source, images, boundaries })
}
