//! Source distance estimation from the direct/floor-reflection pair.
//!
//! Angle convention: alpha1 is the signed elevation of the direct path
//! (positive when the source sits above the array horizon), alpha2 the
//! depression angle of the floor reflection below the horizon (always
//! positive); alpha2 > alpha1 always, and the floor bounce requires
//! 0 < alpha2 < 90 degrees.

use crate::config::DistanceMethod;
use crate::doa::DoaSet;
use crate::geometry::{Direction, Vec3};
use crate::mlp::MlpModel;
use crate::tdoa::TdoaEstimate;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Inputs the distance estimators consume.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LocalizationFeatures {
    /// Array height above the floor, meters.
    pub h: f64,
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
    /// Floor-reflection TDOA, seconds.
    pub dt: f64,
    pub direct: Direction,
}

impl LocalizationFeatures {
    pub fn vector(&self) -> [f64; 4] {
        [self.h, self.alpha1_deg, self.alpha2_deg, self.dt]
    }
}

/// Output range of the DNN regressor; raw predictions outside are clamped.
pub const DNN_CLAMP: (f64, f64) = (0.1, 20.0);

/// Triangle solution using the known array height:
/// d1 = h sin(pi - 2 a2) / (sin a2 sin(a2 - a1)).
pub fn distance_from_height(h: f64, alpha1_deg: f64, alpha2_deg: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Geometry("array height must be positive".into()));
    }
    if !(0.0 < alpha2_deg && alpha2_deg < 90.0) {
        return Err(Error::Geometry(format!(
            "floor angle {alpha2_deg} outside (0, 90) degrees"
        )));
    }
    if alpha2_deg <= alpha1_deg {
        return Err(Error::Geometry("floor angle must exceed direct angle".into()));
    }
    let a1 = alpha1_deg.to_radians();
    let a2 = alpha2_deg.to_radians();
    Ok(h * (PI - 2.0 * a2).sin() / (a2.sin() * (a2 - a1).sin()))
}

/// Projection identity solution using the floor-path extra delay:
/// d1 = c dt cos a2 / (cos a1 - cos a2).
pub fn distance_from_tdoa(dt: f64, alpha1_deg: f64, alpha2_deg: f64, c: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Geometry("TDOA must be positive".into()));
    }
    if !(0.0 < alpha2_deg && alpha2_deg < 90.0) {
        return Err(Error::Geometry(format!(
            "floor angle {alpha2_deg} outside (0, 90) degrees"
        )));
    }
    let c1 = alpha1_deg.to_radians().cos();
    let c2 = alpha2_deg.to_radians().cos();
    if c1 <= c2 {
        return Err(Error::Geometry("degenerate angles: cos a1 <= cos a2".into()));
    }
    Ok(c * dt * c2 / (c1 - c2))
}

/// Picks the reflection that behaves like the floor bounce: below
/// `max_el_deg`, valid TDOA, and minimal residual of the projection identity
/// (d1 + c dt) cos a2 = d1 cos a1 with d1 taken from the height formula.
/// Ties (including all-residuals-unavailable) go to the lowest elevation.
pub fn select_floor_reflection(
    doas: &DoaSet,
    taus: &[TdoaEstimate],
    h: f64,
    max_el_deg: f64,
    c: f64,
) -> Result<usize> {
    let alpha1 = doas.direct.elevation_deg;
    let mut best: Option<(f64, f64, usize)> = None; // (residual, elevation, index)
    for (i, refl) in doas.reflections.iter().enumerate() {
        let el = refl.direction.elevation_deg;
        if el >= max_el_deg {
            continue;
        }
        let valid = taus.get(i).is_some_and(|t| t.valid);
        if !valid {
            continue;
        }
        let alpha2 = -el;
        let residual = match distance_from_height(h, alpha1, alpha2) {
            Ok(d1) => {
                let c2 = alpha2.to_radians().cos();
                let c1 = alpha1.to_radians().cos();
                ((d1 + c * taus[i].tau) * c2 - d1 * c1).abs()
            }
            Err(_) => f64::INFINITY,
        };
        let better = match &best {
            None => true,
            Some((r, e, _)) => residual < r - 1e-12 || ((residual - r).abs() <= 1e-12 && el < *e),
        };
        if better {
            best = Some((residual, el, i));
        }
    }
    best.map(|(_, _, i)| i).ok_or(Error::NotFound)
}

/// A localized source: distance along the direct direction, array-centered.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SourceEstimate {
    pub distance: f64,
    pub position: Vec3,
    pub method: DistanceMethod,
    /// True when a DNN output hit the clamp range.
    pub clamped: bool,
}

pub fn estimate_source(
    features: &LocalizationFeatures,
    method: DistanceMethod,
    model: Option<&MlpModel>,
    c: f64,
) -> Result<SourceEstimate> {
    let (distance, clamped) = match method {
        DistanceMethod::Height => {
            (distance_from_height(features.h, features.alpha1_deg, features.alpha2_deg)?, false)
        }
        DistanceMethod::Tdoa => (
            distance_from_tdoa(features.dt, features.alpha1_deg, features.alpha2_deg, c)?,
            false,
        ),
        DistanceMethod::Dnn => {
            let model = model
                .ok_or_else(|| Error::InvalidArgument("distance method dnn needs a model".into()))?;
            let raw = model.predict(&features.vector());
            let d = raw.clamp(DNN_CLAMP.0, DNN_CLAMP.1);
            (d, d != raw)
        }
    };
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Geometry(format!("non-physical distance {distance}")));
    }
    Ok(SourceEstimate {
        distance,
        position: features.direct.unit_vector() * distance,
        method,
        clamped,
    })
}
