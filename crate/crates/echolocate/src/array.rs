//! Rigid-sphere microphone array description and capsule layout parsing.
//!
//! Layout files are plain text with one capsule per line: `index azimuth_deg
//! elevation_deg`, `#` comments and blank lines allowed. Indices must form
//! 0..n-1 (any order); they fix the WAV channel order.

use crate::geometry::{Direction, Vec3};
use crate::{Error, Result};

/// Default layout: 32 capsules on a 4.2 cm rigid sphere.
const EM32_LAYOUT: &str = include_str!("../data/em32.txt");

#[derive(Clone, Debug)]
pub struct ArraySpec {
    /// Sphere radius in meters.
    pub radius: f64,
    /// Capsule directions in channel order.
    pub capsule_dirs: Vec<Direction>,
    /// Spherical-harmonic order used for encoding.
    pub sh_order: usize,
    /// Sample rate in Hz.
    pub sample_rate: f64,
}

impl ArraySpec {
    pub fn new(
        radius: f64,
        capsule_dirs: Vec<Direction>,
        sh_order: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        let dim = (sh_order + 1) * (sh_order + 1);
        if dim > capsule_dirs.len() {
            return Err(Error::InvalidArgument(format!(
                "order {sh_order} needs at least {dim} capsules, layout has {}",
                capsule_dirs.len()
            )));
        }
        Ok(ArraySpec { radius, capsule_dirs, sh_order, sample_rate })
    }

    /// The bundled 32-capsule spec: radius 4.2 cm, order 4, 16 kHz.
    pub fn em32() -> Self {
        let dirs = parse_layout(EM32_LAYOUT).expect("bundled layout is valid");
        ArraySpec::new(0.042, dirs, 4, 16000.0).expect("bundled layout satisfies constraints")
    }

    pub fn n_capsules(&self) -> usize {
        self.capsule_dirs.len()
    }

    pub fn coeff_count(&self) -> usize {
        (self.sh_order + 1) * (self.sh_order + 1)
    }

    /// Capsule positions relative to the sphere center.
    pub fn capsule_positions(&self) -> Vec<Vec3> {
        self.capsule_dirs.iter().map(|d| d.unit_vector() * self.radius).collect()
    }
}

/// Parses a capsule layout file into directions ordered by capsule index.
pub fn parse_layout(text: &str) -> Result<Vec<Direction>> {
    let mut entries: Vec<(usize, Direction)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let err = |msg: &str| Error::LayoutFormat(format!("line {}: {msg}", lineno + 1));
        let index: usize = parts
            .next()
            .ok_or_else(|| err("missing index"))?
            .parse()
            .map_err(|_| err("index must be a nonnegative integer"))?;
        let azimuth: f64 = parts
            .next()
            .ok_or_else(|| err("missing azimuth"))?
            .parse()
            .map_err(|_| err("azimuth must be a number"))?;
        let elevation: f64 = parts
            .next()
            .ok_or_else(|| err("missing elevation"))?
            .parse()
            .map_err(|_| err("elevation must be a number"))?;
        if parts.next().is_some() {
            return Err(err("trailing fields"));
        }
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(err("angles must be finite"));
        }
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(err("elevation out of [-90, 90]"));
        }
        if index > 100_000 {
            return Err(err("index too large"));
        }
        entries.push((index, Direction::new(azimuth, elevation)));
    }
    if entries.is_empty() {
        return Err(Error::LayoutFormat("no capsules".into()));
    }
    let n = entries.len();
    let mut dirs: Vec<Option<Direction>> = vec![None; n];
    for (index, dir) in entries {
        if index >= n {
            return Err(Error::LayoutFormat(format!(
                "index {index} out of range for {n} capsules"
            )));
        }
        if dirs[index].replace(dir).is_some() {
            return Err(Error::LayoutFormat(format!("duplicate index {index}")));
        }
    }
    Ok(dirs.into_iter().map(|d| d.expect("all indices filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn em32_loads() {
        let spec = ArraySpec::em32();
        assert_eq!(spec.n_capsules(), 32);
        assert_eq!(spec.sh_order, 4);
        assert_relative_eq!(spec.radius, 0.042);
        // Channel 0 points 21 degrees above the +x axis.
        assert_relative_eq!(spec.capsule_dirs[0].azimuth_deg, 0.0);
        assert_relative_eq!(spec.capsule_dirs[0].elevation_deg, 21.0);
        for p in spec.capsule_positions() {
            assert_relative_eq!(p.norm(), 0.042, epsilon = 1e-12);
        }
    }

    #[test]
    fn layout_order_independent() {
        let a = parse_layout("0 10 20\n1 30 -40\n2 50 60\n").unwrap();
        let b = parse_layout("2 50 60\n0 10 20\n1 30 -40\n").unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn layout_rejects_malformed() {
        assert!(parse_layout("").is_err());
        assert!(parse_layout("0 10").is_err());
        assert!(parse_layout("0 10 200").is_err());
        assert!(parse_layout("0 10 20\n0 30 40").is_err());
        assert!(parse_layout("1 10 20").is_err());
        assert!(parse_layout("x 10 20").is_err());
        assert!(parse_layout("0 nan 20").is_err());
        assert!(parse_layout("0 10 20 30").is_err());
    }

    #[test]
    fn layout_allows_comments() {
        let dirs = parse_layout("# header\n\n0 0 0 # capsule zero\n1 90 45\n").unwrap();
        assert_eq!(dirs.len(), 2);
        assert_relative_eq!(dirs[1].azimuth_deg, 90.0);
    }

    #[test]
    fn order_capsule_constraint() {
        let dirs = parse_layout("0 0 0\n1 90 0\n2 180 0\n3 270 0\n").unwrap();
        assert!(ArraySpec::new(0.05, dirs.clone(), 1, 16000.0).is_ok());
        assert!(ArraySpec::new(0.05, dirs, 2, 16000.0).is_err());
    }
}
