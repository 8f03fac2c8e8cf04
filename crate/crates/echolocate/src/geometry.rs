//! Coordinate frames, shoebox rooms, mirror images, and the analytic oracle for
//! every angle and delay used by the simulator and by tests.
//!
//! Two frames are used: the room frame has its origin at the lower-left floor
//! corner; the array frame is centered on the microphone array. All inference
//! outputs are array-centered. Azimuth is measured counterclockwise from +x in
//! the horizontal plane, elevation is positive above the horizontal.

use crate::{Error, Result, SOUND_SPEED};
use serde::{Deserialize, Serialize};

/// Cartesian point or vector in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Geometry("cannot normalize zero vector".into()));
        }
        Ok(self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Direction on the sphere: azimuth in [0, 360) degrees counterclockwise from
/// +x, elevation in [-90, +90] degrees, positive above the horizontal plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    /// Wraps azimuth into [0, 360) and validates the elevation range.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        let mut az = azimuth_deg % 360.0;
        if az < 0.0 {
            az += 360.0;
        }
        // -0.0 and 360.0-eps rounding both land in range.
        if az >= 360.0 {
            az = 0.0;
        }
        debug_assert!((-90.0..=90.0).contains(&elevation_deg));
        Direction { azimuth_deg: az, elevation_deg }
    }

    /// Unit vector for this direction.
    pub fn unit_vector(self) -> Vec3 {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Great-circle angle to another direction, in degrees.
    pub fn angle_to(self, o: Direction) -> f64 {
        let d = self.unit_vector().dot(o.unit_vector()).clamp(-1.0, 1.0);
        d.acos().to_degrees()
    }
}

/// Direction of a nonzero vector. At the poles the azimuth is defined as 0.
pub fn direction_of(v: Vec3) -> Result<Direction> {
    let n = v.norm();
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::Geometry("direction of zero vector".into()));
    }
    let horiz = v.x.hypot(v.y);
    let elevation = v.z.atan2(horiz).to_degrees();
    let azimuth = if horiz == 0.0 { 0.0 } else { v.y.atan2(v.x).to_degrees() };
    Ok(Direction::new(azimuth, elevation.clamp(-90.0, 90.0)))
}

/// Unit vector of a direction (free-function form mirroring [`direction_of`]).
pub fn unit_vector(d: Direction) -> Vec3 {
    d.unit_vector()
}

/// Which room boundary a plane or image belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryLabel {
    #[serde(rename = "floor")]
    Floor,
    #[serde(rename = "ceiling")]
    Ceiling,
    #[serde(rename = "wall+x")]
    WallXPos,
    #[serde(rename = "wall-x")]
    WallXNeg,
    #[serde(rename = "wall+y")]
    WallYPos,
    #[serde(rename = "wall-y")]
    WallYNeg,
    #[serde(rename = "unknown")]
    Unknown,
}

impl std::fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoundaryLabel::Floor => "floor",
            BoundaryLabel::Ceiling => "ceiling",
            BoundaryLabel::WallXPos => "wall+x",
            BoundaryLabel::WallXNeg => "wall-x",
            BoundaryLabel::WallYPos => "wall+y",
            BoundaryLabel::WallYNeg => "wall-y",
            BoundaryLabel::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Infinite plane given by a point on it and a unit normal pointing into the
/// room (toward the source side).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundaryPlane {
    pub point: Vec3,
    pub normal: Vec3,
    pub label: BoundaryLabel,
}

impl BoundaryPlane {
    /// The normal is renormalized; a zero normal is rejected.
    pub fn new(point: Vec3, normal: Vec3, label: BoundaryLabel) -> Result<Self> {
        Ok(BoundaryPlane { point, normal: normal.normalized()?, label })
    }

    /// Unsigned distance from the frame origin to the plane.
    pub fn distance_to_origin(&self) -> f64 {
        self.point.dot(self.normal).abs()
    }

    /// Signed distance from `p` to the plane along the normal.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.normal)
    }

    /// The same plane expressed in a frame translated so `origin` becomes zero.
    pub fn translated(&self, origin: Vec3) -> BoundaryPlane {
        BoundaryPlane { point: self.point - origin, normal: self.normal, label: self.label }
    }
}

/// Face order used for reflection coefficients throughout the crate.
pub const FACE_ORDER: [BoundaryLabel; 6] = [
    BoundaryLabel::WallXNeg,
    BoundaryLabel::WallXPos,
    BoundaryLabel::WallYNeg,
    BoundaryLabel::WallYPos,
    BoundaryLabel::Floor,
    BoundaryLabel::Ceiling,
];

/// Shoebox room with source and array poses, in the room frame (origin at the
/// lower-left floor corner).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoomScene {
    /// Room dimensions (Lx, Ly, Lz) in meters.
    pub dims: Vec3,
    pub source_pos: Vec3,
    pub array_pos: Vec3,
    /// Per-face amplitude reflection coefficients in [`FACE_ORDER`].
    pub reflection_coeffs: [f64; 6],
    /// Reverberation time in seconds the coefficients were derived from.
    pub t60: f64,
    /// Speed of sound in m/s.
    pub sound_speed: f64,
}

impl RoomScene {
    pub fn new(dims: Vec3, source_pos: Vec3, array_pos: Vec3, t60: f64) -> Result<Self> {
        let mut scene = RoomScene {
            dims,
            source_pos,
            array_pos,
            reflection_coeffs: [1.0; 6],
            t60,
            sound_speed: SOUND_SPEED,
        };
        scene.validate()?;
        scene.reflection_coeffs = crate::simulator::absorption_from_t60(&scene)?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |p: Vec3| {
            p.x > 0.0 && p.x < self.dims.x && p.y > 0.0 && p.y < self.dims.y && p.z > 0.0
                && p.z < self.dims.z
        };
        if self.dims.x <= 0.0 || self.dims.y <= 0.0 || self.dims.z <= 0.0 {
            return Err(Error::Geometry("non-positive room dimensions".into()));
        }
        if !inside(self.source_pos) || !inside(self.array_pos) {
            return Err(Error::Geometry("source and array must lie strictly inside the room".into()));
        }
        Ok(())
    }

    /// The six boundary planes with inward-pointing normals, in [`FACE_ORDER`].
    pub fn boundaries(&self) -> [BoundaryPlane; 6] {
        let d = self.dims;
        let plane = |point, normal, label| BoundaryPlane { point, normal, label };
        [
            plane(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), BoundaryLabel::WallXNeg),
            plane(Vec3::new(d.x, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), BoundaryLabel::WallXPos),
            plane(Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0), BoundaryLabel::WallYNeg),
            plane(Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, -1.0, 0.0), BoundaryLabel::WallYPos),
            plane(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), BoundaryLabel::Floor),
            plane(Vec3::new(0.0, 0.0, d.z), Vec3::new(0.0, 0.0, -1.0), BoundaryLabel::Ceiling),
        ]
    }

    /// Boundary planes translated into the array-centered frame.
    pub fn boundaries_array_frame(&self) -> [BoundaryPlane; 6] {
        self.boundaries().map(|b| b.translated(self.array_pos))
    }

    /// Room-frame point expressed in the array-centered frame.
    pub fn to_array_frame(&self, p: Vec3) -> Vec3 {
        p - self.array_pos
    }

    /// Minimum distance from `p` to any boundary.
    pub fn boundary_clearance(&self, p: Vec3) -> f64 {
        let d = self.dims;
        [p.x, d.x - p.x, p.y, d.y - p.y, p.z, d.z - p.z]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Mirror of `p` across `plane`: q = p - 2 <p - point, n> n.
pub fn mirror_point(p: Vec3, plane: &BoundaryPlane) -> Vec3 {
    let d = (p - plane.point).dot(plane.normal);
    p - plane.normal * (2.0 * d)
}

/// First-order image sources, one per boundary, in room coordinates.
pub fn first_order_images(scene: &RoomScene) -> [(Vec3, BoundaryLabel); 6] {
    scene
        .boundaries()
        .map(|b| (mirror_point(scene.source_pos, &b), b.label))
}

/// Side-view geometry of the direct path and the floor reflection.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FloorPathAngles {
    /// Signed elevation of the direct path in degrees (positive above horizontal).
    pub alpha1_deg: f64,
    /// Depression angle of the floor reflection below horizontal, in degrees (> 0).
    pub alpha2_deg: f64,
    /// Array height above the floor in meters.
    pub h: f64,
    /// True TDOA between floor reflection and direct path, in seconds.
    pub dt: f64,
}

/// Exact direct/floor-path angles and TDOA for a scene.
pub fn floor_path_oracle(scene: &RoomScene) -> Result<FloorPathAngles> {
    let to_source = scene.source_pos - scene.array_pos;
    let d_direct = to_source.norm();
    if d_direct <= 0.0 {
        return Err(Error::Geometry("source and array coincide".into()));
    }
    let floor = &scene.boundaries()[4];
    let image = mirror_point(scene.source_pos, floor);
    let to_image = image - scene.array_pos;
    let alpha1 = direction_of(to_source)?.elevation_deg;
    let alpha2 = -direction_of(to_image)?.elevation_deg;
    let dt = (to_image.norm() - d_direct) / scene.sound_speed;
    Ok(FloorPathAngles { alpha1_deg: alpha1, alpha2_deg: alpha2, h: scene.array_pos.z, dt })
}

/// Ground-truth DOA and TDOA of one propagation path as seen from the array.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PathOracle {
    pub label: BoundaryLabel,
    pub direction: Direction,
    /// Distance from the array to the (image) source in meters.
    pub distance: f64,
    /// Delay relative to the direct path in seconds (0 for the direct path).
    pub tdoa: f64,
}

/// Direct path plus the six first-order reflections, array-centered.
pub fn first_order_path_oracle(scene: &RoomScene) -> Result<(PathOracle, Vec<PathOracle>)> {
    let to_source = scene.source_pos - scene.array_pos;
    let d0 = to_source.norm();
    let direct = PathOracle {
        label: BoundaryLabel::Unknown,
        direction: direction_of(to_source)?,
        distance: d0,
        tdoa: 0.0,
    };
    let mut images = Vec::with_capacity(6);
    for (pos, label) in first_order_images(scene) {
        let v = pos - scene.array_pos;
        let d = v.norm();
        images.push(PathOracle {
            label,
            direction: direction_of(v)?,
            distance: d,
            tdoa: (d - d0) / scene.sound_speed,
        });
    }
    Ok((direct, images))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vic1_scene() -> RoomScene {
        RoomScene::new(
            Vec3::new(4.0, 5.0, 2.6),
            Vec3::new(3.0, 3.0, 1.5),
            Vec3::new(2.0, 2.0, 1.5),
            0.8,
        )
        .unwrap()
    }

    #[test]
    fn mirror_across_floor() {
        // Array-centered floor plane z = -1.5.
        let plane = BoundaryPlane::new(
            Vec3::new(0.0, 0.0, -1.5),
            Vec3::new(0.0, 0.0, 1.0),
            BoundaryLabel::Floor,
        )
        .unwrap();
        let q = mirror_point(Vec3::new(2.0, 0.0, 0.5), &plane);
        assert_relative_eq!(q.x, 2.0);
        assert_relative_eq!(q.y, 0.0);
        assert_relative_eq!(q.z, -3.5);
    }

    #[test]
    fn mirror_fixed_point_on_plane() {
        let plane = BoundaryPlane::new(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(0.0, 1.0, 0.0),
            BoundaryLabel::Unknown,
        )
        .unwrap();
        let p = Vec3::new(-4.0, 2.0, 7.0);
        let q = mirror_point(p, &plane);
        assert_relative_eq!((q - p).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn first_order_images_vic1() {
        let scene = vic1_scene();
        let images = first_order_images(&scene);
        let find = |label| images.iter().find(|(_, l)| *l == label).unwrap().0;
        let floor = find(BoundaryLabel::Floor);
        assert_relative_eq!(floor.z, -1.5);
        let ceiling = find(BoundaryLabel::Ceiling);
        assert_relative_eq!(ceiling.z, 3.7);
        let wall = find(BoundaryLabel::WallXNeg);
        assert_relative_eq!(wall.x, -3.0);
        let wall = find(BoundaryLabel::WallXPos);
        assert_relative_eq!(wall.x, 5.0);
        for (img, _) in images {
            let inside = img.x > 0.0
                && img.x < scene.dims.x
                && img.y > 0.0
                && img.y < scene.dims.y
                && img.z > 0.0
                && img.z < scene.dims.z;
            assert!(!inside, "image {img:?} must lie outside the room");
        }
    }

    #[test]
    fn images_equidistant_for_centered_source_in_cube() {
        let scene = RoomScene::new(
            Vec3::new(4.0, 4.0, 4.0),
            Vec3::new(2.0, 2.0, 2.0),
            Vec3::new(1.0, 1.0, 1.0),
            0.5,
        )
        .unwrap();
        let dists: Vec<f64> = first_order_images(&scene)
            .iter()
            .map(|(p, _)| (*p - scene.source_pos).norm())
            .collect();
        for d in &dists {
            assert_relative_eq!(*d, dists[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn floor_oracle_scene_a() {
        // Array at h = 1.5, source at the same height, 2 m away horizontally.
        let scene = RoomScene::new(
            Vec3::new(6.0, 6.0, 3.0),
            Vec3::new(4.0, 2.0, 1.5),
            Vec3::new(2.0, 2.0, 1.5),
            0.6,
        )
        .unwrap();
        let o = floor_path_oracle(&scene).unwrap();
        assert_relative_eq!(o.alpha1_deg, 0.0, epsilon = 1e-12);
        assert_relative_eq!(o.alpha2_deg, (3.0f64 / 2.0).atan().to_degrees(), epsilon = 1e-12);
        assert_relative_eq!(o.alpha2_deg, 56.309932, epsilon = 1e-6);
        assert_relative_eq!(o.dt, (13.0f64.sqrt() - 2.0) / 343.0, epsilon = 1e-15);
        assert_relative_eq!(o.dt * 1e3, 4.681, epsilon = 1e-3);
    }

    #[test]
    fn floor_oracle_scene_b() {
        // Source 0.5 m above the array.
        let scene = RoomScene::new(
            Vec3::new(6.0, 6.0, 3.0),
            Vec3::new(4.0, 2.0, 2.0),
            Vec3::new(2.0, 2.0, 1.5),
            0.6,
        )
        .unwrap();
        let o = floor_path_oracle(&scene).unwrap();
        assert_relative_eq!(o.alpha1_deg, (0.5f64 / 2.0).atan().to_degrees(), epsilon = 1e-12);
        assert_relative_eq!(o.alpha1_deg, 14.036243, epsilon = 1e-6);
        assert_relative_eq!(o.alpha2_deg, (3.5f64 / 2.0).atan().to_degrees(), epsilon = 1e-12);
        assert_relative_eq!(o.alpha2_deg, 60.255119, epsilon = 1e-6);
        assert_relative_eq!(o.dt, (16.25f64.sqrt() - 4.25f64.sqrt()) / 343.0, epsilon = 1e-15);
        assert_relative_eq!(o.dt * 1e3, 5.742, epsilon = 1e-3);
    }

    #[test]
    fn floor_oracle_projection_identity() {
        // (d_image) cos(alpha2) = (d_direct) cos(alpha1): both equal the
        // horizontal source-array distance.
        let scene = vic1_scene();
        let o = floor_path_oracle(&scene).unwrap();
        let d0 = (scene.source_pos - scene.array_pos).norm();
        let d_img = d0 + o.dt * scene.sound_speed;
        let lhs = d_img * o.alpha2_deg.to_radians().cos();
        let rhs = d0 * o.alpha1_deg.to_radians().cos();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn direction_axis_conventions() {
        let d = direction_of(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d.azimuth_deg, 0.0);
        assert_relative_eq!(d.elevation_deg, 0.0);

        let d = direction_of(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(d.elevation_deg, 90.0);
        assert_relative_eq!(d.azimuth_deg, 0.0);

        let d = direction_of(Vec3::new(4.0, 0.0, 0.5)).unwrap();
        assert_relative_eq!(d.azimuth_deg, 0.0);
        assert_relative_eq!(d.elevation_deg, (0.5f64 / 4.0).atan().to_degrees(), epsilon = 1e-12);
        assert_relative_eq!(d.elevation_deg, 7.125016, epsilon = 1e-6);

        let d = direction_of(Vec3::new(0.0, -1.0, 0.0)).unwrap();
        assert_relative_eq!(d.azimuth_deg, 270.0);
    }

    #[test]
    fn direction_of_rejects_zero() {
        assert!(direction_of(Vec3::ZERO).is_err());
    }

    #[test]
    fn vic1_first_order_oracle() {
        let (direct, images) = first_order_path_oracle(&vic1_scene()).unwrap();
        assert_relative_eq!(direct.distance, 2.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(direct.direction.azimuth_deg, 45.0, epsilon = 1e-9);
        let floor = images.iter().find(|p| p.label == BoundaryLabel::Floor).unwrap();
        assert_relative_eq!(floor.distance, 11.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(floor.tdoa * 1e3, 5.546, epsilon = 1e-3);
        assert_relative_eq!(floor.direction.azimuth_deg, 45.0, epsilon = 1e-9);
        assert_relative_eq!(floor.direction.elevation_deg, -64.760, epsilon = 1e-3);
        let ceiling = images.iter().find(|p| p.label == BoundaryLabel::Ceiling).unwrap();
        assert_relative_eq!(ceiling.direction.elevation_deg, 57.2661, epsilon = 1e-3);
    }

    #[test]
    fn image_distance_exceeds_boundary_distance() {
        // Reflected path length is at least the distance from the array to the
        // reflecting boundary (triangle inequality on the unfolded path).
        let scene = vic1_scene();
        let boundaries = scene.boundaries();
        for (i, (img, _)) in first_order_images(&scene).iter().enumerate() {
            let d_img = (*img - scene.array_pos).norm();
            let d_boundary = boundaries[i].signed_distance(scene.array_pos).abs();
            assert!(d_img >= d_boundary - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn mirror_is_involution(
            px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -10.0f64..10.0,
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
            ox in -5.0f64..5.0, oy in -5.0f64..5.0, oz in -5.0f64..5.0,
        ) {
            let n = Vec3::new(nx, ny, nz);
            prop_assume!(n.norm() > 1e-3);
            let plane = BoundaryPlane::new(Vec3::new(ox, oy, oz), n, BoundaryLabel::Unknown).unwrap();
            let p = Vec3::new(px, py, pz);
            let q = mirror_point(mirror_point(p, &plane), &plane);
            prop_assert!((q - p).norm() < 1e-9);
        }

        #[test]
        fn mirror_midpoint_on_plane(
            px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -10.0f64..10.0,
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
        ) {
            let n = Vec3::new(nx, ny, nz);
            prop_assume!(n.norm() > 1e-3);
            let plane = BoundaryPlane::new(Vec3::new(0.3, -0.7, 1.1), n, BoundaryLabel::Unknown).unwrap();
            let p = Vec3::new(px, py, pz);
            let q = mirror_point(p, &plane);
            let mid = (p + q) * 0.5;
            prop_assert!(plane.signed_distance(mid).abs() < 1e-9);
            // (p - q) parallel to the normal: cross product is zero.
            let d = p - q;
            let cross = Vec3::new(
                d.y * plane.normal.z - d.z * plane.normal.y,
                d.z * plane.normal.x - d.x * plane.normal.z,
                d.x * plane.normal.y - d.y * plane.normal.x,
            );
            prop_assert!(cross.norm() < 1e-9 * (1.0 + d.norm()));
        }

        #[test]
        fn direction_round_trip(az in 0.0f64..360.0, el in -89.999f64..89.999) {
            let d = Direction::new(az, el);
            let rt = direction_of(d.unit_vector()).unwrap();
            // acos in angle_to resolves only ~1e-6 deg near zero, so the
            // unit-vector distance carries the tight bound.
            prop_assert!((d.unit_vector() - rt.unit_vector()).norm() < 1e-12);
            prop_assert!(d.angle_to(rt) < 1e-5);
        }

        #[test]
        fn alpha2_exceeds_alpha1(
            sx in 0.2f64..5.8, sy in 0.2f64..5.8, sz in 0.1f64..2.9,
            ax in 0.2f64..5.8, ay in 0.2f64..5.8, az in 0.1f64..2.9,
        ) {
            let scene = RoomScene::new(
                Vec3::new(6.0, 6.0, 3.0),
                Vec3::new(sx, sy, sz),
                Vec3::new(ax, ay, az),
                0.6,
            ).unwrap();
            prop_assume!((scene.source_pos - scene.array_pos).norm() > 1e-3);
            let o = floor_path_oracle(&scene).unwrap();
            prop_assert!(o.alpha2_deg >= o.alpha1_deg - 1e-12);
        }
    }
}
