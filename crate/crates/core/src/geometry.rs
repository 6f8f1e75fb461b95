//! Pinhole devices (cameras and the projector as an inverse camera),
//! viewing rays, two-ray triangulation and epipolar geometry.
//!
//! Conventions: world coordinates in millimeters, image coordinates in
//! pixels with pixel centers on integer coordinates. A [`Pose`] maps world
//! points into the device frame, whose `+z` axis is the viewing direction
//! and whose `+y` axis points down the image.

use std::sync::Arc;

use nalgebra::{Matrix3, Point2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::MeasurementVolume;
use crate::projcal::DistortionGrid;

/// Maximum fixed-point iterations when inverting lens or grid distortion.
pub const UNDISTORT_MAX_ITERATIONS: usize = 20;
/// Convergence tolerance of the distortion inversion, in pixels.
pub const UNDISTORT_TOLERANCE_PX: f64 = 1e-10;
/// Rays whose angle has `|sin| <= PARALLEL_SIN_LIMIT` are treated as parallel.
pub const PARALLEL_SIN_LIMIT: f64 = 1e-9;

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point at device depth {0} mm is not in front of the projection center")]
    NonPositiveDepth(f64),
    #[error("distortion inversion did not converge within {0} iterations")]
    UndistortDiverged(usize),
    #[error("rays are parallel")]
    ParallelRays,
    #[error("devices share a projection center")]
    CoincidentCenters,
    #[error("viewing ray does not pass through the measurement volume")]
    RayMissesVolume,
    #[error("epipolar segment lies outside the second image")]
    SegmentOutsideImage,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("a camera cannot carry a distortion grid")]
    GridOnCamera,
}

/// Rigid world-to-device transform: `x_device = rotation * x_world + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let gram = rotation.transpose() * rotation;
        let deviation = (gram - Matrix3::identity()).abs().max();
        if !deviation.is_finite() || deviation > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::InvalidPose(format!(
                "rotation is not orthonormal (max deviation {deviation:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::InvalidPose(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a world-to-device rotation and the projection center in world coordinates.
    pub fn from_center(rotation: Matrix3<f64>, center: Point3<f64>) -> Result<Self, GeometryError> {
        let translation = -(rotation * center.coords);
        Self::new(rotation, translation)
    }

    /// Device at `eye` looking at `target`; `up` is the world direction that
    /// should appear upward in the image.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidPose("eye and target coincide".into()))?;
        let down = -up;
        let y = (down - z * down.dot(&z))
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidPose("up is parallel to view direction".into()))?;
        let x = y.cross(&z);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self::from_center(rotation, eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Projection center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn to_device(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn direction_to_world(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * d
    }

    pub fn direction_to_device(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d
    }

    /// Applies an extra device-frame rotation on top of this pose, keeping the center fixed.
    pub fn rotated_in_device(&self, extra: &Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::from_center(extra * self.rotation, self.center())
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// The principal point may lie outside the sensor; projector optics
    /// are commonly built that way.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite principal point".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("sensor size must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn to_pixel(&self, normalized: Vector2<f64>) -> Point2<f64> {
        Point2::new(self.fx * normalized.x + self.cx, self.fy * normalized.y + self.cy)
    }

    pub fn to_normalized(&self, pixel: &Point2<f64>) -> Vector2<f64> {
        Vector2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }
}

/// Five-coefficient radial-tangential lens model on normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LensDistortion {
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub k3: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
}

impl LensDistortion {
    pub fn radial(k1: f64) -> Self {
        Self {
            k1,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Coefficient-wise sum; used to stack an injected error on a nominal model.
    pub fn plus(&self, other: &Self) -> Self {
        Self {
            k1: self.k1 + other.k1,
            k2: self.k2 + other.k2,
            k3: self.k3 + other.k3,
            p1: self.p1 + other.p1,
            p2: self.p2 + other.p2,
        }
    }

    pub fn distort(&self, n: Vector2<f64>) -> Vector2<f64> {
        if self.is_zero() {
            return n;
        }
        let (x, y) = (n.x, n.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        Vector2::new(x * radial + dx, y * radial + dy)
    }

    /// Inverts [`distort`](Self::distort) by fixed-point iteration.
    ///
    /// `scale` converts normalized units to pixels for the convergence test.
    pub fn undistort(&self, d: Vector2<f64>, scale: f64) -> Result<Vector2<f64>, GeometryError> {
        if self.is_zero() {
            return Ok(d);
        }
        let mut n = d;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let (x, y) = (n.x, n.y);
            let r2 = x * x + y * y;
            let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
            let dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
            let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
            let next = Vector2::new((d.x - dx) / radial, (d.y - dy) / radial);
            if !(next.x.is_finite() && next.y.is_finite()) {
                break;
            }
            let step = (next - n).norm() * scale;
            n = next;
            if step < UNDISTORT_TOLERANCE_PX {
                return Ok(n);
            }
        }
        Err(GeometryError::UndistortDiverged(UNDISTORT_MAX_ITERATIONS))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Camera,
    Projector,
}

/// A camera, or the projector modelled as an inverse camera.
///
/// A projector may additionally carry a [`DistortionGrid`]. The grid stores
/// `d = ideal - measured` at ideal (lens-model) pixel positions, so
/// projection subtracts it and back-projection adds it back.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeDevice {
    kind: DeviceKind,
    intrinsics: Intrinsics,
    pose: Pose,
    lens: LensDistortion,
    grid: Option<Arc<DistortionGrid>>,
}

impl PinholeDevice {
    pub fn new(
        kind: DeviceKind,
        intrinsics: Intrinsics,
        pose: Pose,
        lens: LensDistortion,
    ) -> Result<Self, GeometryError> {
        intrinsics.validate()?;
        Ok(Self {
            kind,
            intrinsics,
            pose,
            lens,
            grid: None,
        })
    }

    pub fn camera(intrinsics: Intrinsics, pose: Pose, lens: LensDistortion) -> Result<Self, GeometryError> {
        Self::new(DeviceKind::Camera, intrinsics, pose, lens)
    }

    pub fn projector(intrinsics: Intrinsics, pose: Pose, lens: LensDistortion) -> Result<Self, GeometryError> {
        Self::new(DeviceKind::Projector, intrinsics, pose, lens)
    }

    pub fn with_grid(mut self, grid: Option<Arc<DistortionGrid>>) -> Result<Self, GeometryError> {
        if grid.is_some() && self.kind == DeviceKind::Camera {
            return Err(GeometryError::GridOnCamera);
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn with_lens(mut self, lens: LensDistortion) -> Self {
        self.lens = lens;
        self
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn lens(&self) -> &LensDistortion {
        &self.lens
    }

    pub fn grid(&self) -> Option<&Arc<DistortionGrid>> {
        self.grid.as_ref()
    }

    pub fn center(&self) -> Point3<f64> {
        self.pose.center()
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// Depth of a world point along the device's optical axis.
    pub fn depth_of(&self, p: &Point3<f64>) -> f64 {
        self.pose.to_device(p).z
    }

    fn normalized_of(&self, p: &Point3<f64>) -> Result<Vector2<f64>, GeometryError> {
        let pd = self.pose.to_device(p);
        if !(pd.z > 0.0) {
            return Err(GeometryError::NonPositiveDepth(pd.z));
        }
        Ok(Vector2::new(pd.x / pd.z, pd.y / pd.z))
    }

    /// Ideal pinhole projection without lens distortion or grid.
    pub fn project_pinhole(&self, p: &Point3<f64>) -> Result<Point2<f64>, GeometryError> {
        Ok(self.intrinsics.to_pixel(self.normalized_of(p)?))
    }

    /// Projection through the lens model, ignoring any installed grid.
    pub fn project_lens_only(&self, p: &Point3<f64>) -> Result<Point2<f64>, GeometryError> {
        let n = self.normalized_of(p)?;
        Ok(self.intrinsics.to_pixel(self.lens.distort(n)))
    }

    /// Full projection: pose, perspective division, lens, then grid.
    pub fn project(&self, p: &Point3<f64>) -> Result<Point2<f64>, GeometryError> {
        let ideal = self.project_lens_only(p)?;
        Ok(match &self.grid {
            Some(grid) => ideal - grid.sample(&ideal),
            None => ideal,
        })
    }

    /// Removes the grid correction: solves `ideal - d(ideal) = measured`.
    fn remove_grid(&self, measured: &Point2<f64>) -> Result<Point2<f64>, GeometryError> {
        let Some(grid) = &self.grid else {
            return Ok(*measured);
        };
        let mut ideal = *measured;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let next = measured + grid.sample(&ideal);
            let step = (next - ideal).norm();
            ideal = next;
            if step < UNDISTORT_TOLERANCE_PX {
                return Ok(ideal);
            }
        }
        Err(GeometryError::UndistortDiverged(UNDISTORT_MAX_ITERATIONS))
    }

    /// Normalized undistorted coordinates of a (measured) pixel.
    pub fn normalized_undistorted(&self, pixel: &Point2<f64>) -> Result<Vector2<f64>, GeometryError> {
        let ideal = self.remove_grid(pixel)?;
        let distorted = self.intrinsics.to_normalized(&ideal);
        let scale = self.intrinsics.fx.max(self.intrinsics.fy);
        self.lens.undistort(distorted, scale)
    }

    /// Pixel in the ideal pinhole image (lens and grid removed).
    pub fn undistort_pixel(&self, pixel: &Point2<f64>) -> Result<Point2<f64>, GeometryError> {
        Ok(self.intrinsics.to_pixel(self.normalized_undistorted(pixel)?))
    }

    pub fn back_project(&self, pixel: &Point2<f64>) -> Result<Ray, GeometryError> {
        let n = self.normalized_undistorted(pixel)?;
        let dir = self.pose.direction_to_world(&Vector3::new(n.x, n.y, 1.0));
        Ok(Ray::new(self.center(), dir))
    }

    /// True when the pixel lies inside the interpolatable image area `[0, w-1] x [0, h-1]`.
    pub fn contains_pixel(&self, pixel: &Point2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= (self.width() as f64 - 1.0)
            && pixel.y <= (self.height() as f64 - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn through(origin: Point3<f64>, target: Point3<f64>) -> Self {
        Self::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationResult {
    pub point: Point3<f64>,
    /// Length of the mutual perpendicular between the rays, mm.
    pub gap: f64,
}

/// Midpoint of the shortest segment joining two rays.
pub fn triangulate(r1: &Ray, r2: &Ray) -> Result<TriangulationResult, GeometryError> {
    let d1 = r1.direction;
    let d2 = r2.direction;
    let b = d1.dot(&d2);
    let sin2 = d1.cross(&d2).norm_squared();
    if sin2.sqrt() <= PARALLEL_SIN_LIMIT {
        return Err(GeometryError::ParallelRays);
    }
    let w0 = r1.origin - r2.origin;
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let denom = 1.0 - b * b;
    let s = (b * e - d) / denom;
    let t = (e - b * d) / denom;
    let p1 = r1.at(s);
    let p2 = r2.at(t);
    Ok(TriangulationResult {
        point: nalgebra::center(&p1, &p2),
        gap: (p1 - p2).norm(),
    })
}

/// Epipolar line in the ideal pinhole image of `d2` for a pixel of `d1`.
///
/// The line `l = (a, b, c)` is scaled so that `a^2 + b^2 = 1`; the signed
/// distance of an undistorted pixel `(u, v)` is `a u + b v + c`.
pub fn epipolar_line(
    d1: &PinholeDevice,
    d2: &PinholeDevice,
    pixel_in_d1: &Point2<f64>,
) -> Result<Vector3<f64>, GeometryError> {
    let undistorted = d1.undistort_pixel(pixel_in_d1)?;
    epipolar_line_undistorted(d1, d2, &undistorted)
}

/// Same as [`epipolar_line`] for a pixel already in `d1`'s ideal pinhole image.
pub fn epipolar_line_undistorted(
    d1: &PinholeDevice,
    d2: &PinholeDevice,
    undistorted_in_d1: &Point2<f64>,
) -> Result<Vector3<f64>, GeometryError> {
    let c1 = d1.center();
    if (c1 - d2.center()).norm() < 1e-9 {
        return Err(GeometryError::CoincidentCenters);
    }
    let n = d1.intrinsics().to_normalized(undistorted_in_d1);
    let dir = d1.pose().direction_to_world(&Vector3::new(n.x, n.y, 1.0));
    let homogeneous = |p: Point3<f64>| -> Vector3<f64> {
        let pd = d2.pose().to_device(&p);
        let k = d2.intrinsics();
        Vector3::new(k.fx * pd.x + k.cx * pd.z, k.fy * pd.y + k.cy * pd.z, pd.z)
    };
    let epipole = homogeneous(c1);
    let along = homogeneous(c1 + dir * 1000.0);
    let line = epipole.cross(&along);
    let norm = line.xy().norm();
    if norm < 1e-300 {
        return Err(GeometryError::CoincidentCenters);
    }
    Ok(line / norm)
}

/// Perpendicular distance of a pixel to a normalized line.
pub fn point_line_distance(line: &Vector3<f64>, pixel: &Point2<f64>) -> f64 {
    (line.x * pixel.x + line.y * pixel.y + line.z).abs()
}

/// Portion of a `d1` viewing ray inside the measurement volume, as seen by `d2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarSegment {
    /// `d2` pixel of the nearest depth.
    pub start: Point2<f64>,
    /// `d2` pixel of the farthest depth.
    pub end: Point2<f64>,
    /// Depth range along the `d1` axis covered by the segment, mm.
    pub near_depth: f64,
    pub far_depth: f64,
    pub ray: Ray,
    /// `d1`-frame depth gained per unit of ray parameter.
    pub depth_per_unit: f64,
}

impl EpipolarSegment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// World point on the `d1` ray at the given `d1` depth.
    pub fn point_at_depth(&self, depth: f64) -> Point3<f64> {
        self.ray.at(depth / self.depth_per_unit)
    }
}

/// Depth interval of a `d1` viewing ray inside the volume box, which is
/// centered on `d1`'s optical axis.
pub(crate) fn ray_depth_interval(
    d1: &PinholeDevice,
    ray: &Ray,
    mv: &MeasurementVolume,
) -> Result<(f64, f64), GeometryError> {
    let dir = d1.pose().direction_to_device(&ray.direction);
    if !(dir.z > 0.0) {
        return Err(GeometryError::RayMissesVolume);
    }
    let slope_x = (dir.x / dir.z).abs();
    let slope_y = (dir.y / dir.z).abs();
    let near = mv.d_min;
    let mut far = mv.d_min + mv.mvd;
    if slope_x > 0.0 {
        far = far.min(0.5 * mv.mvw / slope_x);
    }
    if slope_y > 0.0 {
        far = far.min(0.5 * mv.mvh / slope_y);
    }
    if far < near {
        return Err(GeometryError::RayMissesVolume);
    }
    Ok((near, far))
}

/// Epipolar segment of `pixel` in `d2`, bounded by the measurement volume
/// depth slab and clipped to `d2`'s image rectangle.
pub fn epipolar_segment(
    d1: &PinholeDevice,
    d2: &PinholeDevice,
    pixel: &Point2<f64>,
    mv: &MeasurementVolume,
) -> Result<EpipolarSegment, GeometryError> {
    let ray = d1.back_project(pixel)?;
    epipolar_segment_for_ray(d1, d2, &ray, mv)
}

pub(crate) fn epipolar_segment_for_ray(
    d1: &PinholeDevice,
    d2: &PinholeDevice,
    ray: &Ray,
    mv: &MeasurementVolume,
) -> Result<EpipolarSegment, GeometryError> {
    if (d1.center() - d2.center()).norm() < 1e-9 {
        return Err(GeometryError::CoincidentCenters);
    }
    let (near, far) = ray_depth_interval(d1, ray, mv)?;
    let depth_per_unit = d1.pose().direction_to_device(&ray.direction).z;
    let inside = |depth: f64| -> Option<Point2<f64>> {
        let p = ray.at(depth / depth_per_unit);
        d2.project(&p).ok().filter(|px| d2.contains_pixel(px))
    };

    let (near, far) = if far - near <= 0.0 {
        if inside(near).is_none() {
            return Err(GeometryError::SegmentOutsideImage);
        }
        (near, near)
    } else {
        // Sample uniformly in inverse depth, which is close to uniform in the image.
        const SAMPLES: usize = 65;
        let inv_near = 1.0 / near;
        let inv_far = 1.0 / far;
        let depth_at = |i: usize| {
            let f = i as f64 / (SAMPLES - 1) as f64;
            1.0 / (inv_near + (inv_far - inv_near) * f)
        };
        let flags: Vec<bool> = (0..SAMPLES).map(|i| inside(depth_at(i)).is_some()).collect();
        let first = flags.iter().position(|&f| f).ok_or(GeometryError::SegmentOutsideImage)?;
        let last = flags.iter().rposition(|&f| f).unwrap_or(first);
        let refine = |mut inside_depth: f64, mut outside_depth: f64| {
            for _ in 0..60 {
                let mid = 0.5 * (inside_depth + outside_depth);
                if inside(mid).is_some() {
                    inside_depth = mid;
                } else {
                    outside_depth = mid;
                }
            }
            inside_depth
        };
        let lo = if first == 0 {
            near
        } else {
            refine(depth_at(first), depth_at(first - 1))
        };
        let hi = if last == SAMPLES - 1 {
            far
        } else {
            refine(depth_at(last), depth_at(last + 1))
        };
        (lo, hi)
    };

    let start = d2.project(&ray.at(near / depth_per_unit))?;
    let end = d2.project(&ray.at(far / depth_per_unit))?;
    Ok(EpipolarSegment {
        start,
        end,
        near_depth: near,
        far_depth: far,
        ray: *ray,
        depth_per_unit,
    })
}
