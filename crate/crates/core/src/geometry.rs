//! Pinhole cameras, distance/depth/disparity conversions and depth-tested
//! backward warping between views.

use std::fmt;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Grid, Mask, RgbFloat, RgbImage};

/// Per-pixel distance along the viewing ray, in scene units.
pub type DistanceMap = Grid<f64>;
/// Per-pixel z-depth in the camera frame, in scene units.
pub type DepthMap = Grid<f64>;

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewId(pub u32);

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Calibrated pinhole camera without distortion.
///
/// `world_to_camera` maps world points into a frame with +X right, +Y down
/// and +Z forward.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Depth along the optical axis; negative behind the camera.
    pub z: f64,
    pub in_frustum: bool,
}

impl CameraModel {
    /// Builds a camera from intrinsics and a row-major 3x4 `[R | t]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        world_to_camera: [f64; 12],
    ) -> Result<Self> {
        let m = &world_to_camera;
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        Self::from_parts(fx, fy, cx, cy, width, height, rotation, translation)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::config(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::config("camera image size must be nonzero"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::config(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("camera extrinsics contain non-finite values"));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL {
            return Err(Error::config("camera rotation is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::config("camera rotation must have determinant +1"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction
    /// (image +Y points against it). `hfov_deg` is the horizontal field of view.
    /// The principal point is the image center.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
        hfov_deg: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::config("look_at: eye and target coincide"));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::config("look_at: viewing direction parallel to up vector"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        // Re-orthonormalize to keep the invariant checks tight.
        let rotation = Rotation3::from_matrix(&rotation).into_inner();
        let translation = -(rotation * eye.coords);
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::from_parts(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            rotation,
            translation,
        )
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Row-major `[R | t]`.
    pub fn world_to_camera(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn world_to_cam(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    /// Unit ray through pixel `(u, v)` in camera coordinates.
    pub fn ray_camera(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }

    /// Unit ray through pixel `(u, v)` in world coordinates.
    pub fn ray_world(&self, u: f64, v: f64) -> Vector3<f64> {
        self.rotation.transpose() * self.ray_camera(u, v)
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// World point at ray distance `dist` through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, dist: f64) -> Result<Point3<f64>> {
        if !self.contains_pixel(u, v) {
            return Err(Error::Argument(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                self.width, self.height
            )));
        }
        if !(dist > 0.0 && dist.is_finite()) {
            return Err(Error::Argument(format!("distance must be positive, got {dist}")));
        }
        Ok(self.unproject_unchecked(u, v, dist))
    }

    #[inline]
    pub(crate) fn unproject_unchecked(&self, u: f64, v: f64, dist: f64) -> Point3<f64> {
        self.center() + self.ray_world(u, v) * dist
    }

    pub fn project(&self, p: &Point3<f64>) -> Projection {
        let pc = self.world_to_cam(p);
        let z = pc.z;
        let u = snap(self.fx * pc.x / z + self.cx);
        let v = snap(self.fy * pc.y / z + self.cy);
        let in_frustum = z > 0.0 && self.contains_pixel(u, v);
        Projection { u, v, z, in_frustum }
    }
}

// Round-trip roundoff must not push a border pixel center out of the image.
fn snap(c: f64) -> f64 {
    let r = c.round();
    if (c - r).abs() < 1e-9 {
        r
    } else {
        c
    }
}

/// Combined depth-test tolerance: a sample passes when
/// `|sampled - expected| <= abs + rel * expected`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for DepthTolerance {
    fn default() -> Self {
        Self { abs: 1e-3, rel: 0.01 }
    }
}

impl DepthTolerance {
    pub fn validate(&self) -> Result<()> {
        if self.abs > 0.0 && self.rel >= 0.0 && self.abs.is_finite() && self.rel.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "depth tolerance must be positive, got abs={} rel={}",
                self.abs, self.rel
            )))
        }
    }

    #[inline]
    pub fn accepts(&self, expected: f64, sampled: f64) -> bool {
        (sampled - expected).abs() <= self.abs + self.rel * expected
    }
}

/// One input frame: camera, image, ray-distance map and object mask.
#[derive(Clone, Debug)]
pub struct CameraView {
    pub id: ViewId,
    pub camera: CameraModel,
    pub image: RgbImage,
    pub distance: Option<DistanceMap>,
    pub mask: Option<Mask>,
}

impl CameraView {
    pub fn distance(&self) -> Result<&DistanceMap> {
        self.distance
            .as_ref()
            .ok_or_else(|| Error::data(format!("view {}: missing distance map", self.id)))
    }

    pub fn mask(&self) -> Result<&Mask> {
        self.mask
            .as_ref()
            .ok_or_else(|| Error::data(format!("view {}: missing mask", self.id)))
    }

    /// Checks raster dimensions against the camera.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.camera.width(), self.camera.height());
        let check = |what: &str, dims: (usize, usize)| {
            if dims != (w, h) {
                Err(Error::config(format!(
                    "view {}: {what} is {}x{}, camera is {w}x{h}",
                    self.id, dims.0, dims.1
                )))
            } else {
                Ok(())
            }
        };
        check("image", self.image.dims())?;
        if let Some(d) = &self.distance {
            check("distance map", d.dims())?;
        }
        if let Some(m) = &self.mask {
            check("mask", m.dims())?;
        }
        Ok(())
    }
}

/// Checks that a distance map is finite and positive everywhere.
pub fn validate_distance(dist: &DistanceMap) -> Result<()> {
    for (x, y, &d) in dist.pixels() {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::data(format!("invalid distance {d} at pixel ({x}, {y})")));
        }
    }
    Ok(())
}

/// Projects ray distances onto the optical axis: `depth = dist * cos(theta)`.
pub fn distance_to_depth(dist: &DistanceMap, cam: &CameraModel) -> Result<DepthMap> {
    check_camera_dims(dist, cam, "distance map")?;
    validate_distance(dist)?;
    Ok(Grid::from_fn(dist.width(), dist.height(), |x, y| {
        dist.get(x, y) * cam.ray_camera(x as f64, y as f64).z
    }))
}

/// Inverse of [`distance_to_depth`].
pub fn depth_to_distance(depth: &DepthMap, cam: &CameraModel) -> Result<DistanceMap> {
    check_camera_dims(depth, cam, "depth map")?;
    for (x, y, &d) in depth.pixels() {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::data(format!("invalid depth {d} at pixel ({x}, {y})")));
        }
    }
    Ok(Grid::from_fn(depth.width(), depth.height(), |x, y| {
        depth.get(x, y) / cam.ray_camera(x as f64, y as f64).z
    }))
}

fn check_camera_dims<T>(g: &Grid<T>, cam: &CameraModel, what: &str) -> Result<()> {
    if g.dims() != (cam.width(), cam.height()) {
        return Err(Error::config(format!(
            "{what} is {}x{}, camera is {}x{}",
            g.width(),
            g.height(),
            cam.width(),
            cam.height()
        )));
    }
    Ok(())
}

/// Default additive constant in `1 / (depth + delta)`.
pub const DEFAULT_DISPARITY_DELTA: f64 = 1e-6;

/// Inverse depth, together with the additive constant used to produce it.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    pub values: Grid<f64>,
    pub delta: f64,
}

impl DisparityMap {
    /// Min-max normalized copy (min -> 0, max -> 1). Statistics are taken
    /// over `region` when given, values outside are clamped into `[0, 1]`.
    /// A constant map normalizes to all zeros.
    pub fn normalized(&self, region: Option<&Mask>) -> Grid<f64> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &v) in self.values.data().iter().enumerate() {
            if region.is_none_or(|m| m.data()[i]) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let range = hi - lo;
        if !(range > 0.0) {
            return self.values.map(|_| 0.0);
        }
        self.values.map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
    }
}

/// `disparity = 1 / (clamp(depth) + delta)`.
pub fn depth_to_disparity(depth: &DepthMap, delta: f64, clamp: Option<(f64, f64)>) -> Result<DisparityMap> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("disparity delta must be >= 0, got {delta}")));
    }
    if let Some((lo, hi)) = clamp {
        if !(lo < hi) {
            return Err(Error::config(format!("depth clamp range [{lo}, {hi}] is empty")));
        }
    }
    let values = depth.map(|&d| {
        let d = match clamp {
            Some((lo, hi)) => d.clamp(lo, hi),
            None => d,
        };
        1.0 / (d + delta)
    });
    Ok(DisparityMap { values, delta })
}

/// Where a destination point lands in a source view that sees it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpSample {
    pub u: f64,
    pub v: f64,
    /// Distance from the source camera to the destination surface point.
    pub expected_distance: f64,
    /// Bilinear sample of the source distance map at `(u, v)`.
    pub sampled_distance: f64,
}

/// Depth test of a world point against a view: projects it, samples the
/// view's distance map bilinearly and compares with the point's distance
/// from the camera center.
pub fn depth_test(
    cam: &CameraModel,
    dist: &DistanceMap,
    point: &Point3<f64>,
    tol: &DepthTolerance,
) -> Option<WarpSample> {
    let proj = cam.project(point);
    if !proj.in_frustum {
        return None;
    }
    let sampled = dist.sample_bilinear(proj.u, proj.v)?;
    let expected = (point - cam.center()).norm();
    tol.accepts(expected, sampled).then_some(WarpSample {
        u: proj.u,
        v: proj.v,
        expected_distance: expected,
        sampled_distance: sampled,
    })
}

/// For every destination pixel, the source location that sees the same
/// surface point, or `None` when it is outside the source frustum or fails
/// the depth test.
pub fn warp_correspondences(
    src_cam: &CameraModel,
    src_dist: &DistanceMap,
    dst_cam: &CameraModel,
    dst_dist: &DistanceMap,
    tol: &DepthTolerance,
) -> Result<Grid<Option<WarpSample>>> {
    tol.validate()?;
    check_camera_dims(src_dist, src_cam, "source distance map")?;
    check_camera_dims(dst_dist, dst_cam, "destination distance map")?;
    let dst_center = dst_cam.center();
    Ok(Grid::from_fn(dst_cam.width(), dst_cam.height(), |x, y| {
        let d = *dst_dist.get(x, y);
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let p = dst_center + dst_cam.ray_world(x as f64, y as f64) * d;
        depth_test(src_cam, src_dist, &p, tol)
    }))
}

/// Result of warping a source view into a destination camera.
#[derive(Clone, Debug)]
pub struct Reprojection {
    /// Source colors resampled onto the destination grid; zero where not visible.
    pub image: RgbFloat,
    pub visibility: Mask,
}

/// Backward warp of `src` into `dst_cam`, using the destination distances to
/// place each destination pixel in 3D.
pub fn reproject_view(
    src: &CameraView,
    dst_cam: &CameraModel,
    dst_dist: &DistanceMap,
    tol: &DepthTolerance,
) -> Result<Reprojection> {
    let src_dist = src.distance()?;
    ensure_same_dims(&src.image, src_dist, "source image vs distance map")?;
    let corr = warp_correspondences(&src.camera, src_dist, dst_cam, dst_dist, tol)?;
    let image = corr.map(|s| match s {
        Some(s) => src.image.sample_bilinear(s.u, s.v).unwrap_or([0.0; 3]),
        None => [0.0; 3],
    });
    let visibility = corr.map(|s| s.is_some());
    Ok(Reprojection { image, visibility })
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: [f64; 12] = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];

    fn identity_camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 32.0, 24.0, 64, 48, IDENTITY).unwrap()
    }

    #[test]
    fn rejects_bad_intrinsics_and_rotation() {
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 4, 4, IDENTITY).is_err());
        assert!(CameraModel::new(1.0, 1.0, 4.0, 1.0, 4, 4, IDENTITY).is_err());
        let mut scaled = IDENTITY;
        scaled[0] = 2.0;
        assert!(CameraModel::new(1.0, 1.0, 1.0, 1.0, 4, 4, scaled).is_err());
        let mut reflect = IDENTITY;
        reflect[0] = -1.0;
        assert!(CameraModel::new(1.0, 1.0, 1.0, 1.0, 4, 4, reflect).is_err());
    }

    #[test]
    fn world_to_camera_round_trips() {
        let cam = CameraModel::look_at(
            Point3::new(1.0, -2.0, 3.0),
            Point3::origin(),
            Vector3::z(),
            60.0,
            32,
            24,
        )
        .unwrap();
        let again = CameraModel::new(cam.fx(), cam.fy(), cam.cx(), cam.cy(), 32, 24, cam.world_to_camera()).unwrap();
        assert_eq!(cam, again);
        assert!((cam.center() - Point3::new(1.0, -2.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn look_at_points_forward_and_down() {
        let cam = CameraModel::look_at(
            Point3::new(0.0, -4.0, 0.0),
            Point3::origin(),
            Vector3::z(),
            60.0,
            32,
            24,
        )
        .unwrap();
        let ahead = cam.project(&Point3::origin());
        assert!(ahead.in_frustum);
        assert!((ahead.u - cam.cx()).abs() < 1e-9 && (ahead.z - 4.0).abs() < 1e-12);
        // World up maps to image up (smaller v).
        let above = cam.project(&Point3::new(0.0, 0.0, 0.5));
        assert!(above.v < cam.cy());
        let right = cam.project(&Point3::new(0.5, 0.0, 0.0));
        assert!(right.u > cam.cx());
    }

    #[test]
    fn principal_ray_depth_equals_distance() {
        let cam = identity_camera();
        let dist = Grid::new(64, 48, 2.0);
        let depth = distance_to_depth(&dist, &cam).unwrap();
        assert_eq!(*depth.get(32, 24), 2.0);
    }

    #[test]
    fn off_axis_depth_uses_ray_cosine() {
        // Ray (0.75, 0, 1) has unit z-component 0.8.
        let cam = CameraModel::new(100.0, 100.0, 32.0, 24.0, 200, 48, IDENTITY).unwrap();
        let dist = Grid::new(200, 48, 5.0);
        let depth = distance_to_depth(&dist, &cam).unwrap();
        assert!((depth.get(107, 24) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_depth_reports_bad_pixel() {
        let cam = identity_camera();
        let mut dist = Grid::new(64, 48, 1.0);
        dist.set(5, 7, f64::NAN);
        let err = distance_to_depth(&dist, &cam).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("(5, 7)"));
        let small = Grid::new(3, 3, 1.0);
        assert!(matches!(distance_to_depth(&small, &cam), Err(Error::Config(_))));
    }

    #[test]
    fn disparity_examples() {
        let depth = Grid::new(2, 1, 1.0);
        let disp = depth_to_disparity(&depth, 0.0, None).unwrap();
        assert_eq!(disp.values.data(), &[1.0, 1.0]);

        let depth = Grid::from_vec(2, 1, vec![0.5, 8.0]).unwrap();
        let disp = depth_to_disparity(&depth, 1e-6, Some((1.0, 5.0))).unwrap();
        assert_eq!(disp.values.data()[0], 1.0 / (1.0 + 1e-6));
        assert_eq!(disp.values.data()[1], 1.0 / (5.0 + 1e-6));

        assert!(depth_to_disparity(&depth, 0.0, Some((5.0, 1.0))).is_err());
        assert!(depth_to_disparity(&depth, -1.0, None).is_err());
    }

    #[test]
    fn constant_depth_normalizes_to_zero() {
        let depth = Grid::new(4, 4, 3.0);
        let disp = depth_to_disparity(&depth, DEFAULT_DISPARITY_DELTA, None).unwrap();
        assert!(disp.normalized(None).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalized_disparity_spans_unit_range() {
        let depth = Grid::from_vec(3, 1, vec![1.0, 2.0, 4.0]).unwrap();
        let n = depth_to_disparity(&depth, 0.0, None).unwrap().normalized(None);
        assert_eq!(n.data(), &[1.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn unproject_axis_pixel() {
        let cam = identity_camera();
        let p = cam.unproject(32.0, 24.0, 3.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 3.0));
        assert!(matches!(cam.unproject(64.0, 0.0, 1.0), Err(Error::Argument(_))));
        assert!(cam.unproject(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn project_axis_and_behind() {
        let cam = identity_camera();
        let p = cam.project(&Point3::new(0.0, 0.0, 2.0));
        assert_eq!((p.u, p.v, p.z, p.in_frustum), (32.0, 24.0, 2.0, true));
        assert!(!cam.project(&Point3::new(0.0, 0.0, -2.0)).in_frustum);
    }

    #[test]
    fn self_warp_is_identity() {
        let cam = identity_camera();
        let dist = Grid::from_fn(64, 48, |x, y| 2.0 + 0.01 * x as f64 + 0.02 * y as f64);
        let image = Grid::from_fn(64, 48, |x, y| [(x * 3) as u8, (y * 5) as u8, ((x + y) % 256) as u8]);
        let view = CameraView {
            id: ViewId(0),
            camera: cam.clone(),
            image: image.clone(),
            distance: Some(dist.clone()),
            mask: None,
        };
        let r = reproject_view(&view, &cam, &dist, &DepthTolerance::default()).unwrap();
        assert!(r.visibility.data().iter().all(|&b| b));
        assert_eq!(r.image.to_u8(), image);
    }

    #[test]
    fn reproject_requires_distance() {
        let cam = identity_camera();
        let view = CameraView {
            id: ViewId(3),
            camera: cam.clone(),
            image: Grid::new(64, 48, [0; 3]),
            distance: None,
            mask: None,
        };
        let err = reproject_view(&view, &cam, &Grid::new(64, 48, 1.0), &DepthTolerance::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn tolerance_combines_abs_and_rel() {
        let tol = DepthTolerance { abs: 0.1, rel: 0.01 };
        assert!(tol.accepts(10.0, 10.2));
        assert!(!tol.accepts(10.0, 10.21));
        assert!(DepthTolerance { abs: 0.0, rel: 0.1 }.validate().is_err());
    }
}
