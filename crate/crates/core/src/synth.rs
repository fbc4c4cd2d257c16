//! Analytic test scenes: a textured plane, optionally with a sphere above it,
//! seen from an arc of cameras. Colors, ray distances and object masks are
//! computed exactly by ray casting, so every geometric stage can be checked
//! against closed-form answers.

use nalgebra::{Matrix2, Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, CameraView, ViewId};
use crate::raster::{bilinear_taps, Grid, Mask, RgbFloat, RgbImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    /// Checker cell size in scene units.
    pub checker_size: f64,
    pub colors: [[u8; 3]; 2],
    /// Hash-noise cell size in scene units.
    pub noise_cell: f64,
    /// Peak noise amplitude in 8-bit levels.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            checker_size: 0.5,
            colors: [[60, 70, 95], [120, 105, 80]],
            noise_cell: 0.05,
            noise_amplitude: 14.0,
            seed: 1,
        }
    }
}

/// Plane `{x : normal . x = offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub normal: [f64; 3],
    pub offset: f64,
    pub texture: TextureSpec,
}

impl Default for PlaneSpec {
    fn default() -> Self {
        Self {
            normal: [0.0, 0.0, 1.0],
            offset: 0.0,
            texture: TextureSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub albedo: [u8; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Plane { plane: PlaneSpec },
    SphereOverPlane { sphere: SphereSpec, plane: PlaneSpec },
}

impl GeometrySpec {
    pub fn plane(&self) -> &PlaneSpec {
        match self {
            GeometrySpec::Plane { plane } | GeometrySpec::SphereOverPlane { plane, .. } => plane,
        }
    }

    pub fn sphere(&self) -> Option<&SphereSpec> {
        match self {
            GeometrySpec::Plane { .. } => None,
            GeometrySpec::SphereOverPlane { sphere, .. } => Some(sphere),
        }
    }
}

/// Cameras on a horizontal arc around `look_at`, all looking at it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub count: usize,
    /// Distance from each camera to `look_at`.
    pub radius: f64,
    pub look_at: [f64; 3],
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    /// Total azimuth span of the arc in degrees.
    pub arc_deg: f64,
    /// Camera elevation above the look-at point in degrees.
    pub elevation_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for ArcSpec {
    fn default() -> Self {
        Self {
            count: 8,
            radius: 4.0,
            look_at: [0.0, 0.0, 0.0],
            fov_deg: 50.0,
            arc_deg: 60.0,
            elevation_deg: 50.0,
            width: 160,
            height: 120,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskObject {
    /// Painted disk lying on the plane.
    Disk {
        center: [f64; 3],
        radius: f64,
        color: [u8; 3],
    },
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub view: ViewId,
    pub px: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    #[serde(default)]
    pub dilate: Vec<Perturbation>,
    #[serde(default)]
    pub erode: Vec<Perturbation>,
    #[serde(default)]
    pub drop: Vec<ViewId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub geometry: GeometrySpec,
    pub cameras: ArcSpec,
    pub mask_object: MaskObject,
    #[serde(default)]
    pub corruption: Option<Corruption>,
}

impl SceneSpec {
    /// Textured plane with a painted disk, seen from `count` arc cameras.
    pub fn plane_disk(count: usize) -> Self {
        Self {
            geometry: GeometrySpec::Plane {
                plane: PlaneSpec::default(),
            },
            cameras: ArcSpec {
                count,
                ..ArcSpec::default()
            },
            mask_object: MaskObject::Disk {
                center: [0.0, 0.0, 0.0],
                radius: 0.6,
                color: [250, 225, 110],
            },
            corruption: None,
        }
    }

    /// Sphere resting above a textured plane; the sphere is the object.
    pub fn sphere_over_plane(count: usize) -> Self {
        Self {
            geometry: GeometrySpec::SphereOverPlane {
                sphere: SphereSpec {
                    center: [0.0, 0.0, 0.45],
                    radius: 0.4,
                    albedo: [235, 205, 70],
                },
                plane: PlaneSpec::default(),
            },
            cameras: ArcSpec {
                count,
                ..ArcSpec::default()
            },
            mask_object: MaskObject::Sphere,
            corruption: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.cameras;
        if c.count < 1 {
            return Err(Error::config("scene needs at least one camera"));
        }
        if !(c.fov_deg > 10.0 && c.fov_deg < 120.0) {
            return Err(Error::config(format!("fov {} outside (10, 120) degrees", c.fov_deg)));
        }
        if !(c.radius > 0.0) || c.width == 0 || c.height == 0 {
            return Err(Error::config("arc radius and image size must be positive"));
        }
        let n = Vector3::from(self.geometry.plane().normal);
        if n.norm() < 1e-12 {
            return Err(Error::config("plane normal must be nonzero"));
        }
        let t = &self.geometry.plane().texture;
        if !(t.checker_size > 0.0 && t.noise_cell > 0.0 && t.noise_amplitude >= 0.0) {
            return Err(Error::config("texture sizes must be positive"));
        }
        if let Some(s) = self.geometry.sphere() {
            if !(s.radius > 0.0) {
                return Err(Error::config("sphere radius must be positive"));
            }
        } else if matches!(self.mask_object, MaskObject::Sphere) {
            return Err(Error::config("mask object is a sphere but the scene has none"));
        }
        if let MaskObject::Disk { radius, .. } = self.mask_object {
            if !(radius > 0.0) {
                return Err(Error::config("disk radius must be positive"));
            }
        }
        Ok(())
    }

    pub fn cameras(&self) -> Result<Vec<CameraModel>> {
        let c = &self.cameras;
        let target = Point3::from(c.look_at);
        let el = c.elevation_deg.to_radians();
        (0..c.count)
            .map(|i| {
                let az = if c.count == 1 {
                    0.0
                } else {
                    (-c.arc_deg / 2.0 + c.arc_deg * i as f64 / (c.count - 1) as f64).to_radians()
                };
                let dir = Vector3::new(el.cos() * az.sin(), -el.cos() * az.cos(), el.sin());
                CameraModel::look_at(
                    target + dir * c.radius,
                    target,
                    Vector3::z(),
                    c.fov_deg,
                    c.width,
                    c.height,
                )
            })
            .collect()
    }
}

/// Rendered views (masks are the exact object masks) and their ground truth.
#[derive(Clone, Debug)]
pub struct RenderedScene {
    pub views: Vec<CameraView>,
    pub gt_masks: Vec<Mask>,
    pub gt_distances: Vec<Grid<f64>>,
}

/// Sub-pixel rays per axis when shading; depth and masks use the center ray.
const SUPERSAMPLE: usize = 4;

enum Hit {
    Plane(Point3<f64>),
    Sphere,
}

struct Tracer<'a> {
    spec: &'a SceneSpec,
    normal: Vector3<f64>,
    offset: f64,
    basis: (Vector3<f64>, Vector3<f64>),
}

impl<'a> Tracer<'a> {
    fn new(spec: &'a SceneSpec) -> Self {
        let plane = spec.geometry.plane();
        let raw = Vector3::from(plane.normal);
        let normal = raw.normalize();
        let offset = plane.offset / raw.norm();
        Self {
            spec,
            normal,
            offset,
            basis: plane_basis(&normal),
        }
    }

    fn trace(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, Hit)> {
        let mut best: Option<(f64, Hit)> = None;
        let denom = self.normal.dot(dir);
        if denom.abs() > 1e-12 {
            let t = (self.offset - self.normal.dot(&origin.coords)) / denom;
            if t > 1e-9 {
                best = Some((t, Hit::Plane(origin + dir * t)));
            }
        }
        if let Some(s) = self.spec.geometry.sphere() {
            if let Some(t) = ray_sphere(origin, dir, &Point3::from(s.center), s.radius) {
                if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best = Some((t, Hit::Sphere));
                }
            }
        }
        best
    }

    /// Box-filtered color over a `SUPERSAMPLE^2` grid of sub-pixel rays.
    fn pixel_color(&self, cam: &CameraModel, x: usize, y: usize) -> [u8; 3] {
        let origin = cam.center();
        let mut sum = [0.0; 3];
        let mut n = 0.0;
        for j in 0..SUPERSAMPLE {
            for i in 0..SUPERSAMPLE {
                let du = (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                let dv = (j as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                let dir = cam.ray_world(x as f64 + du, y as f64 + dv);
                let Some((_, hit)) = self.trace(&origin, &dir) else {
                    continue;
                };
                let c = match &hit {
                    Hit::Plane(p) => self.plane_color(p),
                    Hit::Sphere => self
                        .spec
                        .geometry
                        .sphere()
                        .map(|s| s.albedo.map(f64::from))
                        .unwrap_or_default(),
                };
                for k in 0..3 {
                    sum[k] += c[k];
                }
                n += 1.0;
            }
        }
        sum.map(|c| (c / n).round().clamp(0.0, 255.0) as u8)
    }

    fn plane_color(&self, p: &Point3<f64>) -> [f64; 3] {
        let tex = &self.spec.geometry.plane().texture;
        let s = p.coords.dot(&self.basis.0);
        let t = p.coords.dot(&self.basis.1);
        let cell = ((s / tex.checker_size).floor() as i64 + (t / tex.checker_size).floor() as i64).rem_euclid(2);
        let mut base = tex.colors[cell as usize];
        if let MaskObject::Disk { center, radius, color } = &self.spec.mask_object {
            if (p - Point3::from(*center)).norm() <= *radius {
                base = *color;
            }
        }
        let noise = value_noise(s / tex.noise_cell, t / tex.noise_cell, tex.seed) * tex.noise_amplitude;
        base.map(|c| c as f64 + noise)
    }

    fn in_object(&self, hit: &Hit) -> bool {
        match (&self.spec.mask_object, hit) {
            (MaskObject::Sphere, Hit::Sphere) => true,
            (MaskObject::Disk { center, radius, .. }, Hit::Plane(p)) => (p - Point3::from(*center)).norm() <= *radius,
            _ => false,
        }
    }
}

/// Lattice values in `[-1, 1]` interpolated bilinearly, so the texture stays
/// continuous and resampling it is well behaved.
fn value_noise(s: f64, t: f64, seed: u64) -> f64 {
    let (i, j) = (s.floor(), t.floor());
    let (fs, ft) = (s - i, t - j);
    let at = |di: i64, dj: i64| {
        let h = hash3(i as i64 + di, j as i64 + dj, seed);
        (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let top = at(0, 0) * (1.0 - fs) + at(1, 0) * fs;
    let bottom = at(0, 1) * (1.0 - fs) + at(1, 1) * fs;
    top * (1.0 - ft) + bottom * ft
}

fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    (e1, n.cross(&e1))
}

/// Nearest positive intersection of a unit-direction ray with a sphere.
pub fn ray_sphere(origin: &Point3<f64>, dir: &Vector3<f64>, center: &Point3<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > 1e-9 {
        Some(t0)
    } else if t1 > 1e-9 {
        Some(t1)
    } else {
        None
    }
}

// SplitMix64 finalizer over the cell coordinates.
fn hash3(a: i64, b: i64, seed: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((a as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((b as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ray casts every camera of the spec. Masks on the returned views are the
/// exact object masks; apply [`corrupt_masks`] for perturbed inputs.
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let tracer = Tracer::new(spec);
    let cameras = spec.cameras()?;
    let mut views = Vec::with_capacity(cameras.len());
    let mut gt_masks = Vec::with_capacity(cameras.len());
    let mut gt_distances = Vec::with_capacity(cameras.len());
    for (i, cam) in cameras.into_iter().enumerate() {
        let origin = cam.center();
        if let Some(s) = spec.geometry.sphere() {
            if (origin - Point3::from(s.center)).norm() <= s.radius {
                return Err(Error::config(format!("camera {i} is inside the sphere")));
            }
        }
        let (w, h) = (cam.width(), cam.height());
        let mut image = RgbImage::new(w, h, [0; 3]);
        let mut mask = Mask::new(w, h, false);
        let mut dist = Grid::new(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                let dir = cam.ray_world(x as f64, y as f64);
                let (t, hit) = tracer.trace(&origin, &dir).ok_or_else(|| {
                    Error::config(format!("camera {i}: ray through pixel ({x}, {y}) misses the scene"))
                })?;
                dist.set(x, y, t);
                mask.set(x, y, tracer.in_object(&hit));
                image.set(x, y, tracer.pixel_color(&cam, x, y));
            }
        }
        views.push(CameraView {
            id: ViewId(i as u32),
            camera: cam,
            image,
            distance: Some(dist.clone()),
            mask: Some(mask.clone()),
        });
        gt_masks.push(mask);
        gt_distances.push(dist);
    }
    Ok(RenderedScene {
        views,
        gt_masks,
        gt_distances,
    })
}

/// Applies dilations, erosions (square structuring elements) and drops.
pub fn corrupt_masks(views: &[CameraView], corruption: &Corruption) -> Vec<CameraView> {
    let mut out = views.to_vec();
    for v in &mut out {
        let Some(mask) = v.mask.as_mut() else { continue };
        for p in corruption.dilate.iter().filter(|p| p.view == v.id) {
            *mask = mask.dilate(p.px);
        }
        for p in corruption.erode.iter().filter(|p| p.view == v.id) {
            *mask = mask.erode(p.px);
        }
        if corruption.drop.contains(&v.id) {
            *mask = Mask::new(mask.width(), mask.height(), false);
        }
    }
    out
}

/// Local stretch ratio above which a homography pair is considered too
/// oblique to compare against resampled warps.
pub const ANISOTROPY_LIMIT: f64 = 10.0;

/// Plane-induced homography mapping pixels of camera `a` to camera `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Homography {
    pub matrix: Matrix3<f64>,
    /// Ratio of singular values of the warp Jacobian at the image center of `a`.
    pub anisotropy: f64,
}

impl Homography {
    pub fn is_extreme(&self) -> bool {
        !(self.anisotropy <= ANISOTROPY_LIMIT)
    }

    pub fn apply(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let p = self.matrix * Vector3::new(u, v, 1.0);
        (p.z > 0.0).then(|| (p.x / p.z, p.y / p.z))
    }

    /// Resamples `src` (an image of camera `b`) onto a `width x height` grid
    /// of camera `a` with the bilinear sampler. Pixels mapping outside `src`
    /// are zero and flagged invalid.
    pub fn warp(&self, src: &RgbImage, width: usize, height: usize) -> (RgbFloat, Mask) {
        let samples = Grid::from_fn(width, height, |x, y| {
            self.apply(x as f64, y as f64).and_then(|(u, v)| {
                bilinear_taps(src.width(), src.height(), u, v).map(|_| src.sample_bilinear(u, v).unwrap())
            })
        });
        (samples.map(|s| s.unwrap_or([0.0; 3])), samples.map(|s| s.is_some()))
    }
}

/// `H = K_b (R + t n^T / d) K_a^-1` with `(R, t)` the pose of `b` relative
/// to `a` and the plane written as `n^T X_a = d` in `a`'s frame.
pub fn homography_oracle(plane: &PlaneSpec, cam_a: &CameraModel, cam_b: &CameraModel) -> Result<Homography> {
    let raw = Vector3::from(plane.normal);
    if raw.norm() < 1e-12 {
        return Err(Error::config("plane normal must be nonzero"));
    }
    let n_w = raw.normalize();
    let offset = plane.offset / raw.norm();
    let plane_in = |cam: &CameraModel| {
        let n = cam.rotation() * n_w;
        (n, offset + n.dot(cam.translation()))
    };
    let (n_a, d_a) = plane_in(cam_a);
    let (_, d_b) = plane_in(cam_b);
    if d_a.abs() < 1e-9 || d_b.abs() < 1e-9 {
        return Err(Error::config("plane passes through a camera center"));
    }
    let r = cam_b.rotation() * cam_a.rotation().transpose();
    let t = cam_b.translation() - r * cam_a.translation();
    let k_a_inv = cam_a
        .intrinsic_matrix()
        .try_inverse()
        .ok_or_else(|| Error::config("singular intrinsics"))?;
    let matrix = cam_b.intrinsic_matrix() * (r + t * n_a.transpose() / d_a) * k_a_inv;

    let (u0, v0) = (cam_a.cx(), cam_a.cy());
    let p = matrix * Vector3::new(u0, v0, 1.0);
    let jac = Matrix2::new(
        (matrix[(0, 0)] * p.z - matrix[(2, 0)] * p.x) / (p.z * p.z),
        (matrix[(0, 1)] * p.z - matrix[(2, 1)] * p.x) / (p.z * p.z),
        (matrix[(1, 0)] * p.z - matrix[(2, 0)] * p.y) / (p.z * p.z),
        (matrix[(1, 1)] * p.z - matrix[(2, 1)] * p.y) / (p.z * p.z),
    );
    let sv = jac.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let anisotropy = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(Homography { matrix, anisotropy })
}
