//! 3D-consistent mask refinement.
//!
//! Masked pixels of every view are lifted to 3D with the view's distance map
//! and scored by how many other views agree; low-scoring points and points
//! outside a sphere around the object are discarded; the survivors are
//! z-buffer splatted back into every view and cleaned up with a guided
//! filter steered by the view's image.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{depth_test, CameraView, DepthTolerance, ViewId};
use crate::guided::{guided_filter_refine, GuidedFilterParams};
use crate::raster::{nearest_pixel, Grid, Mask};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPoint {
    pub position: Point3<f64>,
    /// Fraction of views that see the point and agree it is object, in `[0, 1]`.
    pub score: f64,
    pub source_view: ViewId,
    /// `(x, y)` pixel the point was lifted from.
    pub source_pixel: (usize, usize),
}

pub type ScoredPointCloud = Vec<ScoredPoint>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePrior {
    pub center: [f64; 3],
    pub radius: f64,
}

impl SpherePrior {
    pub fn unbounded() -> Self {
        Self {
            center: [0.0; 3],
            radius: f64::INFINITY,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (p - Point3::from(self.center)).norm() <= self.radius
    }

    /// Centroid of the points scoring at least `tau`, with radius
    /// `2.5 x` their RMS distance to it. `None` if no point qualifies.
    pub fn from_cloud(cloud: &[ScoredPoint], tau: f64) -> Option<Self> {
        let kept: Vec<_> = cloud.iter().filter(|p| p.score >= tau).collect();
        if kept.is_empty() {
            return None;
        }
        let n = kept.len() as f64;
        let centroid = kept
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.position.coords)
            / n;
        let ms = kept
            .iter()
            .map(|p| (p.position.coords - centroid).norm_squared())
            .sum::<f64>()
            / n;
        Some(Self {
            center: [centroid.x, centroid.y, centroid.z],
            radius: 2.5 * ms.sqrt(),
        })
    }
}

/// Lifts every masked pixel and scores it against all views.
///
/// A view votes on a point only when the point projects into its frustum and
/// passes its depth test; the score is the fraction of voting views whose
/// initial mask contains the projection (nearest pixel). Points with no
/// voting view score 0.
pub fn lift_and_score(views: &[CameraView], tol: &DepthTolerance) -> Result<ScoredPointCloud> {
    tol.validate()?;
    for v in views {
        v.validate()?;
        v.distance()?;
        v.mask()?;
    }
    let mut cloud = Vec::new();
    for view in views {
        let dist = view.distance()?;
        let mask = view.mask()?;
        let center = view.camera.center();
        for (x, y, &inside) in mask.pixels() {
            if !inside {
                continue;
            }
            let d = *dist.get(x, y);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::data(format!(
                    "view {}: invalid distance {d} at pixel ({x}, {y})",
                    view.id
                )));
            }
            let position = center + view.camera.ray_world(x as f64, y as f64) * d;
            let score = score_point(&position, views, tol)?;
            cloud.push(ScoredPoint {
                position,
                score,
                source_view: view.id,
                source_pixel: (x, y),
            });
        }
    }
    Ok(cloud)
}

fn score_point(p: &Point3<f64>, views: &[CameraView], tol: &DepthTolerance) -> Result<f64> {
    let mut visible = 0usize;
    let mut agree = 0usize;
    for other in views {
        if let Some(s) = depth_test(&other.camera, other.distance()?, p, tol) {
            visible += 1;
            if other.mask()?.sample_nearest(s.u, s.v).unwrap_or(false) {
                agree += 1;
            }
        }
    }
    Ok(if visible == 0 {
        0.0
    } else {
        agree as f64 / visible as f64
    })
}

/// Keeps points with `score >= tau` inside `sphere`, sorted by source view
/// and then row-major source pixel.
pub fn prune_points(cloud: &[ScoredPoint], tau: f64, sphere: &SpherePrior) -> ScoredPointCloud {
    let mut kept: Vec<ScoredPoint> = cloud
        .iter()
        .filter(|p| p.score >= tau && sphere.contains(&p.position))
        .cloned()
        .collect();
    kept.sort_by_key(|p| (p.source_view, p.source_pixel.1, p.source_pixel.0));
    kept
}

/// Z-buffer splat of the cloud into each view with a 1-pixel footprint.
///
/// A pixel is set when the nearest point landing on it passes the view's
/// depth test, so points behind a closer surface never mark pixels.
pub fn splat_masks(cloud: &[ScoredPoint], views: &[CameraView], tol: &DepthTolerance) -> Result<Vec<Mask>> {
    tol.validate()?;
    views
        .iter()
        .map(|view| {
            let dist = view.distance()?;
            let cam = &view.camera;
            let mut zbuf = Grid::new(cam.width(), cam.height(), f64::INFINITY);
            for p in cloud {
                let Some(s) = depth_test(cam, dist, &p.position, tol) else {
                    continue;
                };
                let Some((x, y)) = nearest_pixel(cam.width(), cam.height(), s.u, s.v) else {
                    continue;
                };
                let z = zbuf.get_mut(x, y);
                if s.expected_distance < *z {
                    *z = s.expected_distance;
                }
            }
            Ok(zbuf.map(|z| z.is_finite()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub tau: f64,
    /// Explicit sphere prior; derived from the cloud when `None`.
    pub sphere: Option<SpherePrior>,
    /// Radius override for the derived sphere (center stays the centroid).
    pub sphere_radius: Option<f64>,
    pub tolerance: DepthTolerance,
    /// Radius of the square closing applied to splatted masks.
    pub closing_radius: usize,
    pub guided: GuidedFilterParams,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            sphere: None,
            sphere_radius: None,
            tolerance: DepthTolerance::default(),
            closing_radius: 1,
            guided: GuidedFilterParams::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if let Some(s) = &self.sphere {
            if !(s.radius > 0.0) {
                return Err(Error::config("sphere radius must be > 0"));
            }
        }
        if let Some(r) = self.sphere_radius {
            if !(r > 0.0) {
                return Err(Error::config("sphere radius must be > 0"));
            }
        }
        self.tolerance.validate()?;
        self.guided.validate()
    }
}

/// Final per-view masks and the intermediate products that produced them.
#[derive(Clone, Debug)]
pub struct RefinedMaskSet {
    pub cloud: ScoredPointCloud,
    pub pruned: ScoredPointCloud,
    pub sphere: Option<SpherePrior>,
    pub raw: Vec<Mask>,
    /// Guided filter output before thresholding.
    pub filtered: Vec<Grid<f64>>,
    pub masks: Vec<Mask>,
}

/// Runs lift, prune, splat, closing and guided filtering over all views.
pub fn refine_masks(views: &[CameraView], config: &RefineConfig) -> Result<RefinedMaskSet> {
    config.validate()?;
    let cloud = lift_and_score(views, &config.tolerance)?;
    let sphere = match config.sphere {
        Some(s) => Some(s),
        None => SpherePrior::from_cloud(&cloud, config.tau).map(|mut s| {
            if let Some(r) = config.sphere_radius {
                s.radius = r;
            }
            s
        }),
    };
    let pruned = match &sphere {
        Some(s) => prune_points(&cloud, config.tau, s),
        None => Vec::new(),
    };
    let raw = splat_masks(&pruned, views, &config.tolerance)?;
    let mut filtered = Vec::with_capacity(views.len());
    let mut masks = Vec::with_capacity(views.len());
    for (view, raw_mask) in views.iter().zip(&raw) {
        let closed = raw_mask.close(config.closing_radius);
        let (f, m) = guided_filter_refine(&closed.to_float(), &view.image, &config.guided)?;
        filtered.push(f);
        masks.push(m);
    }
    Ok(RefinedMaskSet {
        cloud,
        pruned,
        sphere,
        raw,
        filtered,
        masks,
    })
}
