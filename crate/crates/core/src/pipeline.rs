//! Edit propagation across views.
//!
//! The reference view is edited with a plain full-mask schedule. Every later
//! view receives the already edited views warped into it: pixels that are
//! visible from an edited source start from the warped colors and are kept
//! out of the inpainting mask for the first `N` of `T` denoising steps, the
//! rest of the object mask is inpainted throughout.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::backend::{
    enforce_outside_region, EditRequest, EditorBackend, DEFAULT_CONTROL_SCALE, DEFAULT_GUIDANCE, DEFAULT_NOISE_STRENGTH,
};
use crate::codec::{write_png_mask, write_png_rgb};
use crate::error::{Error, Result};
use crate::geometry::{
    depth_test, depth_to_disparity, distance_to_depth, warp_correspondences, CameraView, DepthTolerance, ViewId,
    DEFAULT_DISPARITY_DELTA,
};
use crate::raster::{quantize_unit, Grid, Mask, RgbFloat, RgbImage};
use crate::scene::{artifact_name, OutputDir, SceneManifest, SCHEMA_VERSION};
use crate::schedule::{build_hybrid_schedule, MaskSchedule};

pub const DEFAULT_TOTAL_STEPS: usize = 20;
pub const DEFAULT_PRESERVE_STEPS: usize = 5;
pub const DEFAULT_MAX_VIEWS: usize = 100;

fn find(views: &[CameraView], id: ViewId) -> Result<&CameraView> {
    views
        .iter()
        .find(|v| v.id == id)
        .ok_or_else(|| Error::config(format!("view {id} not in scene")))
}

/// Number of masked pixels of `from` that land inside `to`'s frustum and pass
/// its depth test.
pub fn backprojected_count(from: &CameraView, to: &CameraView, tol: &DepthTolerance) -> Result<usize> {
    let dist = from.distance()?;
    let mask = from.mask()?;
    let to_dist = to.distance()?;
    let mut count = 0;
    for (x, y, &m) in mask.pixels() {
        let d = *dist.get(x, y);
        if !m || !(d > 0.0 && d.is_finite()) {
            continue;
        }
        let p = from.camera.unproject_unchecked(x as f64, y as f64, d);
        if depth_test(&to.camera, to_dist, &p, tol).is_some() {
            count += 1;
        }
    }
    Ok(count)
}

/// Greedy view order starting at `reference`: the next view is the remaining
/// one receiving the most masked pixels of the current view, ties going to
/// the smaller id. Stops after `limit` views when given.
pub fn order_views_limited(
    views: &[CameraView],
    reference: ViewId,
    tol: &DepthTolerance,
    limit: Option<usize>,
) -> Result<Vec<ViewId>> {
    tol.validate()?;
    let ids: BTreeSet<ViewId> = views.iter().map(|v| v.id).collect();
    if ids.len() != views.len() {
        return Err(Error::config("duplicate view ids"));
    }
    let first = find(views, reference)?;
    if !first.mask()?.any() {
        return Err(Error::config(format!("reference view {reference} has an empty mask")));
    }
    for v in views {
        v.validate()?;
    }
    let limit = limit.unwrap_or(views.len()).min(views.len());
    let mut order = vec![reference];
    let mut remaining: Vec<&CameraView> = views.iter().filter(|v| v.id != reference).collect();
    remaining.sort_by_key(|v| v.id);
    let mut current = first;
    while order.len() < limit && !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, cand) in remaining.iter().enumerate() {
            let c = backprojected_count(current, cand, tol)?;
            // `remaining` is sorted by id, so strict `>` keeps the smaller id on ties.
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((i, c));
            }
        }
        let (i, c) = best.expect("remaining is nonempty");
        let next = remaining.remove(i);
        debug!("order: {} -> {} ({c} back-projected pixels)", current.id, next.id);
        order.push(next.id);
        current = next;
    }
    Ok(order)
}

pub fn order_views(views: &[CameraView], reference: ViewId, tol: &DepthTolerance) -> Result<Vec<ViewId>> {
    order_views_limited(views, reference, tol, None)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationMode {
    /// Only the reference edit is warped into later views.
    ReferenceOnly,
    /// All previously edited views are warped; per pixel the nearest source
    /// surface wins.
    #[default]
    Accumulated,
}

impl std::str::FromStr for PropagationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference-only" => Ok(Self::ReferenceOnly),
            "accumulated" => Ok(Self::Accumulated),
            other => Err(Error::config(format!("unknown propagation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditConfig {
    pub prompt: String,
    #[serde(default)]
    pub negative_prompt: String,
    /// Steps during which reprojected pixels are preserved (`N`).
    pub preserve_steps: usize,
    /// Total denoising steps (`T`).
    pub total_steps: usize,
    pub mode: PropagationMode,
    pub seed: u64,
    pub max_views: usize,
    pub guidance: f64,
    pub control_scale: f64,
    pub noise_strength: (f64, f64),
    pub tolerance: DepthTolerance,
    /// Depth range applied before inverting to disparity.
    pub depth_clamp: Option<(f64, f64)>,
    pub disparity_delta: f64,
}

impl EditConfig {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            negative_prompt: String::new(),
            preserve_steps: DEFAULT_PRESERVE_STEPS,
            total_steps: DEFAULT_TOTAL_STEPS,
            mode: PropagationMode::default(),
            seed: 0,
            max_views: DEFAULT_MAX_VIEWS,
            guidance: DEFAULT_GUIDANCE,
            control_scale: DEFAULT_CONTROL_SCALE,
            noise_strength: DEFAULT_NOISE_STRENGTH,
            tolerance: DepthTolerance::default(),
            depth_clamp: None,
            disparity_delta: DEFAULT_DISPARITY_DELTA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps < 1 {
            return Err(Error::config("total steps must be >= 1"));
        }
        if self.preserve_steps > self.total_steps {
            return Err(Error::config(format!(
                "preserve steps {} exceed total steps {}",
                self.preserve_steps, self.total_steps
            )));
        }
        if self.max_views < 1 {
            return Err(Error::config("max views must be >= 1"));
        }
        self.tolerance.validate()
    }
}

/// Prior edits warped into a target view.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Warped colors in `[0, 1]`; zero where nothing is visible.
    pub image: RgbFloat,
    /// Pixels covered by an edited, depth-consistent source sample.
    pub visibility: Mask,
    /// Index into the source list of the winning sample per pixel.
    pub winner: Grid<Option<usize>>,
}

/// An already edited view usable as a propagation source.
#[derive(Clone, Copy, Debug)]
pub struct EditedSource<'a> {
    pub view: &'a CameraView,
    pub edited: &'a RgbImage,
}

/// Warps edited sources into `target`.
///
/// A source contributes at a pixel when the pixel's surface point passes the
/// source's depth test and lands inside the source's mask (nearest pixel), so
/// only edited content propagates. Among contributing sources the one whose
/// reconstructed surface is nearest to the target camera wins; sources
/// within the depth tolerance of each other keep the earlier one.
pub fn project_sources(target: &CameraView, sources: &[EditedSource<'_>], tol: &DepthTolerance) -> Result<Projection> {
    let dst_dist = target.distance()?;
    let (w, h) = dst_dist.dims();
    let mut image = RgbFloat::new(w, h, [0.0; 3]);
    let mut best_z = Grid::new(w, h, f64::INFINITY);
    let mut winner: Grid<Option<usize>> = Grid::new(w, h, None);
    for (k, src) in sources.iter().enumerate() {
        let src_mask = src.view.mask()?;
        let corr = warp_correspondences(&src.view.camera, src.view.distance()?, &target.camera, dst_dist, tol)?;
        for (x, y, s) in corr.pixels() {
            let Some(s) = s else { continue };
            if src_mask.sample_nearest(s.u, s.v) != Some(true) {
                continue;
            }
            let surface = src.view.camera.unproject_unchecked(s.u, s.v, s.sampled_distance);
            let z = target.camera.world_to_cam(&surface).z;
            let current = *best_z.get(x, y);
            if current.is_finite() && z >= current - (tol.abs + tol.rel * current) {
                continue;
            }
            best_z.set(x, y, z);
            winner.set(x, y, Some(k));
            image.set(
                x,
                y,
                src.edited
                    .sample_bilinear(s.u, s.v)
                    .expect("correspondence inside source"),
            );
        }
    }
    Ok(Projection {
        image,
        visibility: winner.map(|w| w.is_some()),
        winner,
    })
}

/// Normalized disparity of a view, as sent to the backend.
pub fn view_disparity(view: &CameraView, config: &EditConfig) -> Result<Grid<f64>> {
    let depth = distance_to_depth(view.distance()?, &view.camera)?;
    Ok(depth_to_disparity(&depth, config.disparity_delta, config.depth_clamp)?.normalized(None))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditRole {
    Reference,
    Propagated,
    /// Empty mask: returned unedited without calling the backend.
    Passthrough,
}

/// Everything produced while editing one view.
#[derive(Clone, Debug)]
pub struct ViewOutcome {
    pub id: ViewId,
    pub role: EditRole,
    pub edited: RgbImage,
    pub mask: Mask,
    pub visibility: Mask,
    /// `M ∧ ¬M_vis`.
    pub preserve_mask: Mask,
    pub init: RgbImage,
    pub schedule: Option<MaskSchedule>,
    pub sources: Vec<ViewId>,
    pub backend_id: Option<String>,
    pub steps_run: usize,
    pub seed_used: Option<u64>,
    pub warnings: Vec<String>,
    /// Pixels where `edited` differs from `init`; 0 flags a backend that
    /// changed nothing.
    pub changed_pixels: usize,
}

fn changed_pixels(a: &RgbImage, b: &RgbImage) -> usize {
    a.data().iter().zip(b.data()).filter(|(x, y)| x != y).count()
}

fn call_backend(
    view: &CameraView,
    init: RgbImage,
    schedule: MaskSchedule,
    config: &EditConfig,
    backend: &dyn EditorBackend,
) -> Result<(RgbImage, crate::backend::EditResponse)> {
    let request = EditRequest {
        disparity: view_disparity(view, config)?,
        init_image: init,
        schedule,
        prompt: config.prompt.clone(),
        negative_prompt: config.negative_prompt.clone(),
        guidance: config.guidance,
        control_scale: config.control_scale,
        seed: config.seed,
        noise_strength: config.noise_strength,
    };
    let response = backend
        .edit(&request)
        .map_err(|source| Error::Backend { view: view.id, source })?;
    if response.image.dims() != view.image.dims() {
        return Err(Error::Backend {
            view: view.id,
            source: crate::backend::BackendError::protocol("image_png", "edited image has wrong dimensions"),
        });
    }
    Ok((response.image.clone(), response))
}

fn finish(
    view: &CameraView,
    mut edited: RgbImage,
    mask: &Mask,
    response: crate::backend::EditResponse,
) -> (RgbImage, Vec<String>) {
    let mut warnings = response.warnings;
    let report = enforce_outside_region(&view.image, mask, &mut edited, 0);
    if report.violations > 0 {
        warn!(
            "view {}: backend modified {} pixels outside the mask",
            view.id, report.violations
        );
        warnings.push(format!(
            "{} pixels outside the mask restored to the original",
            report.violations
        ));
    }
    (edited, warnings)
}

fn passthrough(view: &CameraView, mask: &Mask) -> ViewOutcome {
    let empty = Mask::new(mask.width(), mask.height(), false);
    ViewOutcome {
        id: view.id,
        role: EditRole::Passthrough,
        edited: view.image.clone(),
        mask: mask.clone(),
        visibility: empty.clone(),
        preserve_mask: empty,
        init: view.image.clone(),
        schedule: None,
        sources: Vec::new(),
        backend_id: None,
        steps_run: 0,
        seed_used: None,
        warnings: vec!["empty mask; view left unedited".into()],
        changed_pixels: 0,
    }
}

/// Edits the reference view with a single full-mask schedule.
pub fn edit_reference(view: &CameraView, config: &EditConfig, backend: &dyn EditorBackend) -> Result<ViewOutcome> {
    config.validate()?;
    view.validate()?;
    let mask = view.mask()?.clone();
    if !mask.any() {
        return Ok(passthrough(view, &mask));
    }
    let schedule = MaskSchedule::full(mask.clone(), config.total_steps)?;
    let (edited, response) = call_backend(view, view.image.clone(), schedule.clone(), config, backend)?;
    let backend_id = response.backend_id.clone();
    let (steps_run, seed_used) = (response.steps_run, response.seed_used);
    let (edited, warnings) = finish(view, edited, &mask, response);
    let changed_pixels = changed_pixels(&edited, &view.image);
    let empty = Mask::new(mask.width(), mask.height(), false);
    Ok(ViewOutcome {
        id: view.id,
        role: EditRole::Reference,
        edited,
        preserve_mask: mask.clone(),
        mask,
        visibility: empty,
        init: view.image.clone(),
        schedule: Some(schedule),
        sources: Vec::new(),
        backend_id: Some(backend_id),
        steps_run,
        seed_used: Some(seed_used),
        warnings,
        changed_pixels,
    })
}

/// Edits `view` given already edited sources (reference first).
pub fn propagate_edit(
    view: &CameraView,
    sources: &[EditedSource<'_>],
    config: &EditConfig,
    backend: &dyn EditorBackend,
) -> Result<ViewOutcome> {
    config.validate()?;
    view.validate()?;
    if sources.is_empty() {
        return Err(Error::config(format!(
            "view {}: no edited source to propagate from",
            view.id
        )));
    }
    let mask = view.mask()?.clone();
    if !mask.any() {
        return Ok(passthrough(view, &mask));
    }
    let sources = match config.mode {
        PropagationMode::ReferenceOnly => &sources[..1],
        PropagationMode::Accumulated => sources,
    };
    let projection = project_sources(view, sources, &config.tolerance)?;
    let carried = projection.visibility.and(&mask);
    let init = Grid::from_fn(mask.width(), mask.height(), |x, y| {
        if *carried.get(x, y) {
            projection.image.get(x, y).map(quantize_unit)
        } else {
            *view.image.get(x, y)
        }
    });
    let schedule = build_hybrid_schedule(&mask, &projection.visibility, config.preserve_steps, config.total_steps)?;
    let preserve_mask = mask.and_not(&projection.visibility);
    let (edited, response) = call_backend(view, init.clone(), schedule.clone(), config, backend)?;
    let backend_id = response.backend_id.clone();
    let (steps_run, seed_used) = (response.steps_run, response.seed_used);
    let (edited, warnings) = finish(view, edited, &mask, response);
    let changed_pixels = changed_pixels(&edited, &init);
    Ok(ViewOutcome {
        id: view.id,
        role: EditRole::Propagated,
        edited,
        mask,
        visibility: projection.visibility,
        preserve_mask,
        init,
        schedule: Some(schedule),
        sources: sources.iter().map(|s| s.view.id).collect(),
        backend_id: Some(backend_id),
        steps_run,
        seed_used: Some(seed_used),
        warnings,
        changed_pixels,
    })
}

#[derive(Clone, Debug)]
pub struct EditSession {
    pub views: Vec<CameraView>,
    pub reference: ViewId,
    pub config: EditConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub view: ViewId,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub order: Vec<ViewId>,
    /// Outcomes in processing order.
    pub outcomes: Vec<ViewOutcome>,
    pub failure: Option<SessionFailure>,
}

impl SessionResult {
    pub fn complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Orders the views, edits the reference, then propagates along the order
/// until `max_views` views are done. Configuration problems fail up front;
/// an error on a later view stops the sweep and is reported in the result.
pub fn run_session(session: &EditSession, backend: &dyn EditorBackend) -> Result<SessionResult> {
    let config = &session.config;
    config.validate()?;
    let order = order_views_limited(
        &session.views,
        session.reference,
        &config.tolerance,
        Some(config.max_views),
    )?;
    info!(
        "editing {} views in order {:?}",
        order.len(),
        order.iter().map(|v| v.0).collect::<Vec<_>>()
    );
    let mut outcomes: Vec<ViewOutcome> = Vec::with_capacity(order.len());
    let mut failure = None;
    for &id in &order {
        let view = find(&session.views, id)?;
        let result = if outcomes.is_empty() {
            edit_reference(view, config, backend)
        } else {
            let sources: Vec<EditedSource<'_>> = outcomes
                .iter()
                .filter(|o| o.role != EditRole::Passthrough)
                .map(|o| -> Result<_> {
                    Ok(EditedSource {
                        view: find(&session.views, o.id)?,
                        edited: &o.edited,
                    })
                })
                .collect::<Result<_>>()?;
            propagate_edit(view, &sources, config, backend)
        };
        match result {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => {
                warn!("view {id} failed: {e}");
                failure = Some(SessionFailure {
                    view: id,
                    message: e.to_string(),
                    exit_code: e.exit_code(),
                });
                break;
            }
        }
    }
    Ok(SessionResult {
        order,
        outcomes,
        failure,
    })
}

pub const SESSION_FILE: &str = "session.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub lo: usize,
    pub hi: usize,
    pub mask: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendRecord {
    pub backend_id: String,
    pub steps_run: usize,
    pub seed_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewEditRecord {
    pub id: ViewId,
    pub role: EditRole,
    /// Input image and distance paths as listed in the scene manifest.
    pub input_image: PathBuf,
    pub input_distance: PathBuf,
    pub edited: PathBuf,
    pub init: PathBuf,
    pub mask: PathBuf,
    pub visibility: PathBuf,
    pub preserve_mask: PathBuf,
    pub schedule: Vec<ScheduleRecord>,
    pub sources: Vec<ViewId>,
    pub backend: Option<BackendRecord>,
    pub warnings: Vec<String>,
    pub changed_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub id: String,
    /// False when the backend may ignore the seed.
    pub deterministic: bool,
}

/// Record of an edit session; paths are relative to the session directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub version: String,
    /// Scene manifest, relative to the session directory.
    pub scene: PathBuf,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<SessionFailure>,
    pub reference: ViewId,
    /// Planned editing order (after the view cap).
    pub order: Vec<ViewId>,
    pub config: EditConfig,
    pub backend: BackendInfo,
    /// Processed views, in processing order.
    pub views: Vec<ViewEditRecord>,
}

/// Writes edited images, masks and the session manifest (last, atomically).
pub fn save_session(
    out: &OutputDir,
    scene_manifest: &SceneManifest,
    scene_path: &Path,
    session: &EditSession,
    result: &SessionResult,
    backend: &dyn EditorBackend,
) -> Result<SessionManifest> {
    let mut views = Vec::with_capacity(result.outcomes.len());
    for o in &result.outcomes {
        let rec = scene_manifest
            .views
            .iter()
            .find(|r| r.id == o.id)
            .ok_or_else(|| Error::config(format!("view {} missing from scene manifest", o.id)))?;
        let write_mask = |kind: &str, m: &Mask| -> Result<PathBuf> {
            let name = artifact_name(o.id, kind, "png");
            write_png_mask(&out.path(&name), m)?;
            Ok(name.into())
        };
        let edited = artifact_name(o.id, "edited", "png");
        write_png_rgb(&out.path(&edited), &o.edited)?;
        let init = artifact_name(o.id, "init", "png");
        write_png_rgb(&out.path(&init), &o.init)?;
        let mask = write_mask("mask", &o.mask)?;
        let visibility = write_mask("mvis", &o.visibility)?;
        let preserve_mask = write_mask("mp", &o.preserve_mask)?;
        let schedule = o
            .schedule
            .iter()
            .flat_map(|s| s.entries())
            .map(|e| ScheduleRecord {
                lo: e.lo,
                hi: e.hi,
                mask: if e.mask == o.mask {
                    mask.clone()
                } else {
                    preserve_mask.clone()
                },
            })
            .collect();
        views.push(ViewEditRecord {
            id: o.id,
            role: o.role,
            input_image: rec.image.clone(),
            input_distance: rec.distance.clone(),
            edited: edited.into(),
            init: init.into(),
            mask,
            visibility,
            preserve_mask,
            schedule,
            sources: o.sources.clone(),
            backend: o.backend_id.clone().map(|backend_id| BackendRecord {
                backend_id,
                steps_run: o.steps_run,
                seed_used: o.seed_used.unwrap_or(session.config.seed),
            }),
            warnings: o.warnings.clone(),
            changed_pixels: o.changed_pixels,
        });
    }
    let manifest = SessionManifest {
        version: SCHEMA_VERSION.into(),
        scene: relative_path(out.root(), scene_path),
        complete: result.complete(),
        failure: result.failure.clone(),
        reference: session.reference,
        order: result.order.clone(),
        config: session.config.clone(),
        backend: BackendInfo {
            id: backend.id().to_string(),
            deterministic: backend.deterministic(),
        },
        views,
    };
    out.write_json(SESSION_FILE, &manifest)?;
    Ok(manifest)
}

/// `target` expressed relative to `base`, falling back to the absolute path.
pub fn relative_path(base: &Path, target: &Path) -> PathBuf {
    let (Ok(base), Ok(target)) = (base.canonicalize(), target.canonicalize()) else {
        return target.to_path_buf();
    };
    let b: Vec<_> = base.components().collect();
    let t: Vec<_> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out
}

pub fn load_session(path: &Path) -> Result<SessionManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: SessionManifest =
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if m.version != SCHEMA_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported session version {:?}",
            path.display(),
            m.version
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, EditResponse, MockBackend};
    use crate::synth::{render_scene, SceneSpec};

    fn scene(count: usize) -> Vec<CameraView> {
        let mut spec = SceneSpec::plane_disk(count);
        spec.cameras.width = 64;
        spec.cameras.height = 48;
        render_scene(&spec).unwrap().views
    }

    struct Failing;

    impl EditorBackend for Failing {
        fn id(&self) -> &str {
            "failing"
        }
        fn deterministic(&self) -> bool {
            true
        }
        fn edit(&self, _: &EditRequest) -> Result<EditResponse, BackendError> {
            Err(BackendError::Transport("down".into()))
        }
    }

    #[test]
    fn two_views_forced_order() {
        let views = scene(2);
        let tol = DepthTolerance::default();
        assert_eq!(
            order_views(&views, ViewId(1), &tol).unwrap(),
            vec![ViewId(1), ViewId(0)]
        );
    }

    #[test]
    fn duplicate_camera_is_chosen_first() {
        // Self-occlusion on the sphere keeps the other views below the full count.
        let mut spec = SceneSpec::sphere_over_plane(4);
        spec.cameras.width = 64;
        spec.cameras.height = 48;
        let mut views = render_scene(&spec).unwrap().views;
        let mut dup = views[0].clone();
        dup.id = ViewId(9);
        views.push(dup);
        let order = order_views(&views, ViewId(0), &DepthTolerance::default()).unwrap();
        assert_eq!(order[1], ViewId(9));
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![ViewId(0), ViewId(1), ViewId(2), ViewId(3), ViewId(9)]);
    }

    #[test]
    fn empty_reference_mask_is_config_error() {
        let mut views = scene(2);
        views[0].mask = Some(Mask::new(64, 48, false));
        assert!(matches!(
            order_views(&views, ViewId(0), &DepthTolerance::default()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            order_views(&views, ViewId(5), &DepthTolerance::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = EditConfig::new("x");
        c.preserve_steps = 21;
        assert!(c.validate().is_err());
        c.preserve_steps = 5;
        c.total_steps = 0;
        assert!(c.validate().is_err());
        assert_eq!(
            "reference-only".parse::<PropagationMode>().unwrap(),
            PropagationMode::ReferenceOnly
        );
        assert!("both".parse::<PropagationMode>().is_err());
    }

    #[test]
    fn single_view_session() {
        let views = scene(1);
        let session = EditSession {
            views,
            reference: ViewId(0),
            config: EditConfig::new("a red disk"),
        };
        let r = run_session(&session, &MockBackend).unwrap();
        assert!(r.complete());
        assert_eq!(r.outcomes.len(), 1);
        assert_eq!(r.outcomes[0].role, EditRole::Reference);
    }

    #[test]
    fn outside_mask_is_original() {
        let views = scene(3);
        let session = EditSession {
            views: views.clone(),
            reference: ViewId(1),
            config: EditConfig::new("a red disk"),
        };
        let r = run_session(&session, &MockBackend).unwrap();
        for o in &r.outcomes {
            let v = &views[o.id.0 as usize];
            for (x, y, px) in o.edited.pixels() {
                if !*o.mask.get(x, y) {
                    assert_eq!(px, v.image.get(x, y));
                }
            }
            assert!(o.preserve_mask.is_subset_of(&o.mask));
        }
    }

    #[test]
    fn accumulated_visibility_covers_reference_only() {
        let views = scene(4);
        let mut config = EditConfig::new("a red disk");
        let reference = edit_reference(&views[0], &config, &MockBackend).unwrap();
        let second = propagate_edit(
            &views[1],
            &[EditedSource {
                view: &views[0],
                edited: &reference.edited,
            }],
            &config,
            &MockBackend,
        )
        .unwrap();
        let sources = [
            EditedSource {
                view: &views[0],
                edited: &reference.edited,
            },
            EditedSource {
                view: &views[1],
                edited: &second.edited,
            },
        ];
        let acc = propagate_edit(&views[2], &sources, &config, &MockBackend).unwrap();
        config.mode = PropagationMode::ReferenceOnly;
        let refonly = propagate_edit(&views[2], &sources, &config, &MockBackend).unwrap();
        assert!(refonly.visibility.is_subset_of(&acc.visibility));
        assert_eq!(refonly.sources, vec![ViewId(0)]);
    }

    #[test]
    fn backend_failure_yields_partial_result() {
        let views = scene(2);
        let session = EditSession {
            views,
            reference: ViewId(0),
            config: EditConfig::new("x"),
        };
        let r = run_session(&session, &Failing).unwrap();
        assert!(!r.complete());
        assert!(r.outcomes.is_empty());
        let f = r.failure.unwrap();
        assert_eq!((f.view, f.exit_code), (ViewId(0), 4));
    }

    #[test]
    fn empty_mask_passes_through() {
        let mut views = scene(2);
        views[1].mask = Some(Mask::new(64, 48, false));
        let session = EditSession {
            views: views.clone(),
            reference: ViewId(0),
            config: EditConfig::new("x"),
        };
        let r = run_session(&session, &MockBackend).unwrap();
        assert_eq!(r.outcomes[1].role, EditRole::Passthrough);
        assert_eq!(r.outcomes[1].edited, views[1].image);
    }
}
