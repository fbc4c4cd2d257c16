//! Scene manifests: one JSON file binding images, distance maps, cameras and
//! masks of a scene directory. Paths inside a manifest are relative to the
//! directory holding it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{read_pfm, read_png_mask, read_png_rgb, write_pfm, write_png_mask, write_png_rgb};
use crate::error::{Error, Result};
use crate::geometry::{
    depth_to_distance, validate_distance, CameraModel, CameraView, DepthTolerance, ViewId, DEFAULT_DISPARITY_DELTA,
};
use crate::masks::SpherePrior;
use crate::raster::Mask;

pub const SCHEMA_VERSION: &str = "1";
pub const SCENE_FILE: &str = "scene.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major 3x4 `[R | t]`.
    pub world_to_camera: [f64; 12],
}

impl CameraRecord {
    pub fn from_camera(cam: &CameraModel) -> Self {
        Self {
            width: cam.width(),
            height: cam.height(),
            fx: cam.fx(),
            fy: cam.fy(),
            cx: cam.cx(),
            cy: cam.cy(),
            world_to_camera: cam.world_to_camera(),
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        CameraModel::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            self.world_to_camera,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewRecord {
    pub id: ViewId,
    pub image: PathBuf,
    /// Ray-distance PFM.
    pub distance: PathBuf,
    pub camera: CameraRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_mask: Option<PathBuf>,
    /// z-depth PFM replacing the view's geometry, e.g. with an inserted object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_mask: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_clamp: Option<(f64, f64)>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub tolerance: DepthTolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SpherePrior>,
}

fn default_delta() -> f64 {
    DEFAULT_DISPARITY_DELTA
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            depth_clamp: None,
            delta: DEFAULT_DISPARITY_DELTA,
            tolerance: DepthTolerance::default(),
            sphere: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub version: String,
    pub views: Vec<ViewRecord>,
    #[serde(default)]
    pub global: GlobalConfig,
}

/// A loaded scene. `views[i].mask` is the working mask: the override mask if
/// given, else the refined mask, else the initial mask.
#[derive(Clone, Debug)]
pub struct Scene {
    pub views: Vec<CameraView>,
    pub initial_masks: Vec<Option<Mask>>,
    pub refined_masks: Vec<Option<Mask>>,
    pub global: GlobalConfig,
}

impl Scene {
    pub fn new(views: Vec<CameraView>, global: GlobalConfig) -> Self {
        let initial_masks = views.iter().map(|v| v.mask.clone()).collect();
        let refined_masks = vec![None; views.len()];
        Self {
            views,
            initial_masks,
            refined_masks,
            global,
        }
    }

    pub fn view_index(&self, id: ViewId) -> Result<usize> {
        self.views
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| Error::config(format!("view {id} not in scene")))
    }

    /// Replaces the refined masks and makes them the working masks.
    pub fn set_refined(&mut self, masks: Vec<Mask>) {
        for (v, m) in self.views.iter_mut().zip(&masks) {
            v.mask = Some(m.clone());
        }
        self.refined_masks = masks.into_iter().map(Some).collect();
    }

    /// Views carrying their initial masks instead of the working masks.
    pub fn views_with_initial_masks(&self) -> Vec<CameraView> {
        self.views
            .iter()
            .zip(&self.initial_masks)
            .map(|(v, m)| CameraView {
                mask: m.clone(),
                ..v.clone()
            })
            .collect()
    }
}

fn field_error(id: ViewId, field: &str, e: Error) -> Error {
    let msg = format!("view {id}, field `{field}`: {e}");
    match e {
        Error::Config(_) | Error::Argument(_) | Error::Capability(_) => Error::Config(msg),
        _ => Error::Data(msg),
    }
}

pub fn load_manifest(path: &Path) -> Result<SceneManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if manifest.version != SCHEMA_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported manifest version {:?}",
            path.display(),
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Loads and cross-checks every raster of a manifest.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let manifest = load_manifest(path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::BTreeSet::new();
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut initial_masks = Vec::with_capacity(manifest.views.len());
    let mut refined_masks = Vec::with_capacity(manifest.views.len());
    for rec in &manifest.views {
        let id = rec.id;
        if !seen.insert(id) {
            return Err(Error::data(format!("duplicate view id {id}")));
        }
        let camera = rec.camera.to_camera().map_err(|e| field_error(id, "camera", e))?;
        let dims = (camera.width(), camera.height());
        let check = |field: &str, got: (usize, usize)| {
            if got == dims {
                Ok(())
            } else {
                Err(Error::data(format!(
                    "view {id}, field `{field}`: raster is {}x{}, camera is {}x{}",
                    got.0, got.1, dims.0, dims.1
                )))
            }
        };
        let image = read_png_rgb(&root.join(&rec.image)).map_err(|e| field_error(id, "image", e))?;
        check("image", image.dims())?;
        let mut distance = read_pfm(&root.join(&rec.distance)).map_err(|e| field_error(id, "distance", e))?;
        check("distance", distance.dims())?;
        if let Some(p) = &rec.override_depth {
            let depth = read_pfm(&root.join(p)).map_err(|e| field_error(id, "override_depth", e))?;
            check("override_depth", depth.dims())?;
            distance = depth_to_distance(&depth, &camera).map_err(|e| field_error(id, "override_depth", e))?;
        }
        validate_distance(&distance).map_err(|e| field_error(id, "distance", e))?;
        let load_mask = |field: &str, p: &Option<PathBuf>| -> Result<Option<Mask>> {
            match p {
                None => Ok(None),
                Some(p) => {
                    let m = read_png_mask(&root.join(p)).map_err(|e| field_error(id, field, e))?;
                    check(field, m.dims())?;
                    Ok(Some(m))
                }
            }
        };
        let initial = load_mask("initial_mask", &rec.initial_mask)?;
        let refined = load_mask("refined_mask", &rec.refined_mask)?;
        let overridden = load_mask("override_mask", &rec.override_mask)?;
        let working = overridden.or_else(|| refined.clone()).or_else(|| initial.clone());
        views.push(CameraView {
            id,
            camera,
            image,
            distance: Some(distance),
            mask: working,
        });
        initial_masks.push(initial);
        refined_masks.push(refined);
    }
    Ok(Scene {
        views,
        initial_masks,
        refined_masks,
        global: manifest.global,
    })
}

/// Output directory with an overwrite guard and atomic manifest writes.
#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed. Refuses when `marker` (the verb's primary
    /// output file) already exists and `overwrite` is false.
    pub fn prepare(root: impl Into<PathBuf>, marker: &str, overwrite: bool) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let marker_path = root.join(marker);
        if marker_path.exists() && !overwrite {
            return Err(Error::config(format!(
                "{} already exists; pass --overwrite to replace it",
                marker_path.display()
            )));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file and renames it into place.
    pub fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::data(e.to_string()))?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }
}

/// `{id}_{kind}.{ext}`.
pub fn artifact_name(id: ViewId, kind: &str, ext: &str) -> String {
    format!("{}_{kind}.{ext}", id.0)
}

/// Writes every raster of `scene` plus the manifest into `out`.
pub fn save_scene(scene: &Scene, out: &OutputDir) -> Result<SceneManifest> {
    let mut records = Vec::with_capacity(scene.views.len());
    for (i, v) in scene.views.iter().enumerate() {
        let image = artifact_name(v.id, "image", "png");
        write_png_rgb(&out.path(&image), &v.image)?;
        let distance = artifact_name(v.id, "distance", "pfm");
        write_pfm(&out.path(&distance), v.distance()?)?;
        let save_mask = |kind: &str, m: &Option<Mask>| -> Result<Option<PathBuf>> {
            match m {
                None => Ok(None),
                Some(m) => {
                    let name = artifact_name(v.id, kind, "png");
                    write_png_mask(&out.path(&name), m)?;
                    Ok(Some(PathBuf::from(name)))
                }
            }
        };
        let initial_mask = save_mask("initial_mask", &scene.initial_masks[i])?;
        let refined_mask = save_mask("refined_mask", &scene.refined_masks[i])?;
        records.push(ViewRecord {
            id: v.id,
            image: image.into(),
            distance: distance.into(),
            camera: CameraRecord::from_camera(&v.camera),
            initial_mask,
            refined_mask,
            override_depth: None,
            override_mask: None,
        });
    }
    let manifest = SceneManifest {
        version: SCHEMA_VERSION.into(),
        views: records,
        global: scene.global.clone(),
    };
    out.write_json(SCENE_FILE, &manifest)?;
    Ok(manifest)
}
