use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use serde::Serialize;

use mvedit::backend::{EditorBackend, MockBackend, RemoteBackend, RemoteConfig};
use mvedit::codec::{read_png_rgb, write_ply, write_png_mask, write_png_rgb};
use mvedit::geometry::reproject_view;
use mvedit::guided::GuidedFilterParams;
use mvedit::masks::{refine_masks, RefineConfig};
use mvedit::metrics::{
    aggregate, direction_consistency, masked_reprojection_error, text_image_direction_similarity, EmbeddingProvider,
    RemoteProvider, SurrogateProvider,
};
use mvedit::pipeline::{
    load_session, order_views, run_session, save_session, EditConfig, EditSession, PropagationMode, SESSION_FILE,
};
use mvedit::scene::{load_manifest, load_scene, save_scene, GlobalConfig, OutputDir, Scene, SCENE_FILE};
use mvedit::synth::{corrupt_masks, render_scene, SceneSpec};
use mvedit::{Error, Result, RgbImage, ViewId};

#[derive(Parser)]
#[command(name = "mvedit", version, about = "Depth-aware multi-view edit propagation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scene manifest (scene.json).
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Output directory (for `metrics`, the report file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    log: LogFormat,
    /// Replace existing outputs.
    #[arg(long, global = true)]
    overwrite: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Plane,
    Sphere,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Consistency,
    Direction,
    Reproj,
}

#[derive(Subcommand)]
enum Command {
    /// Render an analytic scene.
    Synth {
        /// Scene spec JSON; a preset is used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::Sphere)]
        preset: Preset,
        #[arg(long, default_value_t = 8)]
        views: usize,
    },
    /// Fuse the initial masks into 3D-consistent refined masks.
    RefineMasks {
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Sphere prior radius, or `auto` for 2.5x the RMS spread of confident points.
        #[arg(long, default_value = "auto")]
        radius: String,
        #[arg(long, default_value_t = 1)]
        closing_radius: usize,
        #[arg(long, default_value_t = 8)]
        guided_radius: usize,
        #[arg(long, default_value_t = 1e-4)]
        guided_eps: f64,
    },
    /// Greedy propagation order from a reference view.
    OrderViews {
        #[arg(long)]
        reference: Option<u32>,
    },
    /// Edit the reference and propagate to the other views.
    Edit {
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value = "")]
        negative_prompt: String,
        #[arg(long)]
        reference: Option<u32>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        t: usize,
        #[arg(long, default_value = "accumulated")]
        mode: String,
        /// `mock` or `remote:<url>`.
        #[arg(long, default_value = "mock")]
        backend: String,
        #[arg(long, default_value_t = 100)]
        max_views: usize,
        #[arg(long, default_value_t = 7.5)]
        guidance: f64,
        #[arg(long, default_value_t = 0.5)]
        control_scale: f64,
        /// Remote request timeout in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
    },
    /// Warp one view into another.
    Reproject {
        #[arg(long)]
        src: u32,
        #[arg(long)]
        dst: u32,
        /// Session directory whose edited source image is warped instead of the original.
        #[arg(long)]
        edited: Option<PathBuf>,
    },
    /// Score an edit session.
    Metrics {
        /// Session directory written by `edit`.
        #[arg(long)]
        edited: PathBuf,
        #[arg(long, value_enum)]
        kind: MetricKind,
        /// `surrogate` or `remote:<url>`.
        #[arg(long, default_value = "surrogate")]
        provider: String,
        #[arg(long, default_value = "")]
        source_text: String,
        #[arg(long)]
        target_text: Option<String>,
    },
}

fn init_logging(format: LogFormat) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let LogFormat::Json = format {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    builder.init();
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::Argument(format!("--{flag} is required for this command")))
}

fn pick_reference(scene: &Scene, reference: Option<u32>) -> Result<ViewId> {
    match reference {
        Some(r) => {
            scene.view_index(ViewId(r))?;
            Ok(ViewId(r))
        }
        None => scene
            .views
            .iter()
            .map(|v| v.id)
            .min()
            .ok_or_else(|| Error::config("scene has no views")),
    }
}

fn write_report<T: Serialize>(path: &Path, overwrite: bool, value: &T) -> Result<PathBuf> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Argument(format!("bad report path {}", path.display())))?;
    OutputDir::prepare(dir, name, overwrite)?.write_json(name, value)
}

fn synth(g: &GlobalArgs, spec_path: &Option<PathBuf>, preset: Preset, count: usize) -> Result<()> {
    let out = OutputDir::prepare(require(&g.out, "out")?, SCENE_FILE, g.overwrite)?;
    let spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SceneSpec>(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
        None => {
            let mut s = match preset {
                Preset::Plane => SceneSpec::plane_disk(count),
                Preset::Sphere => SceneSpec::sphere_over_plane(count),
            };
            let (mvedit::synth::GeometrySpec::Plane { plane }
            | mvedit::synth::GeometrySpec::SphereOverPlane { plane, .. }) = &mut s.geometry;
            plane.texture.seed = g.seed;
            s
        }
    };
    let rendered = render_scene(&spec)?;
    let views = match &spec.corruption {
        Some(c) => corrupt_masks(&rendered.views, c),
        None => rendered.views.clone(),
    };
    for (v, gt) in rendered.views.iter().zip(&rendered.gt_masks) {
        write_png_mask(&out.path(&mvedit::scene::artifact_name(v.id, "gt_mask", "png")), gt)?;
    }
    out.write_json("synth_spec.json", &spec)?;
    save_scene(&Scene::new(views, GlobalConfig::default()), &out)?;
    info!("rendered {} views into {}", rendered.views.len(), out.root().display());
    Ok(())
}

#[derive(Serialize)]
struct RefineReport {
    tau: f64,
    sphere: Option<mvedit::masks::SpherePrior>,
    lifted_points: usize,
    kept_points: usize,
    mask_pixels: Vec<(ViewId, usize)>,
}

fn refine(g: &GlobalArgs, config: RefineConfig) -> Result<()> {
    let scene_path = require(&g.scene, "scene")?;
    let mut scene = load_scene(scene_path)?;
    let out = OutputDir::prepare(require(&g.out, "out")?, SCENE_FILE, g.overwrite)?;
    let config = RefineConfig {
        tolerance: scene.global.tolerance,
        sphere: scene.global.sphere.or(config.sphere),
        ..config
    };
    let refined = refine_masks(&scene.views_with_initial_masks(), &config)?;
    write_ply(&out.path("cloud.ply"), &refined.pruned)?;
    let report = RefineReport {
        tau: config.tau,
        sphere: refined.sphere,
        lifted_points: refined.cloud.len(),
        kept_points: refined.pruned.len(),
        mask_pixels: scene
            .views
            .iter()
            .zip(&refined.masks)
            .map(|(v, m)| (v.id, m.count()))
            .collect(),
    };
    out.write_json("refine_report.json", &report)?;
    scene.set_refined(refined.masks);
    save_scene(&scene, &out)?;
    info!("kept {} of {} lifted points", report.kept_points, report.lifted_points);
    Ok(())
}

#[derive(Serialize)]
struct OrderReport {
    reference: ViewId,
    order: Vec<ViewId>,
}

fn order(g: &GlobalArgs, reference: Option<u32>) -> Result<()> {
    let scene = load_scene(require(&g.scene, "scene")?)?;
    let out = OutputDir::prepare(require(&g.out, "out")?, "order.json", g.overwrite)?;
    let reference = pick_reference(&scene, reference)?;
    let order = order_views(&scene.views, reference, &scene.global.tolerance)?;
    info!("order: {:?}", order.iter().map(|v| v.0).collect::<Vec<_>>());
    out.write_json("order.json", &OrderReport { reference, order })?;
    Ok(())
}

fn make_backend(spec: &str, timeout: Duration) -> Result<Box<dyn EditorBackend>> {
    if spec == "mock" {
        return Ok(Box::new(MockBackend::new()));
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        let mut config = RemoteConfig::new(url);
        config.timeout = timeout;
        let backend = RemoteBackend::new(config);
        let health = backend.health().map_err(|source| Error::Backend {
            view: ViewId(0),
            source,
        })?;
        info!("remote backend {} is healthy", health.backend_id);
        return Ok(Box::new(backend));
    }
    Err(Error::config(format!(
        "unknown backend {spec:?}; expected mock or remote:<url>"
    )))
}

#[allow(clippy::too_many_arguments)]
fn edit(
    g: &GlobalArgs,
    prompt: &str,
    negative_prompt: &str,
    reference: Option<u32>,
    n: usize,
    t: usize,
    mode: &str,
    backend: &str,
    max_views: usize,
    guidance: f64,
    control_scale: f64,
    timeout: u64,
) -> Result<()> {
    let scene_path = require(&g.scene, "scene")?;
    let scene = load_scene(scene_path)?;
    let manifest = load_manifest(scene_path)?;
    let out = OutputDir::prepare(require(&g.out, "out")?, SESSION_FILE, g.overwrite)?;
    let config = EditConfig {
        negative_prompt: negative_prompt.into(),
        preserve_steps: n,
        total_steps: t,
        mode: mode.parse::<PropagationMode>()?,
        seed: g.seed,
        max_views,
        guidance,
        control_scale,
        tolerance: scene.global.tolerance,
        depth_clamp: scene.global.depth_clamp,
        disparity_delta: scene.global.delta,
        ..EditConfig::new(prompt)
    };
    config.validate()?;
    let backend = make_backend(backend, Duration::from_secs(timeout))?;
    let session = EditSession {
        reference: pick_reference(&scene, reference)?,
        views: scene.views,
        config,
    };
    let result = run_session(&session, backend.as_ref())?;
    let saved = save_session(&out, &manifest, scene_path, &session, &result, backend.as_ref())?;
    info!("edited {} views", saved.views.len());
    match result.failure {
        None => Ok(()),
        Some(f) => {
            error!("session incomplete: view {} failed: {}", f.view, f.message);
            std::process::exit(f.exit_code);
        }
    }
}

fn edited_images(dir: &Path) -> Result<Vec<(ViewId, RgbImage)>> {
    let session = load_session(&dir.join(SESSION_FILE))?;
    let mut out: Vec<_> = session
        .views
        .iter()
        .map(|v| Ok((v.id, read_png_rgb(&dir.join(&v.edited))?)))
        .collect::<Result<_>>()?;
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

fn reproject(g: &GlobalArgs, src: u32, dst: u32, edited: &Option<PathBuf>) -> Result<()> {
    let scene = load_scene(require(&g.scene, "scene")?)?;
    let name = format!("{dst}_from_{src}.png");
    let out = OutputDir::prepare(require(&g.out, "out")?, &name, g.overwrite)?;
    let mut source = scene.views[scene.view_index(ViewId(src))?].clone();
    if let Some(dir) = edited {
        source.image = edited_images(dir)?
            .into_iter()
            .find(|(id, _)| id.0 == src)
            .map(|(_, img)| img)
            .ok_or_else(|| Error::data(format!("view {src} was not edited in {}", dir.display())))?;
    }
    let target = &scene.views[scene.view_index(ViewId(dst))?];
    let rep = reproject_view(&source, &target.camera, target.distance()?, &scene.global.tolerance)?;
    write_png_rgb(&out.path(&name), &rep.image.to_u8())?;
    write_png_mask(&out.path(&format!("{dst}_from_{src}_vis.png")), &rep.visibility)?;
    info!("{} of {} pixels visible", rep.visibility.count(), rep.visibility.len());
    Ok(())
}

fn make_provider(spec: &str) -> Result<Box<dyn EmbeddingProvider>> {
    if spec == "surrogate" {
        return Ok(Box::new(SurrogateProvider));
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        return Ok(Box::new(RemoteProvider::new(url, Duration::from_secs(60))));
    }
    Err(Error::config(format!(
        "unknown provider {spec:?}; expected surrogate or remote:<url>"
    )))
}

fn metrics(
    g: &GlobalArgs,
    edited_dir: &Path,
    kind: MetricKind,
    provider: &str,
    source_text: &str,
    target_text: &Option<String>,
) -> Result<()> {
    let scene = load_scene(require(&g.scene, "scene")?)?;
    let report_path = require(&g.out, "out")?;
    let edited = edited_images(edited_dir)?;
    let session = load_session(&edited_dir.join(SESSION_FILE))?;
    let mut originals = Vec::with_capacity(edited.len());
    for (id, _) in &edited {
        originals.push(scene.views[scene.view_index(*id)?].image.clone());
    }
    let frames: Vec<RgbImage> = edited.iter().map(|(_, img)| img.clone()).collect();
    let report = match kind {
        MetricKind::Consistency => {
            let provider = make_provider(provider)?;
            let r = direction_consistency(&originals, &frames, provider.as_ref())?;
            serde_json::json!({
                "kind": "consistency",
                "provider": provider.id(),
                "aggregates": aggregate(std::slice::from_ref(&r)),
                "report": r,
            })
        }
        MetricKind::Direction => {
            let provider = make_provider(provider)?;
            let target = target_text.clone().unwrap_or_else(|| session.config.prompt.clone());
            let r = text_image_direction_similarity(&originals, &frames, source_text, &target, provider.as_ref())?;
            serde_json::json!({
                "kind": "direction",
                "provider": provider.id(),
                "source_text": source_text,
                "target_text": target,
                "aggregates": aggregate(std::slice::from_ref(&r)),
                "report": r,
            })
        }
        MetricKind::Reproj => {
            let mut views = Vec::with_capacity(edited.len());
            let mut masks = Vec::with_capacity(edited.len());
            for (id, img) in &edited {
                let v = &scene.views[scene.view_index(*id)?];
                masks.push(v.mask()?.clone());
                views.push(mvedit::CameraView {
                    image: img.clone(),
                    ..v.clone()
                });
            }
            let sequence: Vec<ViewId> = edited.iter().map(|(id, _)| *id).collect();
            let r = masked_reprojection_error(&views, &masks, &sequence, &scene.global.tolerance)?;
            if r.mean.is_none() {
                warn!("no overlapping masked pixels between neighboring views");
            }
            serde_json::json!({ "kind": "reproj", "report": r })
        }
    };
    write_report(report_path, g.overwrite, &report)?;
    Ok(())
}

fn parse_radius(s: &str) -> Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Argument(format!("--radius expects `auto` or a number, got {s:?}")))
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { spec, preset, views } => synth(g, spec, *preset, *views),
        Command::RefineMasks {
            tau,
            radius,
            closing_radius,
            guided_radius,
            guided_eps,
        } => refine(
            g,
            RefineConfig {
                tau: *tau,
                sphere_radius: parse_radius(radius)?,
                closing_radius: *closing_radius,
                guided: GuidedFilterParams {
                    radius: *guided_radius,
                    eps: *guided_eps,
                    ..GuidedFilterParams::default()
                },
                ..RefineConfig::default()
            },
        ),
        Command::OrderViews { reference } => order(g, *reference),
        Command::Edit {
            prompt,
            negative_prompt,
            reference,
            n,
            t,
            mode,
            backend,
            max_views,
            guidance,
            control_scale,
            timeout,
        } => edit(
            g,
            prompt,
            negative_prompt,
            *reference,
            *n,
            *t,
            mode,
            backend,
            *max_views,
            *guidance,
            *control_scale,
            *timeout,
        ),
        Command::Reproject { src, dst, edited } => reproject(g, *src, *dst, edited),
        Command::Metrics {
            edited,
            kind,
            provider,
            source_text,
            target_text,
        } => metrics(g, edited, *kind, provider, source_text, target_text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.log);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
