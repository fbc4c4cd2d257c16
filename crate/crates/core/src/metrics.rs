//! Evaluation scores.
//!
//! Two embedding-direction scores compare how edits change image embeddings,
//! and a geometric score measures photometric disagreement between
//! neighboring edited views after warping one into the other.
//!
//! Cosine policy for zero vectors: two zero deltas agree perfectly (1), a
//! zero delta against a nonzero one scores 0.

use std::io::Read;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::encode_png_rgb;
use crate::error::{Error, Result};
use crate::geometry::{reproject_view, CameraView, DepthTolerance, ViewId};
use crate::raster::{Mask, RgbImage};

pub trait EmbeddingProvider {
    fn id(&self) -> &str;

    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f64>>;

    fn embed_text(&self, _text: &str) -> Result<Vec<f64>> {
        Err(Error::Capability(format!("provider {} has no text encoder", self.id())))
    }
}

const GRID: usize = 8;
pub const SURROGATE_DIM: usize = GRID * GRID * 3;

/// Desk-scale stand-in for a learned encoder: mean RGB over an 8x8 grid of
/// image cells (192 values in `[0, 1]`), and a SHA-256 seeded pseudo-random
/// vector of the same size for text. It is not semantically meaningful; it
/// exists so the score formulas can be exercised end to end.
#[derive(Clone, Copy, Debug, Default)]
pub struct SurrogateProvider;

impl EmbeddingProvider for SurrogateProvider {
    fn id(&self) -> &str {
        "surrogate-grid-rgb"
    }

    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f64>> {
        let (w, h) = image.dims();
        if w < GRID || h < GRID {
            return Err(Error::Argument(format!(
                "image {w}x{h} smaller than the {GRID}x{GRID} grid"
            )));
        }
        let mut out = Vec::with_capacity(SURROGATE_DIM);
        for gy in 0..GRID {
            for gx in 0..GRID {
                let (x0, x1) = (gx * w / GRID, (gx + 1) * w / GRID);
                let (y0, y1) = (gy * h / GRID, (gy + 1) * h / GRID);
                let mut sum = [0.0; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = image.get(x, y);
                        for c in 0..3 {
                            sum[c] += p[c] as f64;
                        }
                    }
                }
                let n = ((x1 - x0) * (y1 - y0)) as f64 * 255.0;
                out.extend(sum.iter().map(|s| s / n));
            }
        }
        Ok(out)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(SURROGATE_DIM);
        let mut block = 0u32;
        while out.len() < SURROGATE_DIM {
            let digest = Sha256::new()
                .chain_update(text.as_bytes())
                .chain_update([0u8])
                .chain_update(block.to_le_bytes())
                .finalize();
            for chunk in digest.chunks_exact(4) {
                let v = u32::from_le_bytes(chunk.try_into().unwrap());
                out.push(v as f64 / u32::MAX as f64 * 2.0 - 1.0);
            }
            block += 1;
        }
        out.truncate(SURROGATE_DIM);
        Ok(out)
    }
}

/// Provider backed by an HTTP service: `POST {endpoint}/embed` with
/// `{"kind": "image", "png": <base64>}` or `{"kind": "text", "text": ...}`,
/// answered by `{"embedding": [..]}`. A 404 or 501 on text requests means the
/// service has no text encoder.
pub struct RemoteProvider {
    endpoint: String,
    agent: ureq::Agent,
    id: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let endpoint = endpoint.into();
        Self {
            id: format!("remote:{endpoint}"),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint,
        }
    }

    fn call(&self, body: serde_json::Value) -> Result<Vec<f64>> {
        let url = format!("{}/embed", self.endpoint.trim_end_matches('/'));
        let resp = match self
            .agent
            .post(&url)
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
        {
            Ok(r) => r,
            Err(ureq::Error::Status(code @ (404 | 501), _)) => {
                return Err(Error::Capability(format!("{url} answered HTTP {code}")));
            }
            Err(e) => return Err(Error::data(format!("embedding request to {url} failed: {e}"))),
        };
        let mut raw = Vec::new();
        resp.into_reader()
            .read_to_end(&mut raw)
            .map_err(|e| Error::data(format!("reading embedding response: {e}")))?;
        let parsed: EmbedResponse =
            serde_json::from_slice(&raw).map_err(|e| Error::data(format!("malformed embedding response: {e}")))?;
        Ok(parsed.embedding)
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f64>> {
        use base64::Engine;
        let png = base64::engine::general_purpose::STANDARD.encode(encode_png_rgb(image)?);
        self.call(serde_json::json!({ "kind": "image", "png": png }))
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        self.call(serde_json::json!({ "kind": "text", "text": text }))
    }
}

fn delta(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "embedding sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(b.iter().zip(a).map(|(x, y)| x - y).collect())
}

/// Cosine with the zero-vector policy.
pub fn policy_cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "vector sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// One score per consecutive frame pair, or per frame.
    pub items: Vec<f64>,
    pub mean: f64,
}

impl ScoreReport {
    fn from_items(items: Vec<f64>) -> Self {
        let mean = items.iter().sum::<f64>() / items.len() as f64;
        Self { items, mean }
    }
}

/// Direction consistency from precomputed embeddings: mean over consecutive
/// pairs of `cos(E_i - O_i, E_{i+1} - O_{i+1})`.
pub fn direction_consistency_embeddings(orig: &[Vec<f64>], edited: &[Vec<f64>]) -> Result<ScoreReport> {
    if orig.len() != edited.len() {
        return Err(Error::Argument(format!(
            "{} original frames but {} edited frames",
            orig.len(),
            edited.len()
        )));
    }
    if orig.len() < 2 {
        return Err(Error::Argument(
            "direction consistency needs at least two frames".into(),
        ));
    }
    let deltas = orig
        .iter()
        .zip(edited)
        .map(|(o, e)| delta(o, e))
        .collect::<Result<Vec<_>>>()?;
    let items = deltas
        .windows(2)
        .map(|w| policy_cosine(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport::from_items(items))
}

pub fn direction_consistency(
    orig: &[RgbImage],
    edited: &[RgbImage],
    provider: &dyn EmbeddingProvider,
) -> Result<ScoreReport> {
    if orig.len() != edited.len() {
        return Err(Error::Argument(format!(
            "{} original frames but {} edited frames",
            orig.len(),
            edited.len()
        )));
    }
    let embed = |frames: &[RgbImage]| {
        frames
            .iter()
            .map(|f| provider.embed_image(f))
            .collect::<Result<Vec<_>>>()
    };
    direction_consistency_embeddings(&embed(orig)?, &embed(edited)?)
}

/// Per-frame `cos(C(e_i) - C(o_i), T(target) - T(source))`, from embeddings.
pub fn text_image_direction_embeddings(
    orig: &[Vec<f64>],
    edited: &[Vec<f64>],
    source_text: &[f64],
    target_text: &[f64],
) -> Result<ScoreReport> {
    if orig.len() != edited.len() {
        return Err(Error::Argument(format!(
            "{} original frames but {} edited frames",
            orig.len(),
            edited.len()
        )));
    }
    if orig.is_empty() {
        return Err(Error::Argument("no frames".into()));
    }
    let text = delta(source_text, target_text)?;
    let items = orig
        .iter()
        .zip(edited)
        .map(|(o, e)| policy_cosine(&delta(o, e)?, &text))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport::from_items(items))
}

pub fn text_image_direction_similarity(
    orig: &[RgbImage],
    edited: &[RgbImage],
    source_text: &str,
    target_text: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoreReport> {
    let source = provider.embed_text(source_text)?;
    let target = provider.embed_text(target_text)?;
    let embed = |frames: &[RgbImage]| {
        frames
            .iter()
            .map(|f| provider.embed_image(f))
            .collect::<Result<Vec<_>>>()
    };
    text_image_direction_embeddings(&embed(orig)?, &embed(edited)?, &source, &target)
}

/// Scores gathered over several prompts, aggregated both ways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Mean over prompts of each prompt's mean over items.
    pub mean_of_prompt_means: f64,
    /// Mean over all items of all prompts.
    pub pooled_mean: f64,
}

pub fn aggregate(per_prompt: &[ScoreReport]) -> Option<Aggregates> {
    let items: Vec<f64> = per_prompt.iter().flat_map(|r| r.items.iter().copied()).collect();
    if per_prompt.is_empty() || items.is_empty() {
        return None;
    }
    Some(Aggregates {
        mean_of_prompt_means: per_prompt.iter().map(|r| r.mean).sum::<f64>() / per_prompt.len() as f64,
        pooled_mean: items.iter().sum::<f64>() / items.len() as f64,
    })
}

/// Error of one warp `src -> dst`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub src: ViewId,
    pub dst: ViewId,
    /// Pixels in the destination mask that see the source.
    pub pixels: usize,
    /// Mean absolute difference in 8-bit levels, averaged over channels;
    /// `None` without overlap.
    pub mean_l1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReprojectionReport {
    pub pairs: Vec<PairError>,
    /// Unweighted mean over pairs with overlap.
    pub mean: Option<f64>,
    /// Mean over all overlapping pixels of all pairs.
    pub pixel_weighted_mean: Option<f64>,
}

/// Warps `src` (holding an edited image) into `dst` and averages the
/// absolute difference over `dst_mask ∧ visible`.
pub fn pair_error(src: &CameraView, dst: &CameraView, dst_mask: &Mask, tol: &DepthTolerance) -> Result<(usize, f64)> {
    let rep = reproject_view(src, &dst.camera, dst.distance()?, tol)?;
    if dst_mask.dims() != dst.image.dims() {
        return Err(Error::config(format!("view {}: mask does not match image", dst.id)));
    }
    let mut n = 0;
    let mut sum = 0.0;
    for (x, y, &m) in dst_mask.pixels() {
        if !m || !*rep.visibility.get(x, y) {
            continue;
        }
        let a = dst.image.get(x, y);
        let b = rep.image.get(x, y);
        sum += (0..3).map(|c| (a[c] as f64 - 255.0 * b[c]).abs()).sum::<f64>() / 3.0;
        n += 1;
    }
    Ok((n, sum))
}

/// Masked reprojection error over consecutive entries of `sequence`, in both
/// directions. Views carry the edited images and their distance maps;
/// `masks[i]` belongs to `views[i]`.
pub fn masked_reprojection_error(
    views: &[CameraView],
    masks: &[Mask],
    sequence: &[ViewId],
    tol: &DepthTolerance,
) -> Result<ReprojectionReport> {
    if views.len() != masks.len() {
        return Err(Error::Argument(format!(
            "{} views but {} masks",
            views.len(),
            masks.len()
        )));
    }
    let index = |id: ViewId| {
        views
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| Error::config(format!("view {id} not in scene")))
    };
    let mut pairs = Vec::new();
    let (mut total_n, mut total_sum) = (0usize, 0.0);
    for w in sequence.windows(2) {
        let (a, b) = (index(w[0])?, index(w[1])?);
        for (s, d) in [(a, b), (b, a)] {
            let (n, sum) = pair_error(&views[s], &views[d], &masks[d], tol)?;
            total_n += n;
            total_sum += sum;
            pairs.push(PairError {
                src: views[s].id,
                dst: views[d].id,
                pixels: n,
                mean_l1: (n > 0).then(|| sum / n as f64),
            });
        }
    }
    let defined: Vec<f64> = pairs.iter().filter_map(|p| p.mean_l1).collect();
    Ok(ReprojectionReport {
        mean: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        pixel_weighted_mean: (total_n > 0).then(|| total_sum / total_n as f64),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;

    #[test]
    fn policy_cases() {
        assert_eq!(policy_cosine(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(policy_cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(policy_cosine(&[2.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(policy_cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn toy_consistency() {
        let o = vec![vec![0.0, 0.0]; 3];
        let e = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = direction_consistency_embeddings(&o, &e).unwrap();
        assert_eq!(r.items, vec![1.0, 0.0]);
        assert_eq!(r.mean, 0.5);
    }

    #[test]
    fn consistency_argument_errors() {
        let o = vec![vec![0.0]; 3];
        assert!(matches!(
            direction_consistency_embeddings(&o, &o[..2]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            direction_consistency_embeddings(&o[..1], &o[..1]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn unchanged_frames_score_one() {
        let frames: Vec<RgbImage> = (0..3)
            .map(|i| Grid::from_fn(16, 16, |x, y| [(x * i) as u8, y as u8, 9]))
            .collect();
        let r = direction_consistency(&frames, &frames, &SurrogateProvider).unwrap();
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn same_text_scores_zero() {
        let a = vec![Grid::new(16, 16, [10u8, 10, 10])];
        let b = vec![Grid::new(16, 16, [90u8, 10, 10])];
        let r = text_image_direction_similarity(&a, &b, "a dog", "a dog", &SurrogateProvider).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn surrogate_embeddings() {
        let img = Grid::from_fn(16, 16, |x, _| if x < 8 { [255u8, 0, 0] } else { [0, 0, 255] });
        let e = SurrogateProvider.embed_image(&img).unwrap();
        assert_eq!(e.len(), SURROGATE_DIM);
        assert_eq!(&e[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&e[21..24], &[0.0, 0.0, 1.0]);
        let t = SurrogateProvider.embed_text("a cat").unwrap();
        assert_eq!(t.len(), SURROGATE_DIM);
        assert_eq!(t, SurrogateProvider.embed_text("a cat").unwrap());
        assert_ne!(t, SurrogateProvider.embed_text("a dog").unwrap());
        assert!(SurrogateProvider.embed_image(&Grid::new(4, 4, [0u8; 3])).is_err());
    }

    struct ImageOnly;

    impl EmbeddingProvider for ImageOnly {
        fn id(&self) -> &str {
            "image-only"
        }
        fn embed_image(&self, _: &RgbImage) -> Result<Vec<f64>> {
            Ok(vec![1.0])
        }
    }

    #[test]
    fn missing_text_encoder_is_capability_error() {
        let f = vec![Grid::new(8, 8, [0u8; 3])];
        assert!(matches!(
            text_image_direction_similarity(&f, &f, "a", "b", &ImageOnly),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn aggregations_differ_with_uneven_counts() {
        let a = ScoreReport::from_items(vec![1.0]);
        let b = ScoreReport::from_items(vec![0.0, 0.0, 0.0]);
        let agg = aggregate(&[a, b]).unwrap();
        assert_eq!(agg.mean_of_prompt_means, 0.5);
        assert_eq!(agg.pooled_mean, 0.25);
        assert!(aggregate(&[]).is_none());
    }
}
