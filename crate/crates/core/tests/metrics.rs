use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use mvedit::metrics::{
    direction_consistency, direction_consistency_embeddings, masked_reprojection_error, policy_cosine,
    text_image_direction_embeddings, text_image_direction_similarity, EmbeddingProvider, RemoteProvider,
    SurrogateProvider,
};
use mvedit::synth::{render_scene, SceneSpec};
use mvedit::{CameraView, DepthTolerance, Error, Grid, Mask, RgbImage, ViewId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(n: u32) -> Vec<ViewId> {
    (0..n).map(ViewId).collect()
}

fn full_masks(views: &[CameraView]) -> Vec<Mask> {
    views
        .iter()
        .map(|v| Mask::new(v.image.width(), v.image.height(), true))
        .collect()
}

/// `n` copies of one camera and distance map with independent images.
fn duplicate_views(n: u32, seed: u64) -> Vec<CameraView> {
    let mut spec = SceneSpec::plane_disk(1);
    spec.cameras.width = 120;
    spec.cameras.height = 90;
    let base = render_scene(&spec).unwrap().views.remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| CameraView {
            id: ViewId(i),
            image: Grid::from_fn(120, 90, |_, _| [rng.gen(), rng.gen(), rng.gen()]),
            ..base.clone()
        })
        .collect()
}

#[test]
fn ground_truth_renders_sit_at_the_resampling_floor() {
    let scene = render_scene(&SceneSpec::plane_disk(8)).unwrap();
    let report = masked_reprojection_error(&scene.views, &scene.gt_masks, &ids(8), &DepthTolerance::default()).unwrap();
    assert_eq!(report.pairs.len(), 14);
    let mean = report.mean.unwrap();
    assert!(mean <= 1.5, "mean {mean}");
    assert!(report.pairs.iter().all(|p| p.pixels > 0));
}

#[test]
fn independent_random_images_give_uniform_difference() {
    let views = duplicate_views(6, 5);
    let report = masked_reprojection_error(&views, &full_masks(&views), &ids(6), &DepthTolerance::default()).unwrap();
    let mean = report.mean.unwrap();
    // E|U - U'| for independent uniforms on 0..=255 is (256^2 - 1) / (3 * 256).
    let expect = (256.0 * 256.0 - 1.0) / 768.0;
    assert!((mean - expect).abs() <= 5.0, "mean {mean}, expected about {expect}");
}

#[test]
fn identical_overlap_gives_zero_and_one_change_gives_positive() {
    let mut views = duplicate_views(3, 9);
    let shared = views[0].image.clone();
    for v in &mut views {
        v.image = shared.clone();
    }
    let masks = full_masks(&views);
    let tol = DepthTolerance::default();
    let r = masked_reprojection_error(&views, &masks, &ids(3), &tol).unwrap();
    assert_eq!(r.mean, Some(0.0));
    assert_eq!(r.pixel_weighted_mean, Some(0.0));
    let p = views[1].image.get_mut(60, 45);
    p[0] = p[0].wrapping_add(100);
    let r = masked_reprojection_error(&views, &masks, &ids(3), &tol).unwrap();
    assert!(r.mean.unwrap() > 0.0);
    assert!(r.pairs.iter().all(|p| p.mean_l1.unwrap() >= 0.0));
}

#[test]
fn no_overlap_is_reported_as_absent() {
    let views = duplicate_views(2, 1);
    let masks = vec![Mask::new(120, 90, false); 2];
    let r = masked_reprojection_error(&views, &masks, &ids(2), &DepthTolerance::default()).unwrap();
    assert_eq!(r.mean, None);
    assert_eq!(r.pixel_weighted_mean, None);
    assert!(r.pairs.iter().all(|p| p.mean_l1.is_none() && p.pixels == 0));
}

#[test]
fn length_mismatch_is_argument_error() {
    let img = RgbImage::new(8, 8, [1, 2, 3]);
    let err = direction_consistency(&[img.clone(), img.clone()], &[img], &SurrogateProvider).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
}

/// Embeds images as their mean color and texts by a lookup table.
struct Toy(HashMap<&'static str, Vec<f64>>);

impl EmbeddingProvider for Toy {
    fn id(&self) -> &str {
        "toy"
    }
    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f64>, Error> {
        let n = image.len() as f64;
        Ok((0..3)
            .map(|c| image.data().iter().map(|p| p[c] as f64).sum::<f64>() / n)
            .collect())
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, Error> {
        Ok(self.0[text].clone())
    }
}

#[test]
fn image_delta_parallel_to_text_delta_scores_one() {
    let toy = Toy(HashMap::from([
        ("dog", vec![0.0, 0.0, 0.0]),
        ("red dog", vec![2.0, 0.0, 0.0]),
    ]));
    let orig = vec![RgbImage::new(4, 4, [10, 20, 30]), RgbImage::new(4, 4, [50, 50, 50])];
    let edited = vec![RgbImage::new(4, 4, [90, 20, 30]), RgbImage::new(4, 4, [51, 50, 50])];
    let r = text_image_direction_similarity(&orig, &edited, "dog", "red dog", &toy).unwrap();
    assert!((r.mean - 1.0).abs() < 1e-12);
    let r = text_image_direction_similarity(&orig, &edited, "dog", "dog", &toy).unwrap();
    assert_eq!(r.items, vec![0.0, 0.0]);
}

#[test]
fn surrogate_scores_on_rendered_frames() {
    let scene = render_scene(&SceneSpec::plane_disk(4)).unwrap();
    let orig: Vec<RgbImage> = scene.views.iter().map(|v| v.image.clone()).collect();
    let tinted: Vec<RgbImage> = orig
        .iter()
        .map(|im| im.map(|p| [p[0].saturating_add(40), p[1], p[2]]))
        .collect();
    let r = direction_consistency(&orig, &tinted, &SurrogateProvider).unwrap();
    assert!(r.mean > 0.9 && r.mean <= 1.0 + 1e-12, "{}", r.mean);
    assert_eq!(
        direction_consistency(&orig, &orig, &SurrogateProvider).unwrap().mean,
        1.0
    );
    let t = text_image_direction_similarity(&orig, &tinted, "a plane", "a red plane", &SurrogateProvider).unwrap();
    assert!(t.items.iter().all(|s| (-1.0..=1.0).contains(s)));
}

fn vecs(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n)
}

proptest! {
    #[test]
    fn scores_bounded_symmetric_and_scale_invariant(
        orig in vecs(4, 5),
        edited in vecs(4, 5),
        src in prop::collection::vec(-5.0f64..5.0, 5),
        dst in prop::collection::vec(-5.0f64..5.0, 5),
        k in 0.01f64..100.0,
    ) {
        let a = direction_consistency_embeddings(&orig, &edited).unwrap();
        let swapped = direction_consistency_embeddings(&edited, &orig).unwrap();
        for (x, y) in a.items.iter().zip(&swapped.items) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(x));
        }
        let scale = |v: &Vec<Vec<f64>>| v.iter().map(|e| e.iter().map(|x| x * k).collect()).collect::<Vec<Vec<f64>>>();
        let scaled = direction_consistency_embeddings(&scale(&orig), &scale(&edited)).unwrap();
        prop_assert!((scaled.mean - a.mean).abs() < 1e-9);
        let t = text_image_direction_embeddings(&orig, &edited, &src, &dst).unwrap();
        let ts = text_image_direction_embeddings(&scale(&orig), &scale(&edited), &src, &dst).unwrap();
        prop_assert!((t.mean - ts.mean).abs() < 1e-9);
        prop_assert!(t.items.iter().all(|s| (-1.0 - 1e-12..=1.0 + 1e-12).contains(s)));
    }

    #[test]
    fn cosine_policy_is_symmetric(a in prop::collection::vec(-3.0f64..3.0, 4), b in prop::collection::vec(-3.0f64..3.0, 4)) {
        prop_assert!((policy_cosine(&a, &b).unwrap() - policy_cosine(&b, &a).unwrap()).abs() < 1e-12);
    }
}

/// Embedding service answering images with their byte length and refusing
/// text with 501.
fn serve_embeddings() -> (String, thread::JoinHandle<()>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let handle = thread::spawn(move || {
        for _ in 0..2 {
            let Ok(mut req) = server.recv() else { return };
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let v: serde_json::Value = serde_json::from_str(&body).unwrap();
            let resp = match v["kind"].as_str() {
                Some("image") => {
                    let len = v["png"].as_str().unwrap().len() as f64;
                    tiny_http::Response::from_string(format!("{{\"embedding\": [{len}, 1.0]}}"))
                }
                _ => tiny_http::Response::from_string("no text encoder").with_status_code(501),
            };
            req.respond(resp).unwrap();
        }
    });
    (url, handle)
}

#[test]
fn remote_provider_protocol() {
    let (url, handle) = serve_embeddings();
    let p = RemoteProvider::new(url, Duration::from_secs(5));
    let e = p.embed_image(&RgbImage::new(4, 4, [1, 2, 3])).unwrap();
    assert_eq!(e.len(), 2);
    assert!(e[0] > 0.0);
    assert!(matches!(p.embed_text("hello"), Err(Error::Capability(_))));
    handle.join().unwrap();
}
