use sha2::{Digest, Sha256};

use super::{BackendError, EditRequest, EditResponse, EditorBackend};
use crate::raster::{quantize_level, Grid};

/// Deterministic stand-in for a diffusion editor.
///
/// Each pixel is blended toward a procedural target in proportion to the
/// number of schedule steps whose mask covers it:
/// `out = (1 - k/T) * init + (k/T) * P`, quantized half up. The target
/// `P_c = 0.5 + 0.5 sin(2 pi (f_c * disparity + phi_c))` depends on the
/// prompt, seed and channel through a SHA-256 digest, so distinct prompts
/// produce distinct targets. This reproduces the schedule semantics of
/// blended inpainting exactly, not its image quality.
#[derive(Clone, Debug, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn new() -> Self {
        Self
    }
}

/// `(frequency in [1, 8), phase in [0, 1))` for one channel.
pub fn channel_params(prompt: &str, seed: u64, channel: u8) -> (f64, f64) {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update([channel]);
    let digest = h.finalize();
    let hi = u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]]);
    let lo = u32::from_le_bytes([digest[4], digest[5], digest[6], digest[7]]);
    let unit = |v: u32| v as f64 / 4_294_967_296.0;
    (1.0 + 7.0 * unit(hi), unit(lo))
}

/// Procedural target in `[0, 1]` per channel.
pub fn procedural_target(disparity: &Grid<f64>, prompt: &str, seed: u64) -> Grid<[f64; 3]> {
    let params: [(f64, f64); 3] = [0u8, 1, 2].map(|c| channel_params(prompt, seed, c));
    disparity.map(|&d| params.map(|(f, phi)| 0.5 + 0.5 * (std::f64::consts::TAU * (f * d + phi)).sin()))
}

impl EditorBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn edit(&self, request: &EditRequest) -> Result<EditResponse, BackendError> {
        request.validate()?;
        let total = request.steps() as f64;
        let active = request.schedule.active_steps();
        let target = procedural_target(&request.disparity, &request.prompt, request.seed);
        let mut image = request.init_image.clone();
        for (i, px) in image.data_mut().iter_mut().enumerate() {
            let k = active.data()[i];
            if k == 0 {
                continue;
            }
            let w = k as f64 / total;
            let p = target.data()[i];
            for c in 0..3 {
                px[c] = quantize_level((1.0 - w) * px[c] as f64 + w * 255.0 * p[c]);
            }
        }
        Ok(EditResponse {
            image,
            backend_id: self.id().to_string(),
            steps_run: request.steps(),
            seed_used: request.seed,
            warnings: Vec::new(),
        })
    }
}
