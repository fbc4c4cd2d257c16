//! Editor backend contract.
//!
//! A backend receives an initial image, a normalized disparity map and a
//! per-step mask schedule, and returns the edited image. Whatever happens
//! under the masks is up to the backend, but pixels not covered by any
//! schedule entry must come back unchanged.

mod mock;
mod remote;
pub mod wire;

pub use mock::{procedural_target, MockBackend};
pub use remote::{RemoteBackend, RemoteConfig};

use serde::Serialize;
use thiserror::Error;

use crate::raster::{Grid, Mask, RgbImage};
use crate::schedule::MaskSchedule;

pub const DEFAULT_GUIDANCE: f64 = 7.5;
pub const DEFAULT_CONTROL_SCALE: f64 = 0.5;
pub const DEFAULT_NOISE_STRENGTH: (f64, f64) = (0.8, 0.98);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Connection, timeout or server-side failure; worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    /// The peer sent something that violates the wire protocol.
    #[error("protocol error{}: {message}", field.as_ref().map(|f| format!(" at `{f}`")).unwrap_or_default())]
    Protocol { field: Option<String>, message: String },
    /// Request refused before transmission (size limits, invalid request).
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl BackendError {
    pub fn protocol(field: impl Into<String>, message: impl Into<String>) -> Self {
        BackendError::Protocol {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditRequest {
    pub init_image: RgbImage,
    /// Disparity normalized to `[0, 1]`.
    pub disparity: Grid<f64>,
    pub schedule: MaskSchedule,
    pub prompt: String,
    pub negative_prompt: String,
    pub guidance: f64,
    pub control_scale: f64,
    pub seed: u64,
    /// Opaque noise range for diffusion services; the mock ignores it.
    pub noise_strength: (f64, f64),
}

impl EditRequest {
    pub fn steps(&self) -> usize {
        self.schedule.total_steps()
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let dims = self.init_image.dims();
        if self.disparity.dims() != dims || self.schedule.dims() != dims {
            return Err(BackendError::Rejected(format!(
                "raster dimensions disagree: init {:?}, disparity {:?}, schedule {:?}",
                dims,
                self.disparity.dims(),
                self.schedule.dims()
            )));
        }
        if !(self.guidance > 0.0) {
            return Err(BackendError::Rejected("guidance must be > 0".into()));
        }
        let (lo, hi) = self.noise_strength;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(BackendError::Rejected(format!(
                "noise strength range [{lo}, {hi}] invalid"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EditResponse {
    #[serde(skip)]
    pub image: RgbImage,
    pub backend_id: String,
    pub steps_run: usize,
    pub seed_used: u64,
    pub warnings: Vec<String>,
}

pub trait EditorBackend {
    fn id(&self) -> &str;

    /// Whether the backend honors `EditRequest::seed`.
    fn deterministic(&self) -> bool;

    fn edit(&self, request: &EditRequest) -> Result<EditResponse, BackendError>;
}

/// Outcome of [`enforce_outside_region`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ContractReport {
    /// Pixels outside the region that differed from the reference.
    pub violations: usize,
    /// Violations farther than the edge tolerance from the region.
    pub beyond_tolerance: usize,
}

/// Restores `reference` pixels outside `region` in `output`.
///
/// Differences within `edge_tolerance_px` (Chebyshev distance) of the region
/// are counted separately: latent-space backends bleed slightly across mask
/// edges.
pub fn enforce_outside_region(
    reference: &RgbImage,
    region: &Mask,
    output: &mut RgbImage,
    edge_tolerance_px: usize,
) -> ContractReport {
    let band = region.dilate(edge_tolerance_px);
    let mut report = ContractReport::default();
    for i in 0..output.len() {
        if region.data()[i] {
            continue;
        }
        let want = reference.data()[i];
        let got = &mut output.data_mut()[i];
        if *got != want {
            report.violations += 1;
            if !band.data()[i] {
                report.beyond_tolerance += 1;
            }
            *got = want;
        }
    }
    report
}
