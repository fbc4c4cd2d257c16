//! Geometry and orchestration for depth-aware, text-driven editing of
//! multi-view image sets.
//!
//! The crate takes calibrated views (RGB image, per-pixel ray distance, object
//! mask), fuses the masks through a scored 3D point cloud, propagates edits
//! between views with depth-tested backward warping, and drives an editor
//! backend with per-step inpainting mask schedules. The diffusion model itself
//! sits behind [`backend::EditorBackend`]; a deterministic mock and an HTTP
//! client are provided.
//!
//! Conventions used throughout:
//! - cameras are world-to-camera rigid transforms, +X right, +Y down, +Z forward;
//! - pixel `(u, v)` addresses column `u`, row `v`, with pixel centers at integer
//!   coordinates;
//! - distance maps store distance along the viewing ray, depth maps store the
//!   z-coordinate in the camera frame.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod codec;
pub mod error;
pub mod geometry;
pub mod guided;
pub mod masks;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod schedule;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraModel, CameraView, DepthTolerance, ViewId};
pub use raster::{Grid, Mask, RgbImage};
