//! JSON wire protocol for remote editor services.
//!
//! `POST /edit` takes a [`WireRequest`] and answers `200` with a
//! [`WireResponse`] or `4xx`/`5xx` with a [`WireErrorBody`].
//! `GET /healthz` answers [`Health`]. Rasters travel as base64: PNG for
//! images and masks (masks 8-bit gray, 255 = inside), single-channel PFM for
//! the disparity.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, EditRequest, EditResponse};
use crate::codec;
use crate::schedule::{MaskSchedule, ScheduleEntry};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireScheduleEntry {
    pub lo: usize,
    pub hi: usize,
    pub mask_png: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub version: String,
    pub prompt: String,
    pub negative_prompt: String,
    pub guidance: f64,
    pub control_scale: f64,
    pub seed: u64,
    pub steps: usize,
    pub noise_strength: [f64; 2],
    pub init_png: String,
    pub disparity_pfm: String,
    pub schedule: Vec<WireScheduleEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub image_png: String,
    pub steps_run: usize,
    pub seed_used: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireErrorBody {
    pub error: WireError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend_id: String,
}

fn encode_err(e: crate::Error) -> BackendError {
    BackendError::Rejected(e.to_string())
}

pub fn encode_request(req: &EditRequest) -> Result<WireRequest, BackendError> {
    req.validate()?;
    let schedule = req
        .schedule
        .entries()
        .iter()
        .map(|e| {
            Ok(WireScheduleEntry {
                lo: e.lo,
                hi: e.hi,
                mask_png: STANDARD.encode(codec::encode_png_mask(&e.mask).map_err(encode_err)?),
            })
        })
        .collect::<Result<_, BackendError>>()?;
    Ok(WireRequest {
        version: PROTOCOL_VERSION.to_string(),
        prompt: req.prompt.clone(),
        negative_prompt: req.negative_prompt.clone(),
        guidance: req.guidance,
        control_scale: req.control_scale,
        seed: req.seed,
        steps: req.steps(),
        noise_strength: [req.noise_strength.0, req.noise_strength.1],
        init_png: STANDARD.encode(codec::encode_png_rgb(&req.init_image).map_err(encode_err)?),
        disparity_pfm: STANDARD.encode(codec::encode_pfm(&req.disparity)),
        schedule,
    })
}

fn b64(field: &str, s: &str) -> Result<Vec<u8>, BackendError> {
    STANDARD
        .decode(s)
        .map_err(|e| BackendError::protocol(field, format!("invalid base64: {e}")))
}

/// Server-side decoding of a request, with field paths in errors.
pub fn decode_request(body: &[u8]) -> Result<EditRequest, BackendError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| BackendError::Protocol {
        field: None,
        message: format!("invalid JSON: {e}"),
    })?;
    let wire: WireRequest = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        // Missing fields are reported at the parent; name the field itself.
        let field = match message.split('`').nth(1) {
            Some(name) if message.starts_with("missing field") => {
                if path == "." {
                    name.to_string()
                } else {
                    format!("{path}.{name}")
                }
            }
            _ => path,
        };
        BackendError::Protocol {
            field: Some(field),
            message,
        }
    })?;
    if wire.version != PROTOCOL_VERSION {
        return Err(BackendError::protocol(
            "version",
            format!("unsupported version {:?}", wire.version),
        ));
    }
    let init_image = codec::decode_png_rgb(&b64("init_png", &wire.init_png)?)
        .map_err(|e| BackendError::protocol("init_png", e.to_string()))?;
    let disparity = codec::decode_pfm(&b64("disparity_pfm", &wire.disparity_pfm)?)
        .map_err(|e| BackendError::protocol("disparity_pfm", e.to_string()))?;
    let mut entries = Vec::with_capacity(wire.schedule.len());
    for (i, e) in wire.schedule.iter().enumerate() {
        let field = format!("schedule[{i}].mask_png");
        let mask = codec::decode_png_mask(&b64(&field, &e.mask_png)?)
            .map_err(|err| BackendError::protocol(field.clone(), err.to_string()))?;
        entries.push(ScheduleEntry {
            lo: e.lo,
            hi: e.hi,
            mask,
        });
    }
    let schedule =
        MaskSchedule::new(wire.steps, entries).map_err(|e| BackendError::protocol("schedule", e.to_string()))?;
    let req = EditRequest {
        init_image,
        disparity,
        schedule,
        prompt: wire.prompt,
        negative_prompt: wire.negative_prompt,
        guidance: wire.guidance,
        control_scale: wire.control_scale,
        seed: wire.seed,
        noise_strength: (wire.noise_strength[0], wire.noise_strength[1]),
    };
    req.validate().map_err(|e| BackendError::Protocol {
        field: None,
        message: e.to_string(),
    })?;
    Ok(req)
}

pub fn encode_response(resp: &EditResponse) -> Result<WireResponse, BackendError> {
    Ok(WireResponse {
        image_png: STANDARD.encode(codec::encode_png_rgb(&resp.image).map_err(encode_err)?),
        steps_run: resp.steps_run,
        seed_used: resp.seed_used,
        warnings: resp.warnings.clone(),
    })
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a Value, BackendError> {
    obj.get(name)
        .ok_or_else(|| BackendError::protocol(name, "missing field"))
}

/// Client-side validation of a `200` body against the response schema.
/// The returned response carries an empty `backend_id`.
pub fn decode_response(body: &[u8], expected_dims: (usize, usize)) -> Result<EditResponse, BackendError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| BackendError::Protocol {
        field: None,
        message: format!("invalid JSON: {e}"),
    })?;
    let obj = value.as_object().ok_or_else(|| BackendError::Protocol {
        field: None,
        message: "response is not an object".into(),
    })?;
    let image_b64 = field(obj, "image_png")?
        .as_str()
        .ok_or_else(|| BackendError::protocol("image_png", "expected string"))?;
    let image = codec::decode_png_rgb(&b64("image_png", image_b64)?)
        .map_err(|e| BackendError::protocol("image_png", e.to_string()))?;
    if image.dims() != expected_dims {
        return Err(BackendError::protocol(
            "image_png",
            format!("image is {:?}, request was {:?}", image.dims(), expected_dims),
        ));
    }
    let steps_run = field(obj, "steps_run")?
        .as_u64()
        .ok_or_else(|| BackendError::protocol("steps_run", "expected non-negative integer"))?
        as usize;
    let seed_used = field(obj, "seed_used")?
        .as_u64()
        .ok_or_else(|| BackendError::protocol("seed_used", "expected non-negative integer"))?;
    let warnings = field(obj, "warnings")?
        .as_array()
        .ok_or_else(|| BackendError::protocol("warnings", "expected array"))?
        .iter()
        .enumerate()
        .map(|(i, w)| {
            w.as_str()
                .map(str::to_string)
                .ok_or_else(|| BackendError::protocol(format!("warnings[{i}]"), "expected string"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EditResponse {
        image,
        backend_id: String::new(),
        steps_run,
        seed_used,
        warnings,
    })
}

/// Parses a `4xx`/`5xx` error body, tolerating non-conforming payloads.
pub fn decode_error(body: &[u8]) -> Option<WireError> {
    serde_json::from_slice::<WireErrorBody>(body).ok().map(|b| b.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{DEFAULT_CONTROL_SCALE, DEFAULT_GUIDANCE, DEFAULT_NOISE_STRENGTH};
    use crate::raster::Grid;
    use crate::schedule::build_hybrid_schedule;

    fn sample_request() -> EditRequest {
        let m = Grid::from_fn(6, 5, |x, _| x > 1);
        let vis = Grid::from_fn(6, 5, |x, _| x > 3);
        EditRequest {
            init_image: Grid::from_fn(6, 5, |x, y| [x as u8, y as u8, 200]),
            disparity: Grid::from_fn(6, 5, |x, y| (x * y) as f64 / 20.0),
            schedule: build_hybrid_schedule(&m, &vis, 5, 20).unwrap(),
            prompt: "a husky".into(),
            negative_prompt: "blurry".into(),
            guidance: DEFAULT_GUIDANCE,
            control_scale: DEFAULT_CONTROL_SCALE,
            seed: 42,
            noise_strength: DEFAULT_NOISE_STRENGTH,
        }
    }

    #[test]
    fn request_survives_the_wire() {
        let req = sample_request();
        let wire = encode_request(&req).unwrap();
        assert_eq!(wire.version, "1");
        assert_eq!(wire.steps, 20);
        assert_eq!(wire.schedule.len(), 2);
        let body = serde_json::to_vec(&wire).unwrap();
        let back = decode_request(&body).unwrap();
        assert_eq!(back.schedule, req.schedule);
        assert_eq!(back.init_image, req.init_image);
        assert_eq!(back.prompt, req.prompt);
        // PFM carries f32.
        for (a, b) in back.disparity.data().iter().zip(req.disparity.data()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn request_json_field_names() {
        let v = serde_json::to_value(encode_request(&sample_request()).unwrap()).unwrap();
        for key in [
            "version",
            "prompt",
            "negative_prompt",
            "guidance",
            "control_scale",
            "seed",
            "steps",
            "noise_strength",
            "init_png",
            "disparity_pfm",
            "schedule",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["schedule"][0].get("mask_png").is_some());
        assert_eq!(v["noise_strength"], serde_json::json!([0.8, 0.98]));
    }

    #[test]
    fn decode_request_reports_field_paths() {
        let mut wire = encode_request(&sample_request()).unwrap();
        wire.schedule[1].mask_png = "%%%".into();
        let err = decode_request(&serde_json::to_vec(&wire).unwrap()).unwrap_err();
        match err {
            BackendError::Protocol { field, .. } => assert_eq!(field.as_deref(), Some("schedule[1].mask_png")),
            other => panic!("unexpected {other:?}"),
        }
        let mut v = serde_json::to_value(encode_request(&sample_request()).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("prompt");
        match decode_request(&serde_json::to_vec(&v).unwrap()).unwrap_err() {
            BackendError::Protocol { field, .. } => assert_eq!(field.as_deref(), Some("prompt")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupted_image_names_field() {
        let body = serde_json::json!({
            "image_png": "not*base64!", "steps_run": 20, "seed_used": 1, "warnings": []
        });
        let err = decode_response(&serde_json::to_vec(&body).unwrap(), (6, 5)).unwrap_err();
        assert!(matches!(&err, BackendError::Protocol { field: Some(f), .. } if f == "image_png"));
    }

    #[test]
    fn response_schema_checks() {
        let img = Grid::from_fn(6, 5, |_, _| [1u8, 2, 3]);
        let resp = EditResponse {
            image: img.clone(),
            backend_id: String::new(),
            steps_run: 20,
            seed_used: 9,
            warnings: vec!["w".into()],
        };
        let body = serde_json::to_vec(&encode_response(&resp).unwrap()).unwrap();
        assert_eq!(decode_response(&body, (6, 5)).unwrap(), resp);
        assert!(matches!(
            decode_response(&body, (7, 5)),
            Err(BackendError::Protocol { field: Some(f), .. }) if f == "image_png"
        ));
        let mut v: Value = serde_json::from_slice(&body).unwrap();
        v["warnings"] = serde_json::json!([1]);
        assert!(matches!(
            decode_response(&serde_json::to_vec(&v).unwrap(), (6, 5)),
            Err(BackendError::Protocol { field: Some(f), .. }) if f == "warnings[0]"
        ));
    }
}
