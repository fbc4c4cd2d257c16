use std::io::Read;
use std::time::Duration;

use log::warn;

use super::wire::{self, Health};
use super::{enforce_outside_region, BackendError, EditRequest, EditResponse, EditorBackend};

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after a retriable failure.
    pub retries: usize,
    /// Largest `width * height` sent over the wire.
    pub max_pixels: usize,
    /// Outside-mask deviations within this many pixels of a mask edge are
    /// clamped without being reported as contract violations.
    pub edge_tolerance_px: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(120),
            retries: 2,
            max_pixels: 2048 * 2048,
            edge_tolerance_px: 2,
        }
    }
}

/// HTTP client for services speaking the JSON edit protocol.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    id: String,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let id = format!("remote:{}", config.endpoint);
        Self { config, agent, id }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    pub fn health(&self) -> Result<Health, BackendError> {
        let resp = self.agent.get(&self.url("healthz")).call().map_err(map_ureq)?;
        let body = read_body(resp)?;
        let health: Health = serde_json::from_slice(&body).map_err(|e| BackendError::Protocol {
            field: None,
            message: format!("healthz: {e}"),
        })?;
        if health.status != "ok" {
            return Err(BackendError::protocol(
                "status",
                format!("service reports {:?}", health.status),
            ));
        }
        Ok(health)
    }

    fn post_once(&self, body: &str) -> Result<Vec<u8>, BackendError> {
        let resp = self
            .agent
            .post(&self.url("edit"))
            .set("Content-Type", "application/json")
            .send_string(body)
            .map_err(map_ureq)?;
        read_body(resp)
    }
}

fn read_body(resp: ureq::Response) -> Result<Vec<u8>, BackendError> {
    let mut body = Vec::new();
    resp.into_reader()
        .read_to_end(&mut body)
        .map_err(|e| BackendError::Transport(format!("reading response: {e}")))?;
    Ok(body)
}

fn map_ureq(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Status(code, resp) => {
            let body = read_body(resp).unwrap_or_default();
            let detail = wire::decode_error(&body);
            let message = detail
                .as_ref()
                .map(|d| format!("{} ({})", d.message, d.code))
                .unwrap_or_else(|| format!("HTTP {code}"));
            if code >= 500 || code == 429 {
                BackendError::Transport(format!("HTTP {code}: {message}"))
            } else {
                BackendError::Protocol {
                    field: detail.and_then(|d| d.field),
                    message: format!("HTTP {code}: {message}"),
                }
            }
        }
        ureq::Error::Transport(t) => BackendError::Transport(t.to_string()),
    }
}

impl EditorBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn edit(&self, request: &EditRequest) -> Result<EditResponse, BackendError> {
        let dims = request.init_image.dims();
        if dims.0 * dims.1 > self.config.max_pixels {
            return Err(BackendError::Rejected(format!(
                "image {}x{} exceeds limit of {} pixels",
                dims.0, dims.1, self.config.max_pixels
            )));
        }
        let body = serde_json::to_string(&wire::encode_request(request)?)
            .map_err(|e| BackendError::Rejected(e.to_string()))?;

        let mut attempt = 0;
        let raw = loop {
            match self.post_once(&body) {
                Ok(raw) => break raw,
                Err(e) if e.is_retriable() && attempt < self.config.retries => {
                    attempt += 1;
                    warn!("edit request failed ({e}), retry {attempt}/{}", self.config.retries);
                }
                Err(e) => return Err(e),
            }
        };

        let mut response = wire::decode_response(&raw, dims)?;
        response.backend_id = self.id.clone();
        let region = request.schedule.union();
        let report = enforce_outside_region(
            &request.init_image,
            &region,
            &mut response.image,
            self.config.edge_tolerance_px,
        );
        if report.beyond_tolerance > 0 {
            response.warnings.push(format!(
                "backend changed {} pixels outside the schedule masks; restored",
                report.beyond_tolerance
            ));
        }
        Ok(response)
    }
}
