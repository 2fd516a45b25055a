use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GenerationBackend;
use crate::error::BackendError;

/// Body of `POST /generate`. Extra decoding parameters are passed through
/// untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub source: String,
    pub max_new_tokens: usize,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

pub struct HttpGenerationClient {
    url: String,
    backend_id: String,
    params: serde_json::Map<String, serde_json::Value>,
    agent: ureq::Agent,
}

impl HttpGenerationClient {
    pub fn new(base_url: &str, backend_id: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: format!("{}/generate", base_url.trim_end_matches('/')),
            backend_id: backend_id.into(),
            params: serde_json::Map::new(),
            agent,
        }
    }

    /// Decoding parameters (beam size etc.) merged into every request body.
    pub fn with_params(mut self, params: serde_json::Map<String, serde_json::Value>) -> Self {
        self.params = params;
        self
    }
}

impl GenerationBackend for HttpGenerationClient {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn generate(&self, source: &str, max_new_tokens: usize) -> Result<String, BackendError> {
        let body = GenerateRequest {
            source: source.to_string(),
            max_new_tokens,
            params: self.params.clone(),
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Protocol(format!("HTTP {status}: {body}")));
        }
        let parsed: GenerateResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        Ok(parsed.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let mut params = serde_json::Map::new();
        params.insert("num_beams".into(), 4.into());
        let body = GenerateRequest {
            source: "s:conv </s> q: x </s> p0: y </s>".into(),
            max_new_tokens: 32,
            params,
        };
        assert_eq!(
            serde_json::to_string(&body).unwrap(),
            r#"{"source":"s:conv </s> q: x </s> p0: y </s>","max_new_tokens":32,"num_beams":4}"#
        );
        let r: GenerateResponse = serde_json::from_str(r#"{"text":"p0: y"}"#).unwrap();
        assert_eq!(r.text, "p0: y");
    }
}
