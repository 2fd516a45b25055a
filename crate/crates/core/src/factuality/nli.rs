use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::retry::RetryPolicy;

/// Three-way NLI label. Wire names are `entail`, `contradict`, `neutral`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entail,
    Contradict,
    Neutral,
}

impl NliLabel {
    /// Position in the `[entail, contradict, neutral]` score triple.
    pub fn score_index(self) -> usize {
        match self {
            NliLabel::Entail => 0,
            NliLabel::Contradict => 1,
            NliLabel::Neutral => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entail => "entail",
            NliLabel::Contradict => "contradict",
            NliLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entail" | "entailment" => Ok(NliLabel::Entail),
            "contradict" | "contradiction" | "contr." => Ok(NliLabel::Contradict),
            "neutral" => Ok(NliLabel::Neutral),
            other => Err(Error::arg(format!("unknown NLI label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    /// Probabilities in `[entail, contradict, neutral]` order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<[f64; 3]>,
}

impl NliVerdict {
    pub fn label(label: NliLabel) -> Self {
        Self {
            label,
            scores: None,
        }
    }

    pub fn with_scores(scores: [f64; 3]) -> Result<Self> {
        let label = [NliLabel::Entail, NliLabel::Contradict, NliLabel::Neutral]
            .into_iter()
            .max_by(|a, b| scores[a.score_index()].total_cmp(&scores[b.score_index()]))
            .expect("three labels");
        let v = Self {
            label,
            scores: Some(scores),
        };
        v.validate()?;
        Ok(v)
    }

    pub fn is_entail(&self) -> bool {
        self.label == NliLabel::Entail
    }

    /// Scores, when present, are a probability triple whose argmax is the label.
    pub fn validate(&self) -> Result<()> {
        let Some(s) = self.scores else {
            return Ok(());
        };
        if s.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::arg("NLI scores must be finite and nonnegative"));
        }
        if (s.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::arg("NLI scores must sum to 1"));
        }
        let own = s[self.label.score_index()];
        if s.iter().any(|&p| p > own) {
            return Err(Error::arg("NLI label is not the argmax of its scores"));
        }
        Ok(())
    }
}

/// Anything that can judge whether `premise` entails `hypothesis`.
pub trait NliBackend: Send + Sync {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError>;
}

impl<B: NliBackend + ?Sized> NliBackend for &B {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError> {
        (**self).infer(premise, hypothesis)
    }
}

impl<B: NliBackend + ?Sized> NliBackend for Box<B> {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError> {
        (**self).infer(premise, hypothesis)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NliResponse {
    pub label: NliLabel,
    #[serde(default)]
    pub scores: Option<[f64; 3]>,
}

impl NliResponse {
    pub fn into_verdict(self) -> std::result::Result<NliVerdict, BackendError> {
        let v = NliVerdict {
            label: self.label,
            scores: self.scores,
        };
        v.validate()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        Ok(v)
    }
}

/// Client for a remote NLI service: `POST {base}/nli` with JSON bodies.
pub struct HttpNliClient {
    url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpNliClient {
    pub fn new(base_url: &str, retry: RetryPolicy, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: format!("{}/nli", base_url.trim_end_matches('/')),
            agent,
            retry,
        }
    }

    fn call(&self, req: &NliRequest) -> std::result::Result<NliVerdict, BackendError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(req)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Protocol(format!("HTTP {status}: {body}")));
        }
        let parsed: NliResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        parsed.into_verdict()
    }
}

impl NliBackend for HttpNliClient {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError> {
        let req = NliRequest {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        self.retry.run(|| self.call(&req))
    }
}
