use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};
use ureq::Agent;

use super::wire::{EmbedRequest, EmbedResponse, ErrorBody, InferResponse, InferenceRequest};
use super::GatewayError;
use crate::metrics::EmbeddingMatrix;

/// Bounded retries with exponential backoff. Timeouts, transport failures
/// and 5xx responses are retried; 4xx responses and bad bodies are not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub timeout_ms: u64,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            timeout_ms: 60_000,
            initial_backoff_ms: 250,
            backoff_multiplier: 2.0,
            max_backoff_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.backoff_multiplier.max(1.0).powi(attempt as i32);
        let ms = (self.initial_backoff_ms as f64 * factor).min(self.max_backoff_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

/// Anything that answers `/infer`-shaped requests.
pub trait ModelClient: Send + Sync {
    fn query_model(&self, request: &InferenceRequest) -> Result<String, GatewayError>;
}

/// Blocking HTTP client for one model server.
#[derive(Debug, Clone)]
pub struct InferenceClient {
    base_url: String,
    agent: Agent,
    retry: RetryPolicy,
}

enum Attempt<T> {
    Done(T),
    Retry(GatewayError),
    Fail(GatewayError),
}

impl InferenceClient {
    pub fn new(base_url: impl Into<String>, retry: RetryPolicy) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(retry.timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            retry,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    /// Single `GET /healthz`, no retries.
    pub fn health(&self) -> Result<(), GatewayError> {
        let url = format!("{}/healthz", self.base_url);
        match self.agent.get(&url).call() {
            Ok(resp) if resp.status().is_success() => Ok(()),
            Ok(resp) => Err(GatewayError::Status {
                code: resp.status().as_u16(),
                message: "health check failed".into(),
            }),
            Err(e) => Err(classify_transport(e, 1)),
        }
    }

    /// Sends the request to `/infer` and returns the `text` field verbatim.
    pub fn query_model(&self, request: &InferenceRequest) -> Result<String, GatewayError> {
        let resp: InferResponse = self.post_json("infer", request)?;
        Ok(resp.text)
    }

    /// Embeds each text via `/embed`. All returned matrices share one
    /// dimension; a row of the wrong width is a protocol error naming the
    /// offending batch index.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingMatrix<f64>>, GatewayError> {
        if texts.is_empty() || texts.iter().all(|t| t.trim().is_empty()) {
            return Err(GatewayError::Precondition("embed needs at least one non-empty text".into()));
        }
        let body = EmbedRequest {
            texts: texts.to_vec(),
        };
        let resp: EmbedResponse = self.post_json("embed", &body)?;
        decode_embeddings(resp, texts.len())
    }

    fn post_json<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, GatewayError> {
        let url = format!("{}/{path}", self.base_url);
        let attempts = self.retry.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.retry.backoff(attempt - 1));
            }
            match self.attempt(&url, body, attempt + 1) {
                Attempt::Done(value) => return Ok(value),
                Attempt::Fail(err) => return Err(err),
                Attempt::Retry(err) => {
                    debug!(%url, attempt = attempt + 1, error = %err, "retrying");
                    last = Some(err);
                }
            }
        }
        let err = last.expect("at least one attempt ran");
        warn!(%url, attempts, error = %err, "giving up");
        Err(err)
    }

    fn attempt<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B, attempt: u32) -> Attempt<R> {
        let mut resp = match self.agent.post(url).send_json(body) {
            Ok(resp) => resp,
            Err(e) => return Attempt::Retry(classify_transport(e, attempt)),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(text) => text,
            Err(e) => return Attempt::Retry(classify_transport(e, attempt)),
        };
        if !(200..300).contains(&status) {
            let message = serde_json::from_str::<ErrorBody>(&text)
                .map(|b| b.error)
                .unwrap_or(text);
            let err = GatewayError::Status { code: status, message };
            return if status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            };
        }
        match serde_json::from_str(&text) {
            Ok(value) => Attempt::Done(value),
            Err(e) => Attempt::Fail(GatewayError::MalformedBody(e.to_string())),
        }
    }
}

impl ModelClient for InferenceClient {
    fn query_model(&self, request: &InferenceRequest) -> Result<String, GatewayError> {
        InferenceClient::query_model(self, request)
    }
}

fn classify_transport(err: ureq::Error, attempts: u32) -> GatewayError {
    let timed_out = match &err {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(io) => matches!(
            io.kind(),
            std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
        ),
        _ => false,
    };
    if timed_out {
        GatewayError::Timeout { attempts }
    } else {
        GatewayError::Transport {
            attempts,
            message: err.to_string(),
        }
    }
}

fn decode_embeddings(resp: EmbedResponse, expected: usize) -> Result<Vec<EmbeddingMatrix<f64>>, GatewayError> {
    if resp.embeddings.len() != expected {
        return Err(GatewayError::Protocol(format!(
            "sent {expected} texts, got {} embeddings",
            resp.embeddings.len()
        )));
    }
    resp.embeddings
        .into_iter()
        .enumerate()
        .map(|(index, record)| {
            if let Some(row) = record.vectors.iter().find(|v| v.len() != resp.dim) {
                return Err(GatewayError::Protocol(format!(
                    "embedding {index} has dimension {}, batch dimension is {}",
                    row.len(),
                    resp.dim
                )));
            }
            EmbeddingMatrix::new(record.tokens, record.vectors)
                .map_err(|e| GatewayError::Protocol(format!("embedding {index}: {e}")))
        })
        .collect()
}
