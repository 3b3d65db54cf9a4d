//! HTTP client for an embedding service.
//!
//! Wire protocol (JSON, UTF-8):
//! - `POST /v1/embed` with `{"lines": [str, ...]}` answers
//!   `{"dim": int, "embeddings": [[float, ...], ...]}`
//! - `GET /v1/health` answers `{"status": "ok", "model": str, "dim": int}`

use super::{EncoderError, LineEmbedding};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use ureq::Agent;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub url: String,
    /// Expected embedding width. When unset it is read from `/v1/health`.
    pub dim: Option<usize>,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// Upper bound on concurrent requests in [`ServiceClient::embed_batches`].
    pub max_in_flight: usize,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

impl ServiceConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            dim: None,
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub model: Option<String>,
    pub dim: usize,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    lines: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ServiceClient {
    config: ServiceConfig,
    agent: Agent,
    dim: usize,
}

impl ServiceClient {
    /// Build a client; queries `/v1/health` when the config does not fix the dimension.
    pub fn connect(config: ServiceConfig) -> Result<Self, EncoderError> {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut client = Self {
            dim: config.dim.unwrap_or(0),
            config,
            agent,
        };
        if client.config.dim.is_none() {
            let health = client.health()?;
            if health.dim == 0 {
                return Err(EncoderError::Malformed("service reported dim 0".into()));
            }
            client.dim = health.dim;
        }
        Ok(client)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{path}", self.config.url.trim_end_matches('/'))
    }

    pub fn health(&self) -> Result<Health, EncoderError> {
        let mut resp = self
            .agent
            .get(&self.endpoint("/v1/health"))
            .call()
            .map_err(transport)?;
        check_status(&mut resp)?;
        resp.body_mut()
            .read_json()
            .map_err(|e| EncoderError::Malformed(e.to_string()))
    }

    /// Embed a non-empty batch of lines, one vector per line.
    pub fn embed(&self, lines: &[String]) -> Result<Vec<LineEmbedding>, EncoderError> {
        if lines.is_empty() {
            return Err(EncoderError::EmptyRequest);
        }
        let mut resp = self
            .agent
            .post(&self.endpoint("/v1/embed"))
            .send_json(EmbedRequest { lines })
            .map_err(transport)?;
        check_status(&mut resp)?;
        let body: EmbedResponse = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_json()
            .map_err(|e| EncoderError::Malformed(e.to_string()))?;

        if body.dim != self.dim {
            return Err(EncoderError::DimMismatch {
                expected: self.dim,
                found: body.dim,
            });
        }
        if body.embeddings.len() != lines.len() {
            return Err(EncoderError::Malformed(format!(
                "{} embeddings for {} lines",
                body.embeddings.len(),
                lines.len()
            )));
        }
        body.embeddings
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != body.dim {
                    return Err(EncoderError::DimMismatch {
                        expected: body.dim,
                        found: v.len(),
                    });
                }
                LineEmbedding::new(v).map_err(|_| EncoderError::NonFinite { line: i })
            })
            .collect()
    }

    /// Embed several batches with at most `max_in_flight` concurrent requests.
    /// Results keep the input order; the first failure is returned.
    pub fn embed_batches(
        &self,
        batches: &[Vec<String>],
    ) -> Result<Vec<Vec<LineEmbedding>>, EncoderError> {
        let workers = self.config.max_in_flight.max(1).min(batches.len().max(1));
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Vec<Mutex<Option<Result<Vec<LineEmbedding>, EncoderError>>>> =
            batches.iter().map(|_| Mutex::new(None)).collect();

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(batch) = batches.get(i) else { break };
                    let out = self.embed(batch);
                    if out.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    *slots[i].lock().unwrap() = Some(out);
                });
            }
        });

        let mut results = Vec::with_capacity(batches.len());
        let mut first_err = None;
        for slot in slots {
            match slot.into_inner().unwrap() {
                Some(Ok(v)) => results.push(v),
                Some(Err(e)) => {
                    first_err.get_or_insert(e);
                }
                None => {}
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(results),
        }
    }
}

fn transport(e: ureq::Error) -> EncoderError {
    match e {
        ureq::Error::Timeout(t) => EncoderError::Timeout(t.to_string()),
        other => EncoderError::Transport(other.to_string()),
    }
}

fn check_status(resp: &mut ureq::http::Response<ureq::Body>) -> Result<(), EncoderError> {
    let status = resp.status().as_u16();
    if status == 200 {
        return Ok(());
    }
    let body = resp.body_mut().read_to_string().unwrap_or_default();
    Err(EncoderError::Status { status, body })
}
