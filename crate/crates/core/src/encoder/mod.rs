//! Line encoders: turn every line of an email into a fixed-width vector.
//!
//! Three interchangeable backends sit behind [`EncoderBackend`]:
//! native hand-crafted features, a precomputed embedding file, and an HTTP
//! embedding service. Transformer embeddings are treated as frozen constants,
//! so the file backend reproduces them without any ML runtime.

pub mod features;
pub mod lemb;
pub mod service;

pub use features::{feature_vector, FEATURE_DIM};
pub use lemb::{load_embedding_file, write_embedding_file, EmbeddingFile, LembError, LembWriter};
pub use service::{ServiceClient, ServiceConfig};

use crate::email::Email;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;
use thiserror::Error;

/// Width of pooled transformer embeddings (four 768-wide layers).
pub const TRANSFORMER_DIM: usize = 3072;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error(transparent)]
    File(#[from] LembError),
    #[error("email {0:?} is not in the embedding index")]
    MissingId(String),
    #[error("email {id:?} has {expected} lines but the embedding index holds {found} rows")]
    LineCountMismatch {
        id: String,
        expected: usize,
        found: u64,
    },
    #[error("embedding request needs at least one line")]
    EmptyRequest,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("service answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed service response: {0}")]
    Malformed(String),
    #[error("embedding dimension {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value in embedding of line {line}")]
    NonFinite { line: usize },
    #[error("bad encoder spec {0:?} (expected features, file:<path> or service:<url>)")]
    BadSpec(String),
}

/// One line's vector. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEmbedding(Vec<f64>);

impl LineEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self, Vec<f64>> {
        if values.iter().all(|x| x.is_finite()) {
            Ok(Self(values))
        } else {
            Err(values)
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LineEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Features,
    File,
    Service,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Features => "features",
            EncoderKind::File => "file",
            EncoderKind::Service => "service",
        })
    }
}

/// How to build an encoder: `features`, `file:<path>` or `service:<url>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    Features,
    File { path: PathBuf },
    Service(ServiceConfig),
}

impl EncoderSpec {
    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderSpec::Features => EncoderKind::Features,
            EncoderSpec::File { .. } => EncoderKind::File,
            EncoderSpec::Service(_) => EncoderKind::Service,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        if let EncoderSpec::Service(cfg) = &mut self {
            cfg.timeout = timeout;
        }
        self
    }

    pub fn open(&self) -> Result<EncoderBackend, EncoderError> {
        Ok(match self {
            EncoderSpec::Features => EncoderBackend::Features,
            EncoderSpec::File { path } => EncoderBackend::File(load_embedding_file(path)?),
            EncoderSpec::Service(cfg) => EncoderBackend::Service(ServiceClient::connect(cfg.clone())?),
        })
    }
}

impl FromStr for EncoderSpec {
    type Err = EncoderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "features" => Ok(EncoderSpec::Features),
            Some(("file", path)) if !path.is_empty() => Ok(EncoderSpec::File { path: path.into() }),
            Some(("service", url)) if !url.is_empty() => {
                Ok(EncoderSpec::Service(ServiceConfig::new(url)))
            }
            _ => Err(EncoderError::BadSpec(s.to_owned())),
        }
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Features => f.write_str("features"),
            EncoderSpec::File { path } => write!(f, "file:{}", path.display()),
            EncoderSpec::Service(cfg) => write!(f, "service:{}", cfg.url),
        }
    }
}

/// An initialized encoder. Read-only; safe to share across threads.
#[derive(Debug, Clone)]
pub enum EncoderBackend {
    Features,
    File(EmbeddingFile),
    Service(ServiceClient),
}

impl EncoderBackend {
    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderBackend::Features => EncoderKind::Features,
            EncoderBackend::File(_) => EncoderKind::File,
            EncoderBackend::Service(_) => EncoderKind::Service,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EncoderBackend::Features => FEATURE_DIM,
            EncoderBackend::File(f) => f.dim(),
            EncoderBackend::Service(c) => c.dim(),
        }
    }

    /// One embedding per line of `email`, in order.
    pub fn encode_email(&self, email: &Email) -> Result<Vec<LineEmbedding>, EncoderError> {
        match self {
            EncoderBackend::Features => Ok(email
                .lines()
                .iter()
                .map(|l| LineEmbedding(feature_vector(l)))
                .collect()),
            EncoderBackend::File(file) => {
                let range = file
                    .range(email.id())
                    .ok_or_else(|| EncoderError::MissingId(email.id().to_owned()))?;
                if range.n != email.len() as u64 {
                    return Err(EncoderError::LineCountMismatch {
                        id: email.id().to_owned(),
                        expected: email.len(),
                        found: range.n,
                    });
                }
                file.rows(email.id())
                    .expect("range checked")
                    .enumerate()
                    .map(|(i, row)| {
                        LineEmbedding::new(row.iter().map(|&x| f64::from(x)).collect())
                            .map_err(|_| EncoderError::NonFinite { line: i })
                    })
                    .collect()
            }
            EncoderBackend::Service(client) => client.embed(email.lines()),
        }
    }
}
