//! Model file: one JSON header line, then the tensors.
//!
//! ```text
//! {"format":"zoneseg-model","version":1,...}\n
//! u32 tensor_count
//! per tensor, in TENSOR_NAMES order:
//!   u32 name_len, name (UTF-8), u32 ndim, ndim × u64 dims, f64 data (row-major)
//! ```
//!
//! All integers and floats are little-endian.

use super::model::{ModelConfig, ModelParams, Weights, TENSOR_NAMES};
use super::SeqlabError;
use crate::encoder::EncoderKind;
use crate::io_util::write_atomic;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MODEL_FORMAT: &str = "zoneseg-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad model header: {0}")]
    Header(String),
    #[error("unsupported model format {format:?} version {version}")]
    Version { format: String, version: u32 },
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("expected tensor {expected:?}, found {found:?}")]
    TensorName { expected: String, found: String },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error(transparent)]
    Params(#[from] SeqlabError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub hidden: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub taxonomy: String,
    /// Zone names in label-index order.
    pub zones: Vec<String>,
    pub encoder_kind: EncoderKind,
    pub dropout_rate: f64,
    pub use_crf: bool,
}

/// Trained parameters plus what is needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelerModel {
    pub params: ModelParams,
    pub taxonomy: String,
    pub zones: Vec<String>,
    pub encoder_kind: EncoderKind,
}

impl LabelerModel {
    pub fn new(
        params: ModelParams,
        taxonomy: impl Into<String>,
        zones: Vec<String>,
        encoder_kind: EncoderKind,
    ) -> Result<Self, SeqlabError> {
        if zones.len() != params.config().n_labels {
            return Err(SeqlabError::Shape(format!(
                "{} zone names for {} labels",
                zones.len(),
                params.config().n_labels
            )));
        }
        Ok(Self {
            params,
            taxonomy: taxonomy.into(),
            zones,
            encoder_kind,
        })
    }

    pub fn header(&self) -> ModelHeader {
        let c = self.params.config();
        ModelHeader {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            input_dim: c.input_dim,
            hidden: c.hidden,
            k: c.n_labels,
            taxonomy: self.taxonomy.clone(),
            zones: self.zones.clone(),
            encoder_kind: self.encoder_kind,
            dropout_rate: c.dropout_rate,
            use_crf: c.use_crf,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header()).expect("header serializes");
        out.push(b'\n');
        let tensors = self.params.weights.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ModelFileError::Header("missing header line".into()))?;
        let header: ModelHeader = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| ModelFileError::Header(e.to_string()))?;
        if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
            return Err(ModelFileError::Version {
                format: header.format,
                version: header.version,
            });
        }
        let config = ModelConfig {
            input_dim: header.input_dim,
            hidden: header.hidden,
            n_labels: header.k,
            dropout_rate: header.dropout_rate,
            use_crf: header.use_crf,
        };
        if config.input_dim == 0 || config.hidden == 0 || config.n_labels == 0 {
            return Err(ModelFileError::Header("dimensions must be positive".into()));
        }

        let mut r = Reader { bytes, pos: nl + 1 };
        let count = r.u32()? as usize;
        if count != TENSOR_NAMES.len() {
            return Err(ModelFileError::Header(format!(
                "{count} tensors, expected {}",
                TENSOR_NAMES.len()
            )));
        }
        let mut weights = Weights::zeros(&config);
        let expected_shapes: Vec<Vec<usize>> =
            weights.tensors().into_iter().map(|(_, s, _)| s).collect();
        for (slot, (expected, shape)) in weights
            .tensors_mut()
            .into_iter()
            .zip(TENSOR_NAMES.iter().zip(expected_shapes))
        {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
            if name != *expected {
                return Err(ModelFileError::TensorName {
                    expected: (*expected).into(),
                    found: name,
                });
            }
            let ndim = r.u32()? as usize;
            let mut dims = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                dims.push(r.u64()? as usize);
            }
            if dims != shape {
                return Err(SeqlabError::Shape(format!(
                    "{name}: shape {dims:?}, expected {shape:?}"
                ))
                .into());
            }
            for x in slot.iter_mut() {
                *x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != bytes.len() {
            return Err(ModelFileError::TrailingBytes(bytes.len() - r.pos));
        }
        let params = ModelParams::new(config, weights)?;
        Ok(Self::new(params, header.taxonomy, header.zones, header.encoder_kind)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(ModelFileError::Truncated(self.bytes.len()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_model(model: &LabelerModel, path: &Path) -> Result<(), ModelFileError> {
    let bytes = model.to_bytes();
    write_atomic(path, |f| f.write_all(&bytes)).map_err(|source| ModelFileError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<LabelerModel, ModelFileError> {
    let bytes = std::fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    LabelerModel::from_bytes(&bytes)
}
