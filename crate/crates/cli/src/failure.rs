use std::fmt;
use std::process::ExitCode;
use zoneseg::encoder::{EncoderError, LembError};
use zoneseg::protocol::ProtocolError;
use zoneseg::seqlab::SeqlabError;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inconsistent inputs; exit 2.
    Usage(String),
    /// Anything that went wrong while doing the work; exit 1.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: fmt::Display> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.to_string()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.to_string()))
    }
}

fn encoder_is_usage(e: &EncoderError) -> bool {
    !matches!(
        e,
        EncoderError::Transport(_)
            | EncoderError::Timeout(_)
            | EncoderError::Status { .. }
            | EncoderError::Malformed(_)
            | EncoderError::NonFinite { .. }
            | EncoderError::File(LembError::Io { .. })
    )
}

impl From<EncoderError> for Failure {
    fn from(e: EncoderError) -> Self {
        if encoder_is_usage(&e) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        let usage = match &e {
            ProtocolError::Encoder(inner) => encoder_is_usage(inner),
            ProtocolError::Seqlab(SeqlabError::NonFinite) => false,
            _ => true,
        };
        if usage {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}
