//! Emails, lines and per-line zone annotations.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmailError {
    #[error("email id must not be empty")]
    EmptyId,
    #[error("email {id}: line list must not be empty")]
    NoLines { id: String },
    #[error("email {id}: line {index} contains a line break")]
    LineBreak { id: String, index: usize },
    #[error("email {id}: {zones} zones for {lines} lines")]
    LengthMismatch {
        id: String,
        lines: usize,
        zones: usize,
    },
}

/// Split a raw body into lines.
///
/// CRLF and lone CR become LF before splitting. Empty lines are kept, and a
/// single trailing LF does not produce a final empty line. An empty body
/// yields `[""]`.
pub fn split_lines(body: &str) -> Vec<String> {
    let normalized = body.replace("\r\n", "\n").replace('\r', "\n");
    let trimmed = normalized.strip_suffix('\n').unwrap_or(&normalized);
    trimmed.split('\n').map(str::to_owned).collect()
}

/// One email body as an ordered list of lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Email {
    id: String,
    lang: String,
    lines: Vec<String>,
}

impl Email {
    pub fn new(
        id: impl Into<String>,
        lang: impl Into<String>,
        lines: Vec<String>,
    ) -> Result<Self, EmailError> {
        let id = id.into();
        if id.is_empty() {
            return Err(EmailError::EmptyId);
        }
        if lines.is_empty() {
            return Err(EmailError::NoLines { id });
        }
        if let Some(index) = lines.iter().position(|l| l.contains(['\n', '\r'])) {
            return Err(EmailError::LineBreak { id, index });
        }
        Ok(Self {
            id,
            lang: lang.into(),
            lines,
        })
    }

    /// Build an email from an unsplit body.
    pub fn from_body(
        id: impl Into<String>,
        lang: impl Into<String>,
        body: &str,
    ) -> Result<Self, EmailError> {
        Self::new(id, lang, split_lines(body))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// A zone name. Membership in a taxonomy is checked where a taxonomy is known
/// (corpus load, mapping).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneLabel(String);

impl ZoneLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ZoneLabel {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ZoneLabel {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// An email with one zone per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedEmail {
    email: Email,
    zones: Vec<ZoneLabel>,
    annotator: Option<String>,
}

impl AnnotatedEmail {
    pub fn new(
        email: Email,
        zones: Vec<ZoneLabel>,
        annotator: Option<String>,
    ) -> Result<Self, EmailError> {
        if zones.len() != email.len() {
            return Err(EmailError::LengthMismatch {
                id: email.id.clone(),
                lines: email.len(),
                zones: zones.len(),
            });
        }
        Ok(Self {
            email,
            zones,
            annotator,
        })
    }

    pub fn email(&self) -> &Email {
        &self.email
    }

    pub fn id(&self) -> &str {
        self.email.id()
    }

    pub fn zones(&self) -> &[ZoneLabel] {
        &self.zones
    }

    pub fn annotator(&self) -> Option<&str> {
        self.annotator.as_deref()
    }

    /// Replace the zones, keeping the email. Length is re-checked.
    pub fn with_zones(&self, zones: Vec<ZoneLabel>) -> Result<Self, EmailError> {
        Self::new(self.email.clone(), zones, self.annotator.clone())
    }

    pub fn with_annotator(mut self, annotator: Option<String>) -> Self {
        self.annotator = annotator;
        self
    }

    pub fn into_parts(self) -> (Email, Vec<ZoneLabel>, Option<String>) {
        (self.email, self.zones, self.annotator)
    }
}
