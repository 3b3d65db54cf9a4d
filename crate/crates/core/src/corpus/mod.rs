//! Annotated corpora: JSONL persistence, dataset splits and synthetic data.
//!
//! A corpus file starts with a header record followed by one email per line:
//!
//! ```text
//! {"format":"zoneseg-corpus","version":1,"taxonomy":"gmane15","name":"dev"}
//! {"id":"e1","lang":"pt","lines":["Olá Ana,",""],"zones":["salutation","visual_separator"],"annotator":null}
//! ```

mod synth;

pub use synth::{
    generate_synthetic_corpus, generate_synthetic_corpus_in, generate_synthetic_corpus_with,
    SynthDomain,
};

use crate::email::{AnnotatedEmail, Email, EmailError, ZoneLabel};
use crate::taxonomy::{map_annotation, Taxonomy, TaxonomyError, TaxonomyRegistry};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CORPUS_FORMAT: &str = "zoneseg-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: bad header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("email {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate email id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

impl From<EmailError> for CorpusError {
    fn from(e: EmailError) -> Self {
        let id = match &e {
            EmailError::EmptyId => String::new(),
            EmailError::NoLines { id }
            | EmailError::LineBreak { id, .. }
            | EmailError::LengthMismatch { id, .. } => id.clone(),
        };
        CorpusError::Invalid {
            id,
            reason: e.to_string(),
        }
    }
}

/// A named collection of annotated emails over one taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    taxonomy: Taxonomy,
    emails: Vec<AnnotatedEmail>,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        taxonomy: Taxonomy,
        emails: Vec<AnnotatedEmail>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(emails.len());
        for e in &emails {
            if !seen.insert(e.id()) {
                return Err(CorpusError::DuplicateId(e.id().to_owned()));
            }
            check_zones(e, &taxonomy)?;
        }
        Ok(Self {
            name: name.into(),
            taxonomy,
            emails,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn emails(&self) -> &[AnnotatedEmail] {
        &self.emails
    }

    pub fn len(&self) -> usize {
        self.emails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emails.is_empty()
    }

    pub fn n_lines(&self) -> usize {
        self.emails.iter().map(|e| e.zones().len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedEmail> {
        self.emails.iter().find(|e| e.id() == id)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Gold zone indices of one email under this corpus' taxonomy.
    pub fn zone_indices(&self, email: &AnnotatedEmail) -> Vec<usize> {
        email
            .zones()
            .iter()
            .map(|z| self.taxonomy.index_of(z.as_str()).expect("validated zone"))
            .collect()
    }

    /// Re-express the corpus under `target` using the registry's mapping.
    pub fn map_to(
        &self,
        registry: &TaxonomyRegistry,
        target: &str,
    ) -> Result<Corpus, CorpusError> {
        let mapping = registry.mapping(self.taxonomy.name(), target)?;
        let emails = self
            .emails
            .iter()
            .map(|e| map_annotation(e, &mapping))
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::new(self.name.clone(), registry.get(target)?.clone(), emails)
    }

    /// Group emails by their language tag, in first-seen order.
    pub fn by_language(&self) -> Vec<(String, Corpus)> {
        let mut groups: indexmap::IndexMap<String, Vec<AnnotatedEmail>> = Default::default();
        for e in &self.emails {
            groups
                .entry(e.email().lang().to_owned())
                .or_default()
                .push(e.clone());
        }
        groups
            .into_iter()
            .map(|(lang, emails)| {
                let c = Corpus {
                    name: format!("{}.{lang}", self.name),
                    taxonomy: self.taxonomy.clone(),
                    emails,
                };
                (lang, c)
            })
            .collect()
    }
}

fn check_zones(e: &AnnotatedEmail, taxonomy: &Taxonomy) -> Result<(), CorpusError> {
    match e
        .zones()
        .iter()
        .enumerate()
        .find(|(_, z)| !taxonomy.contains(z.as_str()))
    {
        Some((line, z)) => Err(CorpusError::Invalid {
            id: e.id().to_owned(),
            reason: format!(
                "zone {:?} at line {line} is not in taxonomy {}",
                z.as_str(),
                taxonomy.name()
            ),
        }),
        None => Ok(()),
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    taxonomy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    lang: &'a str,
    lines: &'a [String],
    zones: &'a [ZoneLabel],
    annotator: Option<&'a str>,
}

#[derive(Deserialize)]
struct RecordIn {
    id: String,
    lang: String,
    lines: Vec<String>,
    zones: Vec<ZoneLabel>,
    #[serde(default)]
    annotator: Option<String>,
}

/// Read a corpus, resolving its taxonomy among the builtins.
pub fn read_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    read_corpus_with(path, &TaxonomyRegistry::builtin())
}

pub fn read_corpus_with(path: &Path, registry: &TaxonomyRegistry) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut lines = reader.lines().enumerate();

    let header: Header = loop {
        match lines.next() {
            None => {
                return Err(CorpusError::Header {
                    path: path.to_owned(),
                    reason: "file is empty".into(),
                })
            }
            Some((i, line)) => {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    source,
                })?;
            }
        }
    };
    if header.format != CORPUS_FORMAT {
        return Err(CorpusError::Header {
            path: path.to_owned(),
            reason: format!("format {:?}, expected {CORPUS_FORMAT:?}", header.format),
        });
    }
    if header.version != CORPUS_VERSION {
        return Err(CorpusError::Header {
            path: path.to_owned(),
            reason: format!("version {}, expected {CORPUS_VERSION}", header.version),
        });
    }
    let taxonomy = registry.get(&header.taxonomy)?.clone();

    let mut emails = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        let email = Email::new(rec.id, rec.lang, rec.lines)?;
        emails.push(AnnotatedEmail::new(email, rec.zones, rec.annotator)?);
    }
    let name = header.name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Corpus::new(name, taxonomy, emails)
}

/// Serialize a corpus to JSONL bytes.
pub fn corpus_to_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    write_records(corpus, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn write_records(corpus: &Corpus, mut w: impl Write) -> std::io::Result<()> {
    let header = Header {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        taxonomy: corpus.taxonomy.name().into(),
        name: Some(corpus.name.clone()),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in &corpus.emails {
        let rec = RecordOut {
            id: e.id(),
            lang: e.email().lang(),
            lines: e.email().lines(),
            zones: e.zones(),
            annotator: e.annotator(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Write a corpus atomically (temporary file in the target directory, then rename).
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    crate::io_util::write_atomic(path, |f| write_records(corpus, BufWriter::new(f))).map_err(
        |source| CorpusError::Io {
            path: path.to_owned(),
            source,
        },
    )
}

/// Train/dev/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self, String> {
        for (name, f) in [("train", train), ("dev", dev), ("test", test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("{name} fraction {f} outside [0, 1]"));
            }
        }
        if (train + dev + test - 1.0).abs() > 1e-9 {
            return Err(format!(
                "fractions sum to {}, expected 1",
                train + dev + test
            ));
        }
        Ok(Self {
            train_fraction: train,
            dev_fraction: dev,
            test_fraction: test,
            seed,
        })
    }
}

/// Deterministically shuffle and cut a corpus into train, dev and test parts.
///
/// Dev and test sizes are floor-rounded; the remainder goes to train.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> (Corpus, Corpus, Corpus) {
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    // tolerance keeps e.g. 10 * 0.3 from flooring to 2
    let size = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
    let n_dev = size(spec.dev_fraction).min(n);
    let n_test = size(spec.test_fraction).min(n - n_dev);
    let n_train = n - n_dev - n_test;

    let part = |suffix: &str, idx: &[usize]| Corpus {
        name: format!("{}.{suffix}", corpus.name),
        taxonomy: corpus.taxonomy.clone(),
        emails: idx.iter().map(|&i| corpus.emails[i].clone()).collect(),
    };
    (
        part("train", &order[..n_train]),
        part("dev", &order[n_train..n_train + n_dev]),
        part("test", &order[n_train + n_dev..]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::GMANE15;

    fn gmane() -> Taxonomy {
        TaxonomyRegistry::builtin().get(GMANE15).unwrap().clone()
    }

    fn email(id: &str, lines: &[&str], zones: &[&str]) -> AnnotatedEmail {
        let e = Email::new(id, "pt", lines.iter().map(|s| s.to_string()).collect()).unwrap();
        AnnotatedEmail::new(e, zones.iter().map(|&z| z.into()).collect(), None).unwrap()
    }

    fn sample(n: usize) -> Corpus {
        let emails = (0..n)
            .map(|i| email(&format!("e{i}"), &["Olá,", "> ação"], &["salutation", "quotation"]))
            .collect();
        Corpus::new("sample", gmane(), emails).unwrap()
    }

    #[test]
    fn read_two_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"format\":\"zoneseg-corpus\",\"version\":1,\"taxonomy\":\"gmane15\"}\n",
                "{\"id\":\"a\",\"lang\":\"es\",\"lines\":[\"Hola\"],\"zones\":[\"salutation\"],\"annotator\":null}\n",
                "{\"id\":\"b\",\"lang\":\"fr\",\"lines\":[\"> x\",\"\"],\"zones\":[\"quotation\",\"visual_separator\"],\"annotator\":\"A1\"}\n",
            ),
        )
        .unwrap();
        let c = read_corpus(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.name(), "c");
        assert_eq!(c.emails()[1].annotator(), Some("A1"));
    }

    #[test]
    fn length_mismatch_names_email() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"format\":\"zoneseg-corpus\",\"version\":1,\"taxonomy\":\"gmane15\"}\n",
                "{\"id\":\"bad-7\",\"lang\":\"es\",\"lines\":[\"a\",\"b\"],\"zones\":[\"paragraph\"],\"annotator\":null}\n",
            ),
        )
        .unwrap();
        match read_corpus(&path) {
            Err(CorpusError::Invalid { id, .. }) => assert_eq!(id, "bad-7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zone_names_are_case_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"format\":\"zoneseg-corpus\",\"version\":1,\"taxonomy\":\"gmane15\"}\n",
                "{\"id\":\"e\",\"lang\":\"es\",\"lines\":[\"a\"],\"zones\":[\"Paragraph\"],\"annotator\":null}\n",
            ),
        )
        .unwrap();
        let err = read_corpus(&path).unwrap_err();
        assert!(matches!(&err, CorpusError::Invalid { id, .. } if id == "e"), "{err}");
        assert!(err.to_string().contains("Paragraph"));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            "{\"format\":\"zoneseg-corpus\",\"version\":1,\"taxonomy\":\"gmane15\"}\n{nope\n",
        )
        .unwrap();
        match read_corpus(&path) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = email("x", &["a"], &["paragraph"]);
        assert!(matches!(
            Corpus::new("c", gmane(), vec![a.clone(), a]),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn empty_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let c = Corpus::new("empty", gmane(), vec![]).unwrap();
        write_corpus(&c, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(read_corpus(&path).unwrap(), c);
    }

    #[test]
    fn unicode_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.jsonl");
        let c = Corpus::new(
            "u",
            gmane(),
            vec![email("u1", &["ação", "señal", "\tà"], &["paragraph", "paragraph", "raw_code"])],
        )
        .unwrap();
        write_corpus(&c, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(corpus_to_bytes(&back), bytes);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let c = sample(1);
        let err = write_corpus(&c, Path::new("/nonexistent-dir/x/c.jsonl")).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let c = sample(10);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 7).unwrap();
        let (tr, dv, te) = split_corpus(&c, &spec);
        assert_eq!((tr.len(), dv.len(), te.len()), (8, 1, 1));
        let again = split_corpus(&c, &spec);
        assert_eq!((tr, dv, te), again);

        let all = SplitSpec::new(1.0, 0.0, 0.0, 3).unwrap();
        let (tr, dv, te) = split_corpus(&c, &all);
        assert_eq!((tr.len(), dv.len(), te.len()), (10, 0, 0));
    }

    #[test]
    fn split_spec_validates_sum() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.1, -0.1, 0).is_err());
    }
}
