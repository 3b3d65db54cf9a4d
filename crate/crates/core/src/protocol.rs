//! End-to-end harness: encode corpora, train, predict, and the evaluation
//! protocols built from them (per-language recall tables, cross-domain runs).

use crate::corpus::{generate_synthetic_corpus_with, Corpus, CorpusError, SynthDomain};
use crate::email::{AnnotatedEmail, Email, ZoneLabel};
use crate::encoder::{EncoderBackend, EncoderError, EncoderKind};
use crate::metrics::{evaluate, evaluate_corpora, EvalReport, MetricsError};
use crate::seqlab::{predict, stack_rows, train, LabelerModel, SeqlabError, Sequence, TrainConfig, TrainingLog};
use crate::taxonomy::{TaxonomyError, TaxonomyRegistry};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Seqlab(#[from] SeqlabError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("encoder produces {encoder}-dimensional vectors, model expects {model}")]
    DimMismatch { model: usize, encoder: usize },
    #[error("taxonomy mismatch: {0:?} vs {1:?}")]
    TaxonomyMismatch(String, String),
}

/// Encode every email of `corpus` with gold label indices.
pub fn encode_corpus(corpus: &Corpus, encoder: &EncoderBackend) -> Result<Vec<Sequence>, ProtocolError> {
    corpus
        .emails()
        .iter()
        .map(|e| {
            let rows = encoder.encode_email(e.email())?;
            Ok(Sequence::new(stack_rows(&rows)?, corpus.zone_indices(e))?)
        })
        .collect()
}

/// Train a labeler on `train_corpus`, selecting on `dev_corpus`.
pub fn train_on_corpus(
    train_corpus: &Corpus,
    dev_corpus: Option<&Corpus>,
    encoder: &EncoderBackend,
    config: &TrainConfig,
) -> Result<(LabelerModel, TrainingLog), ProtocolError> {
    let taxonomy = train_corpus.taxonomy();
    if let Some(dev) = dev_corpus {
        if dev.taxonomy().name() != taxonomy.name() || dev.taxonomy().zones() != taxonomy.zones() {
            return Err(ProtocolError::TaxonomyMismatch(
                taxonomy.name().into(),
                dev.taxonomy().name().into(),
            ));
        }
    }
    let train_seqs = encode_corpus(train_corpus, encoder)?;
    let dev_seqs = match dev_corpus {
        Some(dev) => encode_corpus(dev, encoder)?,
        None => Vec::new(),
    };
    let out = train(&train_seqs, &dev_seqs, taxonomy.len(), config)?;
    let model = LabelerModel::new(
        out.params,
        taxonomy.name(),
        taxonomy.zones().to_vec(),
        encoder.kind(),
    )?;
    Ok((model, out.log))
}

fn check_encoder(model: &LabelerModel, encoder: &EncoderBackend) -> Result<(), ProtocolError> {
    let want = model.params.config().input_dim;
    if encoder.dim() != want {
        return Err(ProtocolError::DimMismatch {
            model: want,
            encoder: encoder.dim(),
        });
    }
    if encoder.kind() != model.encoder_kind {
        log::warn!(
            "model was trained with the {} encoder, predicting with {}",
            model.encoder_kind,
            encoder.kind()
        );
    }
    Ok(())
}

/// Zone labels for one email.
pub fn predict_email(
    model: &LabelerModel,
    encoder: &EncoderBackend,
    email: &Email,
) -> Result<Vec<ZoneLabel>, ProtocolError> {
    check_encoder(model, encoder)?;
    let rows = encoder.encode_email(email)?;
    let labels = predict(&model.params, stack_rows(&rows)?.view())?;
    Ok(labels
        .into_iter()
        .map(|i| ZoneLabel::from(model.zones[i].as_str()))
        .collect())
}

/// Predict every email and return the result as a corpus in the model's
/// taxonomy; annotators are set to `"model"`.
pub fn predict_emails<'a>(
    model: &LabelerModel,
    encoder: &EncoderBackend,
    registry: &TaxonomyRegistry,
    name: &str,
    emails: impl IntoIterator<Item = &'a Email>,
) -> Result<Corpus, ProtocolError> {
    let taxonomy = registry.get(&model.taxonomy)?.clone();
    if taxonomy.zones() != model.zones.as_slice() {
        return Err(ProtocolError::TaxonomyMismatch(
            model.taxonomy.clone(),
            taxonomy.name().into(),
        ));
    }
    let annotated = emails
        .into_iter()
        .map(|email| {
            let zones = predict_email(model, encoder, email)?;
            Ok(AnnotatedEmail::new(email.clone(), zones, Some("model".into()))
                .expect("one label per line"))
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    Ok(Corpus::new(name, taxonomy, annotated)?)
}

pub fn predict_corpus(
    model: &LabelerModel,
    encoder: &EncoderBackend,
    registry: &TaxonomyRegistry,
    corpus: &Corpus,
) -> Result<Corpus, ProtocolError> {
    predict_emails(
        model,
        encoder,
        registry,
        corpus.name(),
        corpus.emails().iter().map(|e| e.email()),
    )
}

/// Reports per language tag of `gold` (first-seen order) followed by `"all"`.
pub fn evaluate_by_language(
    gold: &Corpus,
    pred: &Corpus,
) -> Result<IndexMap<String, EvalReport>, ProtocolError> {
    let mut out = IndexMap::new();
    for (lang, part) in gold.by_language() {
        let ids: Vec<AnnotatedEmail> = part
            .emails()
            .iter()
            .map(|e| {
                pred.get(e.id())
                    .cloned()
                    .ok_or_else(|| MetricsError::MissingPrediction(e.id().into()))
            })
            .collect::<Result<_, _>>()?;
        out.insert(lang, evaluate(part.emails(), &ids, gold.taxonomy())?);
    }
    out.insert("all".into(), evaluate_corpora(gold, pred)?);
    Ok(out)
}

/// Zones as rows, one recall column per report; the first row is accuracy.
pub fn render_recall_table(columns: &IndexMap<String, EvalReport>) -> String {
    let zones: Vec<&String> = columns
        .values()
        .next()
        .map(|r| r.per_zone.keys().collect())
        .unwrap_or_default();
    let w = zones.iter().map(|z| z.len()).max().unwrap_or(0).max(4);
    let cw = columns.keys().map(|k| k.len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<w$}", "zone");
    for k in columns.keys() {
        let _ = write!(out, "  {k:>cw$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<w$}", "All");
    for r in columns.values() {
        let _ = write!(out, "  {:>cw$.2}", r.accuracy);
    }
    out.push('\n');
    for z in zones {
        let _ = write!(out, "{z:<w$}");
        for r in columns.values() {
            let recall = r.per_zone.get(z).map_or(0.0, |s| s.recall);
            let _ = write!(out, "  {recall:>cw$.2}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Taxonomies to train and evaluate under, each reached from the
    /// synthetic generator's native labels through the registry mappings.
    pub schemas: Vec<String>,
    pub train: TrainConfig,
}

impl Default for CrossDomainConfig {
    fn default() -> Self {
        Self {
            n_train: 60,
            n_dev: 20,
            n_test: 40,
            seed: 0,
            schemas: vec!["two2".into(), "two5".into()],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainRow {
    pub train_domain: String,
    pub test_domain: String,
    /// Test accuracy per schema.
    pub accuracy: IndexMap<String, f64>,
    pub reports: IndexMap<String, EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainReport {
    pub model: String,
    pub encoder: EncoderKind,
    pub schemas: Vec<String>,
    pub rows: Vec<CrossDomainRow>,
}

impl CrossDomainReport {
    /// Both directions present, every schema evaluated, and every report
    /// expressed in exactly that schema's zones.
    pub fn is_complete(&self, registry: &TaxonomyRegistry) -> bool {
        let directions: Vec<(&str, &str)> = self
            .rows
            .iter()
            .map(|r| (r.train_domain.as_str(), r.test_domain.as_str()))
            .collect();
        directions == [("A", "B"), ("B", "A")]
            && self.rows.iter().all(|row| {
                self.schemas.iter().all(|s| {
                    let (Some(acc), Some(rep), Ok(tax)) =
                        (row.accuracy.get(s), row.reports.get(s), registry.get(s))
                    else {
                        return false;
                    };
                    (0.0..=1.0).contains(acc)
                        && rep.accuracy == *acc
                        && rep.taxonomy == tax.name()
                        && rep.per_zone.keys().eq(tax.zones().iter())
                        && rep.n_lines > 0
                })
            })
    }

    pub fn render(&self, registry: &TaxonomyRegistry) -> String {
        let heads: Vec<String> = self
            .schemas
            .iter()
            .map(|s| match registry.get(s) {
                Ok(t) => format!("accuracy {} zones", t.len()),
                Err(_) => format!("accuracy {s}"),
            })
            .collect();
        let mw = self.model.len().max(5);
        let mut out = format!("{:<mw$}  {:<10}", "model", "train/test");
        for h in &heads {
            let _ = write!(out, "  {h}");
        }
        out.push('\n');
        for row in &self.rows {
            let corpus = format!("{}/{}", row.train_domain, row.test_domain);
            let _ = write!(out, "{:<mw$}  {corpus:<10}", self.model);
            for (s, h) in self.schemas.iter().zip(&heads) {
                let v = row.accuracy.get(s).copied().unwrap_or(f64::NAN);
                let _ = write!(out, "  {v:>w$.2}", w = h.len());
            }
            out.push('\n');
        }
        out
    }
}

/// Train on one synthetic domain and test on the other, in both directions,
/// once per schema.
pub fn run_cross_domain(
    config: &CrossDomainConfig,
    registry: &TaxonomyRegistry,
    encoder: &EncoderBackend,
) -> Result<CrossDomainReport, ProtocolError> {
    let mut rows = Vec::new();
    for (src, dst) in [(SynthDomain::A, SynthDomain::B), (SynthDomain::B, SynthDomain::A)] {
        let mut accuracy = IndexMap::new();
        let mut reports = IndexMap::new();
        for schema in &config.schemas {
            let tax = registry.get(schema)?;
            let seed = config.seed;
            let train_c = generate_synthetic_corpus_with(registry, src, config.n_train, tax, seed)?;
            let dev_c = generate_synthetic_corpus_with(registry, src, config.n_dev, tax, seed.wrapping_add(1))?;
            let test_c = generate_synthetic_corpus_with(registry, dst, config.n_test, tax, seed.wrapping_add(2))?;
            let dev = (!dev_c.is_empty()).then_some(&dev_c);
            let (model, log) = train_on_corpus(&train_c, dev, encoder, &config.train)?;
            log::info!(
                "{src}->{dst} {schema}: {} epochs, best dev accuracy {:.4}",
                log.epochs.len(),
                log.best_dev_accuracy
            );
            let pred = predict_corpus(&model, encoder, registry, &test_c)?;
            let report = evaluate_corpora(&test_c, &pred)?;
            accuracy.insert(schema.clone(), report.accuracy);
            reports.insert(schema.clone(), report);
        }
        rows.push(CrossDomainRow {
            train_domain: src.to_string(),
            test_domain: dst.to_string(),
            accuracy,
            reports,
        });
    }
    Ok(CrossDomainReport {
        model: "bilstm-crf".into(),
        encoder: encoder.kind(),
        schemas: config.schemas.clone(),
        rows,
    })
}
