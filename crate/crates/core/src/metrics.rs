//! Line-level evaluation and inter-annotator agreement.
//!
//! Zero denominators give 0 for precision, recall and F1.

use crate::corpus::Corpus;
use crate::email::AnnotatedEmail;
use crate::taxonomy::Taxonomy;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("email {0:?} is missing from the predictions")]
    MissingPrediction(String),
    #[error("email {0:?} is predicted but not in the gold set")]
    UnexpectedPrediction(String),
    #[error("email {id:?}: gold has {gold} lines, prediction has {pred}")]
    LengthMismatch { id: String, gold: usize, pred: usize },
    #[error("email {id:?}: zone {zone:?} is not in taxonomy {taxonomy:?}")]
    UnknownZone {
        id: String,
        zone: String,
        taxonomy: String,
    },
    #[error("taxonomies differ: {0:?} vs {1:?}")]
    TaxonomyMismatch(String, String),
    #[error("label lists differ in length: {0} vs {1}")]
    LabelCount(usize, usize),
    #[error("nothing to compare")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneScores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub taxonomy: String,
    pub n_lines: u64,
    pub accuracy: f64,
    pub per_zone: IndexMap<String, ZoneScores>,
    /// Mean F1 over zones that occur in gold or prediction.
    pub macro_f1: f64,
    /// Rows gold, columns predicted, in taxonomy order.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    /// Derive every score from a K × K confusion matrix.
    pub fn from_confusion(taxonomy: &str, zones: &[String], confusion: Vec<Vec<u64>>) -> Self {
        let k = zones.len();
        assert_eq!(confusion.len(), k, "confusion rows");
        let row: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<u64> = (0..k).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
        let n_lines: u64 = row.iter().sum();
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();

        let mut per_zone = IndexMap::with_capacity(k);
        let mut f1_sum = 0.0;
        let mut f1_count = 0usize;
        for (i, zone) in zones.iter().enumerate() {
            let recall = ratio(confusion[i][i], row[i]);
            let precision = ratio(confusion[i][i], col[i]);
            let f1 = harmonic(precision, recall);
            if row[i] + col[i] > 0 {
                f1_sum += f1;
                f1_count += 1;
            }
            per_zone.insert(
                zone.clone(),
                ZoneScores {
                    recall,
                    precision,
                    f1,
                    support: row[i],
                },
            );
        }
        Self {
            taxonomy: taxonomy.to_owned(),
            n_lines,
            accuracy: ratio(trace, n_lines),
            per_zone,
            macro_f1: if f1_count == 0 { 0.0 } else { f1_sum / f1_count as f64 },
            confusion,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table: accuracy first, then one row per zone.
    pub fn render(&self) -> String {
        let width = self
            .per_zone
            .keys()
            .map(|z| z.len())
            .max()
            .unwrap_or(0)
            .max("accuracy".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>9}  {:>6}  {:>7}",
            "zone", "recall", "precision", "f1", "support"
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.2}  {:>9}  {:>6}  {:>7}",
            "accuracy", self.accuracy, "", "", self.n_lines
        );
        for (zone, s) in &self.per_zone {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6.2}  {:>9.2}  {:>6.2}  {:>7}",
                zone, s.recall, s.precision, s.f1, s.support
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>9}  {:>6.2}", "macro f1", "", "", self.macro_f1);
        out
    }
}

fn confusion_of(
    gold: &[AnnotatedEmail],
    pred: &[AnnotatedEmail],
    taxonomy: &Taxonomy,
) -> Result<Vec<Vec<u64>>, MetricsError> {
    let k = taxonomy.len();
    let mut by_id: HashMap<&str, &AnnotatedEmail> = pred.iter().map(|e| (e.id(), e)).collect();
    let mut confusion = vec![vec![0u64; k]; k];
    let index = |e: &AnnotatedEmail, zone: &str| {
        taxonomy.index_of(zone).ok_or_else(|| MetricsError::UnknownZone {
            id: e.id().to_owned(),
            zone: zone.to_owned(),
            taxonomy: taxonomy.name().to_owned(),
        })
    };
    for g in gold {
        let p = by_id
            .remove(g.id())
            .ok_or_else(|| MetricsError::MissingPrediction(g.id().to_owned()))?;
        if g.zones().len() != p.zones().len() {
            return Err(MetricsError::LengthMismatch {
                id: g.id().to_owned(),
                gold: g.zones().len(),
                pred: p.zones().len(),
            });
        }
        for (gz, pz) in g.zones().iter().zip(p.zones()) {
            confusion[index(g, gz.as_str())?][index(p, pz.as_str())?] += 1;
        }
    }
    if let Some(extra) = pred.iter().find(|e| by_id.contains_key(e.id())) {
        return Err(MetricsError::UnexpectedPrediction(extra.id().to_owned()));
    }
    Ok(confusion)
}

/// Pooled line-level evaluation of `pred` against `gold`, matched by email id.
pub fn evaluate(
    gold: &[AnnotatedEmail],
    pred: &[AnnotatedEmail],
    taxonomy: &Taxonomy,
) -> Result<EvalReport, MetricsError> {
    let confusion = confusion_of(gold, pred, taxonomy)?;
    Ok(EvalReport::from_confusion(taxonomy.name(), taxonomy.zones(), confusion))
}

pub fn evaluate_corpora(gold: &Corpus, pred: &Corpus) -> Result<EvalReport, MetricsError> {
    check_same_taxonomy(gold, pred)?;
    evaluate(gold.emails(), pred.emails(), gold.taxonomy())
}

fn check_same_taxonomy(a: &Corpus, b: &Corpus) -> Result<(), MetricsError> {
    if a.taxonomy().name() != b.taxonomy().name() || a.taxonomy().zones() != b.taxonomy().zones() {
        return Err(MetricsError::TaxonomyMismatch(
            a.taxonomy().name().to_owned(),
            b.taxonomy().name().to_owned(),
        ));
    }
    Ok(())
}

/// Cohen's kappa between two label lists. Returns exactly 1.0 when both
/// annotators use one and the same label throughout.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LabelCount(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as f64;
    let mut ca: HashMap<&T, u64> = HashMap::new();
    let mut cb: HashMap<&T, u64> = HashMap::new();
    let mut agree = 0u64;
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        agree += u64::from(x == y);
    }
    let p_o = agree as f64 / n;
    // Sum in a canonical order so the result does not depend on hash order.
    let mut terms: Vec<u128> = ca
        .iter()
        .filter_map(|(label, &na)| cb.get(label).map(|&nb| u128::from(na) * u128::from(nb)))
        .collect();
    terms.sort_unstable();
    let p_e = terms.iter().sum::<u128>() as f64 / (n * n);
    if p_e == 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_lines: u64,
    pub accuracy: f64,
    /// F1 with the first annotator as reference.
    pub f1_a1a2: f64,
    /// F1 with the second annotator as reference.
    pub f1_a2a1: f64,
    pub kappa: f64,
    pub f1_average: F1Average,
}

fn f1_of(report: &EvalReport, average: F1Average) -> f64 {
    match average {
        F1Average::Macro => report.macro_f1,
        // Single-label micro F1 reduces to accuracy.
        F1Average::Micro => report.accuracy,
    }
}

/// Agreement between two annotations of the same emails, pooled over lines.
pub fn agreement_report(
    a1: &Corpus,
    a2: &Corpus,
    average: F1Average,
) -> Result<AgreementReport, MetricsError> {
    check_same_taxonomy(a1, a2)?;
    agreement_of(a1.emails(), a2.emails(), a1.taxonomy(), average)
}

fn agreement_of(
    a1: &[AnnotatedEmail],
    a2: &[AnnotatedEmail],
    taxonomy: &Taxonomy,
    average: F1Average,
) -> Result<AgreementReport, MetricsError> {
    let forward = evaluate(a1, a2, taxonomy)?;
    let backward = evaluate(a2, a1, taxonomy)?;
    if forward.n_lines == 0 {
        return Err(MetricsError::Empty);
    }
    let by_id: HashMap<&str, &AnnotatedEmail> = a2.iter().map(|e| (e.id(), e)).collect();
    let mut l1 = Vec::with_capacity(forward.n_lines as usize);
    let mut l2 = Vec::with_capacity(forward.n_lines as usize);
    for e in a1 {
        l1.extend(e.zones().iter().map(|z| z.as_str()));
        l2.extend(by_id[e.id()].zones().iter().map(|z| z.as_str()));
    }
    Ok(AgreementReport {
        n_lines: forward.n_lines,
        accuracy: forward.accuracy,
        f1_a1a2: f1_of(&forward, average),
        f1_a2a1: f1_of(&backward, average),
        kappa: cohens_kappa(&l1, &l2)?,
        f1_average: average,
    })
}

/// One report per language tag of the first annotator's emails (first-seen order),
/// followed by `"all"` for the pooled corpus.
pub fn agreement_by_language(
    a1: &Corpus,
    a2: &Corpus,
    average: F1Average,
) -> Result<IndexMap<String, AgreementReport>, MetricsError> {
    check_same_taxonomy(a1, a2)?;
    let mut out = IndexMap::new();
    for (lang, part) in a1.by_language() {
        let ids: Vec<&str> = part.emails().iter().map(|e| e.id()).collect();
        let other: Vec<AnnotatedEmail> = ids
            .iter()
            .map(|id| {
                a2.get(id)
                    .cloned()
                    .ok_or_else(|| MetricsError::MissingPrediction((*id).to_owned()))
            })
            .collect::<Result<_, _>>()?;
        out.insert(
            lang,
            agreement_of(part.emails(), &other, a1.taxonomy(), average)?,
        );
    }
    out.insert("all".into(), agreement_report(a1, a2, average)?);
    Ok(out)
}

/// Measures as rows, groups as columns.
pub fn render_agreement(reports: &IndexMap<String, AgreementReport>) -> String {
    let rows: [(&str, fn(&AgreementReport) -> f64); 4] = [
        ("accuracy", |r| r.accuracy),
        ("F1 A1A2", |r| r.f1_a1a2),
        ("F1 A2A1", |r| r.f1_a2a1),
        ("kappa", |r| r.kappa),
    ];
    let col = reports.keys().map(|k| k.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<8}", "measure");
    for k in reports.keys() {
        let _ = write!(out, "  {k:>col$}");
    }
    out.push('\n');
    for (name, get) in rows {
        let _ = write!(out, "{name:<8}");
        for r in reports.values() {
            let _ = write!(out, "  {:>col$.2}", get(r));
        }
        out.push('\n');
    }
    out
}
