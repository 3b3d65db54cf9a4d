//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed; the
//! process exits non-zero when any criterion fails.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};
use zoneseg::corpus::{
    corpus_to_bytes, generate_synthetic_corpus, read_corpus, write_corpus, Corpus,
};
use zoneseg::email::{AnnotatedEmail, Email};
use zoneseg::encoder::lemb::{index_path, load_embedding_file, write_embedding_file, LembError};
use zoneseg::encoder::EncoderBackend;
use zoneseg::metrics::{agreement_report, cohens_kappa, evaluate, evaluate_corpora, F1Average};
use zoneseg::protocol::{predict_corpus, run_cross_domain, train_on_corpus, CrossDomainConfig};
use zoneseg::seqlab::{crf_log_partition, crf_viterbi, forward_backward, save_model, TrainConfig};
use zoneseg::taxonomy::{Taxonomy, TaxonomyRegistry, GMANE15};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<String, String> {
    let took = start.elapsed();
    if took < limit {
        Ok(format!("{:.2} s", took.as_secs_f64()))
    } else {
        Err(format!("took {:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs()))
    }
}

const ORACLE_INSTANCES: usize = 200;

/// The 200-instance family shared by the oracle and marginal criteria:
/// alternating continuous scores and small integers (for ties).
fn oracle_family() -> Vec<CrfInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..ORACLE_INSTANCES).map(|i| random_crf(&mut rng, i % 2 == 1)).collect()
}

fn crf_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ties = 0;
    for (i, inst) in oracle_family().iter().enumerate() {
        let z = crf_log_partition(inst.emissions.view(), &inst.crf).map_err(|e| e.to_string())?;
        worst = worst.max((z - brute_log_z(inst)).abs());
        let (path, _) = crf_viterbi(inst.emissions.view(), &inst.crf).map_err(|e| e.to_string())?;
        let (oracle, best) = brute_argmax(inst);
        ensure!(path == oracle, "instance {i}: viterbi {path:?}, enumeration {oracle:?}");
        let (l, k) = inst.emissions.dim();
        if all_sequences(l, k).iter().filter(|y| brute_score(inst, y) == best).count() > 1 {
            ties += 1;
        }
    }
    ensure!(worst < 1e-10, "max |log Z - oracle| = {worst:e}");
    let time = within(Duration::from_secs(10), start)?;
    Ok(format!(
        "{ORACLE_INSTANCES} instances, max |log Z diff| {worst:.1e}, viterbi exact ({ties} with ties), {time}"
    ))
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut cell, mut model, mut crf) = (FdResult::default(), FdResult::default(), FdResult::default());
    for i in 0..50 {
        let c = check_lstm_cell(&mut rng);
        let m = check_full_model(&mut rng);
        let r = check_crf_nll(&mut rng);
        ensure!(c.passes(), "instance {i}: LSTM cell rel. error {:e}", c.max_rel_error);
        ensure!(m.passes(), "instance {i}: BiLSTM+projection+CRF rel. error {:e}", m.max_rel_error);
        ensure!(r.passes(), "instance {i}: CRF NLL rel. error {:e}", r.max_rel_error);
        cell = cell.merge(c);
        model = model.merge(m);
        crf = crf.merge(r);
    }
    let time = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "50 instances, h = {FD_STEP:e}; max rel. error cell {:.1e}, model {:.1e}, crf {:.1e} over {} coordinates, {time}",
        cell.max_rel_error,
        model.max_rel_error,
        crf.max_rel_error,
        cell.checked + model.checked + crf.checked
    ))
}

fn marginals() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, inst) in oracle_family().iter().enumerate() {
        let m = forward_backward(inst.emissions.view(), &inst.crf)
            .map_err(|e| e.to_string())?
            .marginals();
        ensure!(m.iter().all(|&p| p >= 0.0), "instance {i}: negative marginal");
        for row in m.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-8, "max |sum - 1| = {worst:e}");
    Ok(format!("{ORACLE_INSTANCES} instances, max |row sum - 1| {worst:.1e}"))
}

fn gmane() -> Taxonomy {
    TaxonomyRegistry::builtin().get(GMANE15).unwrap().clone()
}

fn capacity() -> Outcome {
    let start = Instant::now();
    let corpus = generate_synthetic_corpus(8, &gmane(), 8).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 300,
        patience: 0,
        seed: 42,
        target_dev_accuracy: Some(1.0),
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut epochs = 0;
    for run in 0..2 {
        let (model, log) = train_on_corpus(&corpus, None, &EncoderBackend::Features, &cfg)
            .map_err(|e| e.to_string())?;
        let reg = TaxonomyRegistry::builtin();
        let pred = predict_corpus(&model, &EncoderBackend::Features, &reg, &corpus)
            .map_err(|e| e.to_string())?;
        let acc = evaluate_corpora(&corpus, &pred).map_err(|e| e.to_string())?.accuracy;
        ensure!(acc == 1.0, "run {run}: training accuracy {acc:.4} after {} epochs", log.epochs.len());
        let path = dir.path().join(format!("run{run}.model"));
        save_model(&model, &path).map_err(|e| e.to_string())?;
        files.push(fs::read(&path).map_err(|e| e.to_string())?);
        epochs = log.best_epoch;
    }
    ensure!(files[0] == files[1], "model files differ between seeded runs");
    let time = within(Duration::from_secs(120), start)?;
    Ok(format!(
        "{} lines at 100% after {epochs} epochs, model files identical ({} bytes), {time}",
        corpus.n_lines(),
        files[0].len()
    ))
}

fn generalization() -> Outcome {
    let start = Instant::now();
    let tax = gmane();
    let train = generate_synthetic_corpus(200, &tax, 1001).map_err(|e| e.to_string())?;
    let dev = generate_synthetic_corpus(40, &tax, 1003).map_err(|e| e.to_string())?;
    let test = generate_synthetic_corpus(50, &tax, 1002).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let (model, log) = train_on_corpus(&train, Some(&dev), &EncoderBackend::Features, &cfg)
        .map_err(|e| e.to_string())?;
    let reg = TaxonomyRegistry::builtin();
    let pred = predict_corpus(&model, &EncoderBackend::Features, &reg, &test).map_err(|e| e.to_string())?;
    let report = evaluate_corpora(&test, &pred).map_err(|e| e.to_string())?;
    let quote = report.per_zone["quotation"];
    ensure!(quote.support > 0, "no quotation lines in the test set");
    ensure!(
        report.accuracy >= 0.95 && quote.recall >= 0.98,
        "accuracy {:.4}, quotation recall {:.4}",
        report.accuracy,
        quote.recall
    );
    Ok(format!(
        "accuracy {:.4} on {} lines, quotation recall {:.4} ({} lines), {} epochs, {:.1} s",
        report.accuracy,
        report.n_lines,
        quote.recall,
        quote.support,
        log.epochs.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn cross_domain() -> Outcome {
    let reg = TaxonomyRegistry::builtin();
    let cfg = CrossDomainConfig {
        n_train: 60,
        n_dev: 20,
        n_test: 40,
        seed: 3,
        train: TrainConfig {
            max_epochs: 100,
            patience: 10,
            seed: 3,
            ..TrainConfig::default()
        },
        ..CrossDomainConfig::default()
    };
    let report = run_cross_domain(&cfg, &reg, &EncoderBackend::Features).map_err(|e| e.to_string())?;
    ensure!(report.is_complete(&reg), "incomplete report:\n{}", report.render(&reg));
    let table = report.render(&reg);
    for line in table.lines() {
        println!("        {line}");
    }
    Ok(format!("{} rows x {} schemas, taxonomy mapping applied", report.rows.len(), report.schemas.len()))
}

fn ann(id: &str, lang: &str, zones: &[&str]) -> AnnotatedEmail {
    let lines = zones.iter().map(|z| format!("line {z}")).collect();
    AnnotatedEmail::new(
        Email::new(id, lang, lines).unwrap(),
        zones.iter().map(|&z| z.into()).collect(),
        None,
    )
    .unwrap()
}

fn metrics_identities() -> Outcome {
    let k = cohens_kappa(&["A", "A", "B", "B"], &["A", "A", "B", "A"]).map_err(|e| e.to_string())?;
    ensure!(k == 0.5, "kappa {k} on the 4-item example");

    let tax = gmane();
    let corpus = generate_synthetic_corpus(20, &tax, 5).map_err(|e| e.to_string())?;
    for avg in [F1Average::Macro, F1Average::Micro] {
        let r = agreement_report(&corpus, &corpus, avg).map_err(|e| e.to_string())?;
        ensure!(
            r.kappa == 1.0 && r.accuracy == 1.0 && r.f1_a1a2 == 1.0 && r.f1_a2a1 == 1.0,
            "identical corpora ({avg:?}): {r:?}"
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zones = tax.zones();
    for trial in 0..100 {
        let n_emails = rng.random_range(1..6);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for e in 0..n_emails {
            let len = rng.random_range(1..12);
            let g: Vec<&str> = (0..len).map(|_| zones[rng.random_range(0..zones.len())].as_str()).collect();
            let p: Vec<&str> = g
                .iter()
                .map(|&z| if rng.random_bool(0.6) { z } else { zones[rng.random_range(0..zones.len())].as_str() })
                .collect();
            gold.push(ann(&format!("e{e}"), "en", &g));
            pred.push(ann(&format!("e{e}"), "en", &p));
        }
        let r = evaluate(&gold, &pred, &tax).map_err(|e| e.to_string())?;
        let trace: u64 = (0..zones.len()).map(|i| r.confusion[i][i]).sum();
        let total: u64 = r.confusion.iter().flatten().sum();
        let agree = gold
            .iter()
            .zip(&pred)
            .flat_map(|(g, p)| g.zones().iter().zip(p.zones()))
            .filter(|(a, b)| a == b)
            .count() as u64;
        ensure!(
            r.accuracy == trace as f64 / total as f64 && trace == agree && total == r.n_lines,
            "trial {trial}: accuracy {} vs trace/total {trace}/{total}",
            r.accuracy
        );
    }
    Ok("kappa 0.5 on the 4-item example; identity gives 1.0 everywhere; 100 random reports with accuracy == trace/total".into())
}

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

    let corpus: Corpus = generate_synthetic_corpus(30, &gmane(), 12).map_err(|e| e.to_string())?;
    let cpath = dir.path().join("c.jsonl");
    write_corpus(&corpus, &cpath).map_err(|e| e.to_string())?;
    let bytes = fs::read(&cpath).map_err(|e| e.to_string())?;
    let back = read_corpus(&cpath).map_err(|e| e.to_string())?;
    ensure!(back == corpus, "corpus changed on reload");
    ensure!(corpus_to_bytes(&back) == bytes, "corpus bytes changed on rewrite");

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let emails: Vec<(String, Vec<Vec<f32>>)> = (0..5)
        .map(|i| {
            let n = rng.random_range(1..5);
            let rows = (0..n)
                .map(|_| (0..16).map(|_| rng.random_range(-10.0f32..10.0)).collect())
                .collect();
            (format!("m{i}"), rows)
        })
        .collect();
    let lpath = dir.path().join("e.lemb");
    write_embedding_file(&lpath, 16, emails.iter().map(|(id, r)| (id.as_str(), &r[..])))
        .map_err(|e| e.to_string())?;
    let loaded = load_embedding_file(&lpath).map_err(|e| e.to_string())?;
    let mut max_diff = 0f32;
    for (id, rows) in &emails {
        let got: Vec<&[f32]> = loaded.rows(id).ok_or("missing id")?.collect();
        ensure!(got.len() == rows.len(), "{id}: row count");
        for (a, b) in rows.iter().zip(got) {
            for (x, y) in a.iter().zip(b) {
                max_diff = max_diff.max((x - y).abs());
            }
        }
    }
    ensure!(max_diff == 0.0, "max abs difference {max_diff}");
    let lbytes = fs::read(&lpath).map_err(|e| e.to_string())?;
    write_embedding_file(&lpath, 16, emails.iter().map(|(id, r)| (id.as_str(), &r[..])))
        .map_err(|e| e.to_string())?;
    ensure!(fs::read(&lpath).map_err(|e| e.to_string())? == lbytes, "LEMB bytes changed on rewrite");

    let corrupt = |patch: &dyn Fn(&mut Vec<u8>)| {
        let mut b = lbytes.clone();
        patch(&mut b);
        let p = dir.path().join("bad.lemb");
        fs::write(&p, &b).unwrap();
        fs::copy(index_path(&lpath), index_path(&p)).unwrap();
        load_embedding_file(&p)
    };
    ensure!(
        matches!(corrupt(&|b| b[0] = b'X'), Err(LembError::BadMagic { .. })),
        "bad magic not rejected as BadMagic"
    );
    ensure!(
        matches!(corrupt(&|b| b[4..8].copy_from_slice(&9u32.to_le_bytes())), Err(LembError::Version { found: 9 })),
        "bad version not rejected as Version"
    );
    ensure!(
        matches!(
            corrupt(&|b| {
                let n = u64::from_le_bytes(b[12..20].try_into().unwrap()) + 1;
                b[12..20].copy_from_slice(&n.to_le_bytes());
            }),
            Err(LembError::Truncated { .. })
        ),
        "overstated count not rejected as Truncated"
    );
    ensure!(
        matches!(corrupt(&|b| b.truncate(12)), Err(LembError::Truncated { .. })),
        "short header not rejected as Truncated"
    );
    Ok(format!(
        "corpus {} bytes and LEMB {} bytes identical after reload; magic/version/count corruptions rejected",
        bytes.len(),
        lbytes.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("CRF oracle equivalence", crf_oracle),
        ("Gradient suite", gradient_suite),
        ("Marginal normalization", marginals),
        ("Capacity check", capacity),
        ("Generalization check", generalization),
        ("Cross-domain harness", cross_domain),
        ("Metrics identities", metrics_identities),
        ("Format round trips", format_round_trips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.to_lowercase().contains(&f.to_lowercase())) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
