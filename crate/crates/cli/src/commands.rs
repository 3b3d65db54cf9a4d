use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use zoneseg::corpus::{generate_synthetic_corpus_with, read_corpus_with, write_corpus, Corpus, SynthDomain};
use zoneseg::email::Email;
use zoneseg::encoder::{EncoderBackend, EncoderSpec, LembWriter, ServiceClient, ServiceConfig};
use zoneseg::metrics::{agreement_by_language, evaluate_corpora, render_agreement, F1Average};
use zoneseg::protocol::{evaluate_by_language, predict_corpus, predict_emails, render_recall_table, train_on_corpus};
use zoneseg::seqlab::{load_model, save_model, LabelerModel};
use zoneseg::taxonomy::TaxonomyRegistry;
use zoneseg::write_atomic;

use crate::args::{AgreementArgs, EncodeArgs, EvaluateArgs, F1Choice, PredictArgs, SynthArgs, TrainArgs};
use crate::failure::{Classify, Failure};

type Outcome = Result<(), Failure>;

fn read(path: &Path, registry: &TaxonomyRegistry) -> Result<Corpus, Failure> {
    read_corpus_with(path, registry).usage()
}

fn timeout(secs: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(secs)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Failure::Usage(format!("--timeout must be a positive number of seconds, got {secs}")))
}

fn open_encoder(spec: &str, timeout_secs: f64) -> Result<EncoderBackend, Failure> {
    let spec: EncoderSpec = spec.parse().usage()?;
    let spec = spec.with_timeout(timeout(timeout_secs)?);
    let backend = spec.open()?;
    log::info!("encoder {spec}: {} dimensions", backend.dim());
    Ok(backend)
}

fn load(path: &Path) -> Result<LabelerModel, Failure> {
    load_model(path).usage()
}

fn check_dims(model: &LabelerModel, encoder: &EncoderBackend) -> Outcome {
    let want = model.params.config().input_dim;
    if encoder.dim() != want {
        return Err(Failure::Usage(format!(
            "encoder produces {}-dimensional vectors, model expects {want}",
            encoder.dim()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Outcome {
    write_atomic(path, |f| f.write_all(text.as_bytes()))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    s.into()
}

pub fn train(args: &TrainArgs, registry: &TaxonomyRegistry) -> Outcome {
    let config = args.train_config();
    if !(0.0..1.0).contains(&config.dropout_rate) {
        return Err(Failure::Usage(format!("--dropout must be in [0, 1), got {}", args.dropout)));
    }
    let train_c = read(&args.train, registry)?;
    let dev_c = args.dev.as_deref().map(|p| read(p, registry)).transpose()?;
    if let Some(dev) = &dev_c {
        if dev.taxonomy() != train_c.taxonomy() {
            return Err(Failure::Usage(format!(
                "train corpus uses taxonomy {:?} but dev corpus uses {:?}",
                train_c.taxonomy().name(),
                dev.taxonomy().name()
            )));
        }
    } else {
        log::warn!("no dev corpus; selecting on the training set");
    }
    let encoder = open_encoder(&args.encoder, args.timeout)?;
    log::info!(
        "training on {} emails ({} lines), taxonomy {}",
        train_c.len(),
        train_c.n_lines(),
        train_c.taxonomy().name()
    );

    let (model, log) = train_on_corpus(&train_c, dev_c.as_ref(), &encoder, &config)?;
    save_model(&model, &args.model_out).runtime()?;
    let log_out = args
        .log_out
        .clone()
        .unwrap_or_else(|| with_suffix(&args.model_out, ".log.json"));
    let mut log_json = serde_json::to_string_pretty(&log).expect("log serializes");
    log_json.push('\n');
    write_text(&log_out, &log_json)?;

    let last = log.epochs.last().map_or(0.0, |e| e.dev_accuracy);
    log::info!(
        "stopped after {} epochs ({:?}); final {} accuracy {last:.4}, best {:.4} at epoch {}",
        log.epochs.len(),
        log.stop_reason,
        log.selection_set,
        log.best_dev_accuracy,
        log.best_epoch
    );
    log::info!("model written to {}, log to {}", args.model_out.display(), log_out.display());
    Ok(())
}

fn raw_emails(paths: &[PathBuf], lang: &str) -> Result<Vec<Email>, Failure> {
    paths
        .iter()
        .map(|p| {
            let body = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Email::from_body(id, lang, &body).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        })
        .collect()
}

pub fn predict(args: &PredictArgs, registry: &TaxonomyRegistry) -> Outcome {
    let model = load(&args.model)?;
    registry.get(&model.taxonomy).usage()?;
    let encoder = open_encoder(&args.encoder, args.timeout)?;
    check_dims(&model, &encoder)?;
    let pred = match &args.corpus {
        Some(path) => {
            let corpus = read(path, registry)?;
            predict_corpus(&model, &encoder, registry, &corpus)?
        }
        None => {
            let emails = raw_emails(&args.raw, &args.lang)?;
            let mut ids = std::collections::HashSet::new();
            if let Some(e) = emails.iter().find(|e| !ids.insert(e.id())) {
                return Err(Failure::Usage(format!("two --raw files share the id {:?}", e.id())));
            }
            predict_emails(&model, &encoder, registry, "raw", &emails)?
        }
    };
    write_corpus(&pred, &args.out).runtime()?;
    log::info!(
        "labeled {} emails ({} lines) under {}; wrote {}",
        pred.len(),
        pred.n_lines(),
        pred.taxonomy().name(),
        args.out.display()
    );
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, registry: &TaxonomyRegistry) -> Outcome {
    let gold = read(&args.gold, registry)?;
    if let Some(t) = &args.map_taxonomy {
        registry.get(t).usage()?;
    }
    let pred = match (&args.pred, &args.model) {
        (Some(path), _) => read(path, registry)?,
        (None, Some(model_path)) => {
            let model = load(model_path)?;
            let encoder = open_encoder(&args.encoder, args.timeout)?;
            check_dims(&model, &encoder)?;
            predict_corpus(&model, &encoder, registry, &gold)?
        }
        (None, None) => unreachable!("clap requires --pred or --model"),
    };
    let (gold, pred) = match &args.map_taxonomy {
        Some(t) => (gold.map_to(registry, t).usage()?, pred.map_to(registry, t).usage()?),
        None => (gold, pred),
    };

    let report = evaluate_corpora(&gold, &pred).usage()?;
    print!("{}", report.render());
    let mut json = if args.by_language {
        let columns = evaluate_by_language(&gold, &pred)?;
        println!();
        print!("{}", render_recall_table(&columns));
        serde_json::to_string_pretty(&columns).expect("report serializes")
    } else {
        report.to_json()
    };
    if let Some(out) = &args.report_out {
        json.push('\n');
        write_text(out, &json)?;
    }
    Ok(())
}

pub fn agreement(args: &AgreementArgs, registry: &TaxonomyRegistry) -> Outcome {
    let a1 = read(&args.a1, registry)?;
    let a2 = read(&args.a2, registry)?;
    let average = match args.f1 {
        F1Choice::Macro => F1Average::Macro,
        F1Choice::Micro => F1Average::Micro,
    };
    let reports = agreement_by_language(&a1, &a2, average).usage()?;
    print!("{}", render_agreement(&reports));
    if let Some(out) = &args.report_out {
        let mut json = serde_json::to_string_pretty(&reports).expect("report serializes");
        json.push('\n');
        write_text(out, &json)?;
    }
    Ok(())
}

pub fn encode(args: &EncodeArgs, registry: &TaxonomyRegistry) -> Outcome {
    let corpus = read(&args.corpus, registry)?;
    let config = ServiceConfig {
        dim: args.dim,
        timeout: timeout(args.timeout)?,
        max_in_flight: args.parallel as usize,
        ..ServiceConfig::new(args.service.clone())
    };
    let client = ServiceClient::connect(config)?;
    let dim = client.dim();
    log::info!("service {}: {dim} dimensions", args.service);

    let mut writer = LembWriter::create(&args.out, dim).runtime()?;
    let chunk = 4 * args.parallel as usize;
    for emails in corpus.emails().chunks(chunk) {
        let batches: Vec<Vec<String>> = emails.iter().map(|e| e.email().lines().to_vec()).collect();
        let embedded = client.embed_batches(&batches)?;
        for (email, rows) in emails.iter().zip(embedded) {
            let rows: Vec<Vec<f32>> = rows
                .iter()
                .map(|r| r.values().iter().map(|&x| x as f32).collect())
                .collect();
            writer.push_email(email.id(), &rows).runtime()?;
        }
    }
    writer.finish().runtime()?;
    log::info!(
        "wrote {} rows for {} emails to {}",
        corpus.n_lines(),
        corpus.len(),
        args.out.display()
    );
    Ok(())
}

pub fn synth(args: &SynthArgs, registry: &TaxonomyRegistry) -> Outcome {
    let taxonomy = registry.get(&args.taxonomy).usage()?;
    let domain: SynthDomain = args.domain.parse().map_err(Failure::Usage)?;
    let mut corpus = generate_synthetic_corpus_with(registry, domain, args.n, taxonomy, args.seed).usage()?;
    if let Some(name) = &args.name {
        corpus = corpus.renamed(name.clone());
    }
    write_corpus(&corpus, &args.out).runtime()?;
    log::info!(
        "wrote {} emails ({} lines) under {} to {}",
        corpus.len(),
        corpus.n_lines(),
        corpus.taxonomy().name(),
        args.out.display()
    );
    Ok(())
}
