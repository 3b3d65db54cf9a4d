use std::collections::HashMap;
use zoneseg::corpus::{generate_synthetic_corpus, Corpus};
use zoneseg::encoder::{feature_vector, EncoderBackend};
use zoneseg::metrics::evaluate_corpora;
use zoneseg::protocol::{predict_corpus, train_on_corpus};
use zoneseg::seqlab::TrainConfig;
use zoneseg::taxonomy::{TaxonomyRegistry, GMANE15};

fn synth(n: usize, seed: u64) -> Corpus {
    let reg = TaxonomyRegistry::builtin();
    generate_synthetic_corpus(n, reg.get(GMANE15).unwrap(), seed).unwrap()
}

fn short(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        patience: 0,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_decreases_over_first_epochs() {
    let c = synth(30, 3);
    let (_, log) = train_on_corpus(&c, None, &EncoderBackend::Features, &short(5, 1)).unwrap();
    assert_eq!(log.epochs.len(), 5);
    assert!(log.epochs[4].train_loss < log.epochs[0].train_loss, "{:?}", log.epochs);
    assert_eq!(log.config.hidden, 64);
    assert_eq!(log.config.dropout_rate, 0.25);
    assert_eq!(log.config.optimizer.lr, 0.001);
}

#[test]
fn same_seed_same_bytes() {
    let c = synth(6, 4);
    let run = |seed| {
        let (m, log) = train_on_corpus(&c, None, &EncoderBackend::Features, &short(4, seed)).unwrap();
        (m.to_bytes(), log)
    };
    let (a, la) = run(9);
    let (b, lb) = run(9);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_ne!(run(10).0, a);
}

#[test]
fn crf_free_variant_trains() {
    let c = synth(20, 5);
    let cfg = TrainConfig {
        use_crf: false,
        ..short(10, 2)
    };
    let (m, log) = train_on_corpus(&c, None, &EncoderBackend::Features, &cfg).unwrap();
    assert!(m.params.weights.crf.transitions.iter().all(|&x| x == 0.0));
    assert!(log.epochs[9].train_loss < log.epochs[0].train_loss);
    let reg = TaxonomyRegistry::builtin();
    let pred = predict_corpus(&m, &EncoderBackend::Features, &reg, &c).unwrap();
    assert!(evaluate_corpora(&c, &pred).unwrap().accuracy > 0.5);
}

/// Upper bound on what any per-line classifier over the features can reach:
/// every distinct feature vector predicts its majority zone.
#[test]
fn features_nearly_determine_synthetic_zones() {
    let c = synth(200, 11);
    let mut table: HashMap<Vec<u64>, HashMap<&str, usize>> = HashMap::new();
    for e in c.emails() {
        for (line, zone) in e.email().lines().iter().zip(e.zones()) {
            let key = feature_vector(line).iter().map(|x| x.to_bits()).collect();
            *table.entry(key).or_default().entry(zone.as_str()).or_default() += 1;
        }
    }
    let majority: usize = table.values().map(|m| m.values().max().unwrap()).sum();
    let bound = majority as f64 / c.n_lines() as f64;
    eprintln!("per-line majority bound {bound:.4}");
    assert!(bound >= 0.95, "{bound}");
}
