//! Single-threaded trainer: one update per email, seeded shuffling, early
//! stopping on dev line accuracy.

use super::model::{dropout_mask, predict, sequence_loss_and_grad, ModelConfig, ModelParams};
use super::optim::{OptState, RmsPropConfig};
use super::SeqlabError;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One encoded email: L × D inputs and L gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Sequence {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self, SeqlabError> {
        if inputs.nrows() == 0 {
            return Err(SeqlabError::EmptySequence);
        }
        if inputs.nrows() != labels.len() {
            return Err(SeqlabError::Shape(format!(
                "{} input rows for {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub dropout_rate: f64,
    pub optimizer: RmsPropConfig,
    pub max_epochs: usize,
    /// Stop after this many epochs without dev improvement; 0 disables.
    pub patience: usize,
    pub seed: u64,
    pub use_crf: bool,
    /// Stop as soon as dev accuracy reaches this value.
    pub target_dev_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: super::model::DEFAULT_HIDDEN,
            dropout_rate: super::model::DEFAULT_DROPOUT,
            optimizer: RmsPropConfig::default(),
            max_epochs: 500,
            patience: 20,
            seed: 0,
            use_crf: true,
            target_dev_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum of per-email negative log-likelihoods (with dropout active).
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainConfig,
    pub loss_aggregation: String,
    pub gradient_clipping: String,
    /// `"dev"`, or `"train"` when no dev sequences were given.
    pub selection_set: String,
    pub n_train: usize,
    pub n_dev: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: TrainingLog,
}

/// Fraction of lines labeled correctly, pooled over `data`.
pub fn line_accuracy(params: &ModelParams, data: &[Sequence]) -> Result<f64, SeqlabError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for seq in data {
        let pred = predict(params, seq.inputs.view())?;
        hit += pred.iter().zip(&seq.labels).filter(|(a, b)| a == b).count();
        total += seq.len();
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

/// Train a fresh model. Returns the parameters with the best selection-set
/// line accuracy (earliest epoch on ties).
pub fn train(
    train_set: &[Sequence],
    dev_set: &[Sequence],
    n_labels: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome, SeqlabError> {
    let first = train_set
        .first()
        .ok_or_else(|| SeqlabError::Config("empty training set".into()))?;
    let input_dim = first.inputs.ncols();
    for seq in train_set.iter().chain(dev_set) {
        if seq.inputs.ncols() != input_dim {
            return Err(SeqlabError::DimMismatch {
                expected: input_dim,
                found: seq.inputs.ncols(),
            });
        }
        if let Some((position, &label)) = seq.labels.iter().enumerate().find(|(_, &l)| l >= n_labels) {
            return Err(SeqlabError::LabelOutOfRange {
                position,
                label,
                k: n_labels,
            });
        }
    }
    if config.max_epochs == 0 {
        return Err(SeqlabError::Config("max_epochs must be positive".into()));
    }
    let model_cfg = ModelConfig {
        input_dim,
        hidden: config.hidden,
        n_labels,
        dropout_rate: config.dropout_rate,
        use_crf: config.use_crf,
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    let mut params = ModelParams::init(model_cfg, &mut init_rng)?;
    let mut opt = OptState::new(config.optimizer, &params.weights);
    let selection = if dev_set.is_empty() { train_set } else { dev_set };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::new();
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let seq = &train_set[i];
            let mask = (config.dropout_rate > 0.0).then(|| {
                dropout_mask(&mut dropout_rng, seq.len(), 2 * config.hidden, config.dropout_rate)
            });
            let (loss, grads) =
                sequence_loss_and_grad(&params, seq.inputs.view(), &seq.labels, mask)?;
            loss_sum += loss;
            opt.step(&mut params.weights, &grads);
        }
        if !params.weights.all_finite() {
            return Err(SeqlabError::NonFinite);
        }
        let acc = line_accuracy(&params, selection)?;
        log::debug!("epoch {epoch}: loss {loss_sum:.6}, accuracy {acc:.4}");
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum,
            dev_accuracy: acc,
        });
        if acc > best_acc {
            best_acc = acc;
            best_epoch = epoch;
            best = params.clone();
        }
        if config.target_dev_accuracy.is_some_and(|t| best_acc >= t) {
            stop_reason = StopReason::TargetReached;
            break;
        }
        if config.patience > 0 && epoch - best_epoch >= config.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    Ok(TrainOutcome {
        params: best,
        log: TrainingLog {
            config: config.clone(),
            loss_aggregation: "sum_per_email".into(),
            gradient_clipping: "none".into(),
            selection_set: if dev_set.is_empty() { "train" } else { "dev" }.into(),
            n_train: train_set.len(),
            n_dev: dev_set.len(),
            epochs,
            best_epoch,
            best_dev_accuracy: best_acc,
            stop_reason,
        },
    })
}
