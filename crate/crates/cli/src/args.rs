use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use zoneseg::seqlab::{RmsPropConfig, TrainConfig};
use zoneseg::taxonomy::GMANE15;

#[derive(Debug, Parser, Serialize)]
#[command(name = "zoneseg", version, about = "Label email lines with functional zones")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file with per-command defaults: {"train": {"hidden": 32, ...}, ...}.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, env = "ZONESEG_CONFIG", value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Extra taxonomy definitions (JSON); may be repeated.
    #[arg(long = "taxonomy-file", global = true, value_name = "JSON")]
    pub taxonomy_files: Vec<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Train a labeler on an annotated corpus.
    Train(TrainArgs),
    /// Label emails with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Inter-annotator agreement between two annotations of the same emails.
    Agreement(AgreementArgs),
    /// Materialize service embeddings for a corpus into an embedding file.
    Encode(EncodeArgs),
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
}

impl Command {
    pub const NAMES: [&'static str; 6] = ["train", "predict", "evaluate", "agreement", "encode", "synth"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Agreement(_) => "agreement",
            Command::Encode(_) => "encode",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Training corpus (JSONL).
    #[arg(long)]
    pub train: PathBuf,
    /// Development corpus used for model selection; without it the training set is used.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Line encoder: features, file:<path> or service:<url>.
    #[arg(long, default_value = "features")]
    pub encoder: String,
    /// Where to write the model.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Where to write the training log [default: <model-out>.log.json].
    #[arg(long)]
    pub log_out: Option<PathBuf>,
    /// LSTM units per direction.
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    pub hidden: usize,
    /// Dropout on the BiLSTM output during training.
    #[arg(long, default_value_t = TrainConfig::default().dropout_rate)]
    pub dropout: f64,
    /// RMSprop learning rate.
    #[arg(long, default_value_t = RmsPropConfig::default().lr)]
    pub lr: f64,
    /// RMSprop decay of the squared-gradient average.
    #[arg(long, default_value_t = RmsPropConfig::default().decay)]
    pub decay: f64,
    /// RMSprop denominator epsilon.
    #[arg(long, default_value_t = RmsPropConfig::default().eps)]
    pub eps: f64,
    /// Upper bound on passes over the training set.
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    /// Stop once dev accuracy reaches this value.
    #[arg(long)]
    pub target_dev_accuracy: Option<f64>,
    /// Seeds initialization, shuffling and dropout.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop the CRF layer and decode by per-line argmax.
    #[arg(long)]
    pub no_crf: bool,
    /// Service request timeout in seconds (service encoders only).
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
}

impl TrainArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            dropout_rate: self.dropout,
            optimizer: RmsPropConfig {
                lr: self.lr,
                decay: self.decay,
                eps: self.eps,
            },
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            use_crf: !self.no_crf,
            target_dev_accuracy: self.target_dev_accuracy,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Line encoder: features, file:<path> or service:<url>.
    #[arg(long, default_value = "features")]
    pub encoder: String,
    /// Corpus whose emails are labeled (annotations are ignored).
    #[arg(long, conflicts_with = "raw", required_unless_present = "raw")]
    pub corpus: Option<PathBuf>,
    /// Plain-text email bodies, one per file; the file stem becomes the email id.
    #[arg(long, num_args = 1..)]
    pub raw: Vec<PathBuf>,
    /// Language tag for --raw emails.
    #[arg(long, default_value = "und", requires = "raw")]
    pub lang: String,
    /// Output corpus (JSONL) in the model's taxonomy.
    #[arg(long)]
    pub out: PathBuf,
    /// Service request timeout in seconds (service encoders only).
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Gold corpus.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted corpus.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub pred: Option<PathBuf>,
    /// Predict the gold emails with this model instead of reading --pred.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Line encoder used with --model.
    #[arg(long, default_value = "features")]
    pub encoder: String,
    /// Map gold and predictions into this taxonomy before scoring.
    #[arg(long)]
    pub map_taxonomy: Option<String>,
    /// Also print recall per language tag.
    #[arg(long)]
    pub by_language: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Service request timeout in seconds (service encoders only).
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Choice {
    Macro,
    Micro,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreementArgs {
    /// First annotator's corpus.
    #[arg(long)]
    pub a1: PathBuf,
    /// Second annotator's corpus (same emails).
    #[arg(long)]
    pub a2: PathBuf,
    /// How per-zone F1 is averaged.
    #[arg(long, value_enum, default_value_t = F1Choice::Macro)]
    pub f1: F1Choice,
    /// Write the JSON reports here.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    /// Corpus whose lines are embedded.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embedding service base URL.
    #[arg(long)]
    pub service: String,
    /// Embedding file to write; the index goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum concurrent requests.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallel: u64,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Expected embedding width; read from the service when omitted.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Number of emails.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Taxonomy of the annotations.
    #[arg(long, default_value = GMANE15)]
    pub taxonomy: String,
    /// Template family: A or B.
    #[arg(long, default_value = "A")]
    pub domain: String,
    /// Output corpus (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus name [default: synthetic-<domain>-<seed>].
    #[arg(long)]
    pub name: Option<String>,
}
