//! Mini-batch training with Adam and early stopping on validation F1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::path::{Path, PathBuf};

use crate::dataset::{load_preprocessed, DatasetError, PreprocessedRecord};
use crate::encoder::{
    assemble_input, batch_loss_and_grad, encode_pair, EncodedInput, EncoderError, InputMode, ModelConfig,
    ModelParams,
};
use crate::metrics::{confusion, scores, MetricsError, Scores};
use crate::objective::{ContrastiveConfig, ObjectiveError};
use crate::optim::{Adam, AdamConfig};
use crate::persist::{Checkpoint, PersistError};
use crate::vocab::{build_vocab, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("validation set is empty")]
    EmptyValid,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: ContrastiveConfig,
    pub threshold: f64,
    pub dim: usize,
    pub max_len: usize,
    pub attention: bool,
    pub input_mode: InputMode,
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-3,
            max_epochs: 20,
            patience: 3,
            seed: 0,
            loss: ContrastiveConfig::default(),
            threshold: 0.5,
            dim: 64,
            max_len: 256,
            attention: true,
            input_mode: InputMode::Tagged,
            min_count: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.loss.validate()?;
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.max_len < 8 {
            return bad("max_len must be at least 8");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogEvent {
    Step {
        step: u64,
        epoch: usize,
        l_bce: f64,
        l_infonce: f64,
        l_neg: f64,
        l_contrast: f64,
        l_total: f64,
    },
    Epoch {
        epoch: usize,
        mean_l_total: f64,
        accuracy: f64,
        precision: f64,
        recall: f64,
        f1: f64,
    },
}

pub fn render_log(events: &[LogEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("log events serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub epochs_run: usize,
    pub log: Vec<LogEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: u8,
}

fn encode_all(
    records: &[PreprocessedRecord],
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<Vec<EncodedInput>, EncoderError> {
    records
        .par_iter()
        .map(|r| assemble_input(r, vocab, config.max_len, config.input_mode))
        .collect()
}

fn predict_encoded(inputs: &[EncodedInput], params: &ModelParams, threshold: f64) -> Result<Vec<Prediction>, EncoderError> {
    inputs
        .par_iter()
        .map(|x| {
            let p = encode_pair(x, params)?.prob;
            Ok(Prediction { probability: p, label: u8::from(p >= threshold) })
        })
        .collect()
}

/// Probability and verdict per record; label 1 iff `p >= threshold`.
pub fn predict(
    records: &[PreprocessedRecord],
    params: &ModelParams,
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<Vec<Prediction>, EncoderError> {
    let inputs = encode_all(records, vocab, &params.config)?;
    predict_encoded(&inputs, params, threshold)
}

fn evaluate(inputs: &[EncodedInput], gold: &[u8], params: &ModelParams, threshold: f64) -> Result<Scores, TrainError> {
    let pred: Vec<u8> = predict_encoded(inputs, params, threshold)?.iter().map(|p| p.label).collect();
    Ok(scores(&confusion(&pred, gold)?))
}

/// Trains from scratch and returns the checkpoint with the best validation F1
/// (earliest epoch on ties).
pub fn train(
    train_set: &[PreprocessedRecord],
    valid_set: &[PreprocessedRecord],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if valid_set.is_empty() {
        return Err(TrainError::EmptyValid);
    }

    let vocab = build_vocab(train_set, cfg.min_count)?;
    let model_cfg = ModelConfig {
        vocab_size: vocab.len(),
        dim: cfg.dim,
        max_len: cfg.max_len,
        attention: cfg.attention,
        input_mode: cfg.input_mode,
    };
    let train_inputs = encode_all(train_set, &vocab, &model_cfg)?;
    let train_labels: Vec<u8> = train_set.iter().map(|r| r.record.label).collect();
    let valid_inputs = encode_all(valid_set, &vocab, &model_cfg)?;
    let valid_labels: Vec<u8> = valid_set.iter().map(|r| r.record.label).collect();

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(model_cfg, &mut init_rng);
    params.round_to_storage();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut adam = Adam::for_params(AdamConfig::with_lr(cfg.learning_rate), &params);

    let mut log = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&EncodedInput> = chunk.iter().map(|&i| &train_inputs[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_labels[i]).collect();
            let out = batch_loss_and_grad(&params, &inputs, &labels, &cfg.loss)?;
            adam.step_model(&mut params, &out.grads);
            params.round_to_storage();
            let l = &out.loss;
            total += l.l_total;
            batches += 1;
            log.push(LogEvent::Step {
                step: adam.steps(),
                epoch,
                l_bce: l.l_bce,
                l_infonce: l.l_infonce,
                l_neg: l.l_neg,
                l_contrast: l.l_contrast,
                l_total: l.l_total,
            });
        }

        let s = evaluate(&valid_inputs, &valid_labels, &params, cfg.threshold)?;
        log.push(LogEvent::Epoch {
            epoch,
            mean_l_total: total / batches as f64,
            accuracy: s.accuracy,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        });
        if best.as_ref().map_or(true, |b| s.f1 > b.validation_f1) {
            best = Some(Checkpoint {
                params: params.clone(),
                vocab: vocab.clone(),
                loss: cfg.loss,
                threshold: cfg.threshold,
                epoch,
                validation_f1: s.f1,
            });
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { checkpoint: best.expect("at least one epoch ran"), epochs_run, log })
}

/// `<out>.log.jsonl`, where the training log for checkpoint `out` goes.
pub fn log_path_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".log.jsonl");
    PathBuf::from(name)
}

/// Loads preprocessed splits, trains, and writes the best checkpoint to `out`
/// and the log next to it.
pub fn train_files(train_path: &Path, valid_path: &Path, out: &Path, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let train_set = load_preprocessed(train_path)?;
    let valid_set = load_preprocessed(valid_path)?;
    let outcome = train(&train_set, &valid_set, cfg)?;
    outcome.checkpoint.save(out)?;
    let log_path = log_path_for(out);
    std::fs::write(&log_path, render_log(&outcome.log))
        .map_err(|source| TrainError::Io { path: log_path.display().to_string(), source })?;
    Ok(outcome)
}
