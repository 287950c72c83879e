//! Training driver: dataset file in, checkpoints and history CSV out.

use std::path::{Path, PathBuf};

use super::checkpoint::write_model;
use super::config::KvConfig;
use super::dataset::read_dataset;
use super::{num, sibling, write_csv};
use crate::error::Result;
use crate::mlp::{init_model, train_with, AdamConfig, EpochRecord, Example, TrainConfig, TrainOutcome};

pub const HISTORY_HEADER: [&str; 6] = ["epoch", "train_loss", "val_loss", "val_acc_ppt", "val_acc_qfi1", "val_acc_qfi2"];

pub fn train_config_from(cfg: &KvConfig, seed: u64) -> Result<TrainConfig> {
    cfg.reject_unknown(&[
        "epochs",
        "batch_size",
        "learning_rate",
        "dropout",
        "train_fraction",
        "beta1",
        "beta2",
        "epsilon",
    ])?;
    let d = TrainConfig::default();
    let a = AdamConfig::default();
    let config = TrainConfig {
        epochs: cfg.get("epochs", d.epochs)?,
        batch_size: cfg.get("batch_size", d.batch_size)?,
        dropout_rate: cfg.get("dropout", d.dropout_rate)?,
        train_fraction: cfg.get("train_fraction", d.train_fraction)?,
        seed,
        adam: AdamConfig {
            learning_rate: cfg.get("learning_rate", a.learning_rate)?,
            beta1: cfg.get("beta1", a.beta1)?,
            beta2: cfg.get("beta2", a.beta2)?,
            epsilon: cfg.get("epsilon", a.epsilon)?,
        },
    };
    config.validate()?;
    Ok(config)
}

pub fn history_rows(history: &[EpochRecord]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                num(r.train_loss),
                num(r.val_loss),
                num(r.val_accuracy[0]),
                num(r.val_accuracy[1]),
                num(r.val_accuracy[2]),
            ]
        })
        .collect()
}

/// Files written by [`cmd_train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainArtifacts {
    /// Best-validation checkpoint.
    pub best: PathBuf,
    pub last: PathBuf,
    pub history: PathBuf,
}

impl TrainArtifacts {
    pub fn for_output(out: &Path) -> Self {
        Self {
            best: out.to_path_buf(),
            last: sibling(out, ".final"),
            history: sibling(out, ".history.csv"),
        }
    }
}

pub fn train_examples(examples: &[Example], config: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let outcome = train_with(init_model(config.seed), examples, config, |_| {})?;
    let files = TrainArtifacts::for_output(out);
    write_model(&files.best, &outcome.best_model)?;
    write_model(&files.last, &outcome.final_model)?;
    write_csv(&files.history, &HISTORY_HEADER, &history_rows(&outcome.history))?;
    Ok(outcome)
}

pub fn cmd_train(dataset: &Path, config: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let examples: Vec<Example> = read_dataset(dataset)?.iter().map(|r| r.example()).collect();
    train_examples(&examples, config, out)
}
