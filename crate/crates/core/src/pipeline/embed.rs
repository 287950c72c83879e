//! 2-D embeddings of dataset patterns or of the network's hidden features.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::config::KvConfig;
use super::dataset::DatasetRecord;
use super::{num, write_csv};
use crate::error::{CvError, Result};
use crate::homodyne::{CorrelationPattern, PATTERN_LEN};
use crate::mlp::{forward_batch, MlpModel};
use crate::tsne::{embed_with_keys, silhouette_score, Embedding, TsneConfig};

pub const EMBED_HEADER: [&str; 5] = ["x", "y", "e_ppt", "e_qfi1", "e_qfi2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedSource {
    /// Normalized correlation patterns.
    Raw,
    /// Last hidden layer activations.
    Features,
}

impl FromStr for EmbedSource {
    type Err = CvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "features" => Ok(Self::Features),
            other => Err(CvError::Config(format!("unknown embedding source {other:?}, expected raw or features"))),
        }
    }
}

impl fmt::Display for EmbedSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Features => "features",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbedOptions {
    /// Use only the first `limit` records.
    pub limit: Option<usize>,
    pub tsne: TsneConfig,
}

impl EmbedOptions {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        cfg.reject_unknown(&[
            "limit",
            "perplexity",
            "iterations",
            "learning_rate",
            "exaggeration",
            "exaggeration_iterations",
            "momentum_switch",
            "init_std",
        ])?;
        let d = TsneConfig::default();
        let limit = match cfg.raw("limit") {
            Some(_) => Some(cfg.get("limit", 0usize)?),
            None => None,
        };
        Ok(Self {
            limit,
            tsne: TsneConfig {
                perplexity: cfg.get("perplexity", d.perplexity)?,
                iterations: cfg.get("iterations", d.iterations)?,
                learning_rate: cfg.get("learning_rate", d.learning_rate)?,
                exaggeration: cfg.get("exaggeration", d.exaggeration)?,
                exaggeration_iterations: cfg.get("exaggeration_iterations", d.exaggeration_iterations)?,
                momentum_switch: cfg.get("momentum_switch", d.momentum_switch)?,
                init_std: cfg.get("init_std", d.init_std)?,
                seed,
                ..d
            },
        })
    }
}

/// Point matrix for `source`, one row per pattern.
pub fn source_matrix(
    source: EmbedSource,
    model: Option<&MlpModel>,
    patterns: &[&CorrelationPattern],
) -> Result<DMatrix<f64>> {
    match source {
        EmbedSource::Raw => Ok(DMatrix::from_fn(patterns.len(), PATTERN_LEN, |r, c| {
            patterns[r].values()[c]
        })),
        EmbedSource::Features => {
            let model = model.ok_or_else(|| CvError::Config("feature embedding needs a model".into()))?;
            Ok(forward_batch(model, patterns).1)
        }
    }
}

/// Silhouette of the `E_PPT` partition on the given points.
pub fn ppt_silhouette(points: &DMatrix<f64>, records: &[DatasetRecord]) -> Result<f64> {
    let labels: Vec<usize> = records.iter().map(|r| r.labels.e_ppt as usize).collect();
    silhouette_score(points, &labels)
}

#[derive(Clone, Debug)]
pub struct EmbedOutcome {
    pub embedding: Embedding,
    /// `E_PPT` silhouette on the high-dimensional points, when both classes occur.
    pub silhouette: Option<f64>,
}

pub fn embed_records(
    records: &[DatasetRecord],
    source: EmbedSource,
    model: Option<&MlpModel>,
    opts: &EmbedOptions,
) -> Result<EmbedOutcome> {
    let records = &records[..opts.limit.unwrap_or(records.len()).min(records.len())];
    let patterns: Vec<&CorrelationPattern> = records.iter().map(|r| &r.pattern).collect();
    let data = source_matrix(source, model, &patterns)?;
    let keys: Vec<u64> = records.iter().map(|r| r.state_id).collect();
    let embedding = embed_with_keys(&data, &keys, &opts.tsne)?;
    let silhouette = ppt_silhouette(&data, records).ok();
    Ok(EmbedOutcome { embedding, silhouette })
}

pub fn embedding_rows(embedding: &Embedding, records: &[DatasetRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .enumerate()
        .take(embedding.points.nrows())
        .map(|(i, r)| {
            let l = r.labels.as_array().map(|b| u8::from(b).to_string());
            vec![
                num(embedding.points[(i, 0)]),
                num(embedding.points[(i, 1)]),
                l[0].clone(),
                l[1].clone(),
                l[2].clone(),
            ]
        })
        .collect()
}

pub fn cmd_embed(
    records: &[DatasetRecord],
    source: EmbedSource,
    model: Option<&MlpModel>,
    opts: &EmbedOptions,
    out: &Path,
) -> Result<EmbedOutcome> {
    let outcome = embed_records(records, source, model, opts)?;
    write_csv(out, &EMBED_HEADER, &embedding_rows(&outcome.embedding, records))?;
    Ok(outcome)
}
