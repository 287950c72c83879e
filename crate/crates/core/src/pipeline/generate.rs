//! Dataset generation: synthesize, label, bin.

use std::path::Path;

use rayon::prelude::*;

use super::config::KvConfig;
use super::dataset::{class_balance, write_dataset, DatasetRecord};
use super::streams;
use crate::error::Result;
use crate::fock::{FockCutoff, TwoModeState};
use crate::homodyne::{pattern_from_pdf, CorrelationPattern};
use crate::seeding::rng_for;
use crate::stellar::{synthesize_random_state, GeneratedState, GenerationRanges};
use crate::witness::{label_state, WitnessValues};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateOptions {
    pub count: usize,
    pub cutoff: FockCutoff,
    pub ranges: GenerationRanges,
    pub seed: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            count: 15_000,
            cutoff: FockCutoff::default(),
            ranges: GenerationRanges::default(),
            seed: 0,
        }
    }
}

pub(crate) const STATE_KEYS: [&str; 5] = ["n_max", "r_max", "alpha_max", "eta_max", "bs_prob"];

pub(crate) fn state_options(cfg: &KvConfig) -> Result<(FockCutoff, GenerationRanges)> {
    let d = GenerationRanges::default();
    let cutoff = FockCutoff::new(cfg.get("n_max", FockCutoff::DEFAULT_N_MAX)?)?;
    let ranges = GenerationRanges {
        r_max: cfg.get("r_max", d.r_max)?,
        alpha_max: cfg.get("alpha_max", d.alpha_max)?,
        eta_max: cfg.get("eta_max", d.eta_max)?,
        bs_prob: cfg.get("bs_prob", d.bs_prob)?,
    };
    ranges.validate()?;
    Ok((cutoff, ranges))
}

impl GenerateOptions {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        let mut allowed = vec!["count"];
        allowed.extend(STATE_KEYS);
        cfg.reject_unknown(&allowed)?;
        let (cutoff, ranges) = state_options(cfg)?;
        Ok(Self {
            count: cfg.get("count", 15_000)?,
            cutoff,
            ranges,
            seed,
        })
    }
}

/// A generated state with its labels and theoretical pattern.
#[derive(Clone, Debug)]
pub struct LabeledState {
    pub generated: GeneratedState,
    pub witness: WitnessValues,
    pub pattern: CorrelationPattern,
}

impl LabeledState {
    pub fn state(&self) -> &TwoModeState {
        &self.generated.state
    }
}

/// State `index` of the stream `stream` under `seed`.
pub fn labeled_state(
    cutoff: FockCutoff,
    ranges: &GenerationRanges,
    seed: u64,
    stream: u64,
    index: u64,
) -> Result<LabeledState> {
    let mut rng = rng_for(seed, &[stream, index]);
    let generated = synthesize_random_state(ranges, cutoff, &mut rng)?;
    let (witness, _) = label_state(&generated.state)?;
    let pattern = pattern_from_pdf(&generated.state)?;
    Ok(LabeledState {
        generated,
        witness,
        pattern,
    })
}

pub fn generate_records(opts: &GenerateOptions) -> Result<Vec<DatasetRecord>> {
    (0..opts.count as u64)
        .into_par_iter()
        .map(|i| {
            let s = labeled_state(opts.cutoff, &opts.ranges, opts.seed, streams::GENERATE, i)?;
            DatasetRecord::new(i, s.generated.core, s.generated.circuit, s.witness, &s.pattern)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSummary {
    pub count: usize,
    /// Positive fractions of `(E_PPT, E_QFI1, E_QFI2)`.
    pub balance: [f64; 3],
}

pub fn cmd_generate(opts: &GenerateOptions, out: &Path) -> Result<GenerateSummary> {
    let records = generate_records(opts)?;
    write_dataset(out, &records)?;
    Ok(GenerateSummary {
        count: records.len(),
        balance: class_balance(&records),
    })
}
