//! Accuracy versus sample count on unseen states, for the network and for
//! MaxLik reconstruction from the same homodyne records.

use std::path::Path;

use rayon::prelude::*;

use super::config::KvConfig;
use super::generate::{labeled_state, state_options, STATE_KEYS};
use super::{num, streams, write_csv};
use crate::error::Result;
use crate::fock::{fidelity, FockCutoff};
use crate::homodyne::{CorrelationPattern, HomodyneSampleSet, HomodyneSampler, QuadGrid, CHANNEL_LEN};
use crate::maxlik::{reconstruct_with, BinPovm, DEFAULT_ITERATIONS};
use crate::mlp::{label_accuracy, predict_labels, MlpModel};
use crate::seeding::rng_for;
use crate::stellar::GenerationRanges;
use crate::witness::{label_state, LabelVector};

pub const DEFAULT_N_LIST: [usize; 5] = [10, 100, 1_000, 10_000, 100_000];

pub const REPORT_HEADER: [&str; 8] = [
    "n",
    "nn_acc_ppt",
    "nn_acc_qfi1",
    "nn_acc_qfi2",
    "maxlik_acc_ppt",
    "maxlik_acc_qfi1",
    "maxlik_acc_qfi2",
    "maxlik_mean_fidelity",
];

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluateOptions {
    pub n_states: usize,
    pub n_list: Vec<usize>,
    pub with_maxlik: bool,
    pub maxlik_iterations: usize,
    pub cutoff: FockCutoff,
    pub ranges: GenerationRanges,
    pub seed: u64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            n_states: 500,
            n_list: DEFAULT_N_LIST.to_vec(),
            with_maxlik: true,
            maxlik_iterations: DEFAULT_ITERATIONS,
            cutoff: FockCutoff::default(),
            ranges: GenerationRanges::default(),
            seed: 0,
        }
    }
}

impl EvaluateOptions {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        let mut allowed = vec!["n_states", "n_list", "with_maxlik", "maxlik_iterations"];
        allowed.extend(STATE_KEYS);
        cfg.reject_unknown(&allowed)?;
        let d = Self::default();
        let (cutoff, ranges) = state_options(cfg)?;
        Ok(Self {
            n_states: cfg.get("n_states", d.n_states)?,
            n_list: cfg.get_list("n_list", d.n_list)?,
            with_maxlik: cfg.get("with_maxlik", d.with_maxlik)?,
            maxlik_iterations: cfg.get("maxlik_iterations", d.maxlik_iterations)?,
            cutoff,
            ranges,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub n: usize,
    pub nn: [f64; 3],
    pub maxlik: Option<[f64; 3]>,
    pub maxlik_fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub n_states: usize,
    pub rows: Vec<AccuracyRow>,
    /// Network accuracy on the exact (infinite-shot) patterns.
    pub theory_accuracy: [f64; 3],
}

impl EvaluationReport {
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.n.to_string()];
                row.extend(r.nn.iter().map(|&v| num(v)));
                match r.maxlik {
                    Some(m) => row.extend(m.iter().map(|&v| num(v))),
                    None => row.extend(std::iter::repeat_n(String::new(), 3)),
                }
                row.push(r.maxlik_fidelity.map(num).unwrap_or_default());
                row
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &REPORT_HEADER, &self.csv_rows())
    }
}

/// Histogram pattern of a record; a channel with no in-window outcome
/// is replaced by the flat distribution.
pub fn sampled_pattern(samples: &HomodyneSampleSet, grid: &QuadGrid) -> Result<CorrelationPattern> {
    let mut counts = samples.bin_counts(grid);
    for chunk in counts.chunks_mut(CHANNEL_LEN) {
        if chunk.iter().sum::<f64>() == 0.0 {
            chunk.fill(1.0);
        }
    }
    CorrelationPattern::from_raw(counts)
}

struct StateOutcome {
    truth: LabelVector,
    theory: LabelVector,
    per_n: Vec<(LabelVector, Option<(LabelVector, f64)>)>,
}

pub fn evaluate(model: &MlpModel, opts: &EvaluateOptions) -> Result<EvaluationReport> {
    let grid = QuadGrid::default();
    let povm = if opts.with_maxlik {
        Some(BinPovm::new(opts.cutoff, grid)?)
    } else {
        None
    };
    let outcomes: Vec<StateOutcome> = (0..opts.n_states as u64)
        .into_par_iter()
        .map(|i| -> Result<StateOutcome> {
            let s = labeled_state(opts.cutoff, &opts.ranges, opts.seed, streams::TEST_STATES, i)?;
            let truth = s.witness.labels();
            let theory = predict_labels(model, &s.pattern).1;
            let sampler = HomodyneSampler::with_grid(s.state(), &grid)?;
            let mut per_n = Vec::with_capacity(opts.n_list.len());
            for &n in &opts.n_list {
                let samples = sampler.sample(n, &mut rng_for(opts.seed, &[streams::SAMPLES, i, n as u64]));
                let nn = predict_labels(model, &sampled_pattern(&samples, &grid)?).1;
                let ml = match &povm {
                    Some(p) => {
                        let rec = reconstruct_with(p, &samples, opts.maxlik_iterations)?;
                        let labels = label_state(&rec.state)?.1;
                        Some((labels, fidelity(s.state(), &rec.state)?))
                    }
                    None => None,
                };
                per_n.push((nn, ml));
            }
            Ok(StateOutcome { truth, theory, per_n })
        })
        .collect::<Result<_>>()?;

    let truth: Vec<LabelVector> = outcomes.iter().map(|o| o.truth).collect();
    let theory: Vec<LabelVector> = outcomes.iter().map(|o| o.theory).collect();
    let mut rows = Vec::with_capacity(opts.n_list.len());
    for (k, &n) in opts.n_list.iter().enumerate() {
        let nn: Vec<LabelVector> = outcomes.iter().map(|o| o.per_n[k].0).collect();
        let (maxlik, maxlik_fidelity) = if opts.with_maxlik {
            let labels: Vec<LabelVector> = outcomes.iter().map(|o| o.per_n[k].1.expect("maxlik run").0).collect();
            let mean_f = outcomes.iter().map(|o| o.per_n[k].1.expect("maxlik run").1).sum::<f64>()
                / outcomes.len() as f64;
            (Some(label_accuracy(&labels, &truth)?), Some(mean_f))
        } else {
            (None, None)
        };
        rows.push(AccuracyRow {
            n,
            nn: label_accuracy(&nn, &truth)?,
            maxlik,
            maxlik_fidelity,
        });
    }
    Ok(EvaluationReport {
        n_states: opts.n_states,
        rows,
        theory_accuracy: label_accuracy(&theory, &truth)?,
    })
}

pub fn cmd_evaluate(model: &MlpModel, opts: &EvaluateOptions, out: &Path) -> Result<EvaluationReport> {
    let report = evaluate(model, opts)?;
    report.write_csv(out)?;
    Ok(report)
}

/// Spearman rank correlation, ties given average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spearman_reference() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[0.1, 0.5, 0.9]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[0.9, 0.5, 0.1]), -1.0, epsilon = 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn empty_channel_becomes_flat() {
        let mut samples = HomodyneSampleSet::default();
        samples.channels[0].push((0.1, 0.1));
        let p = sampled_pattern(&samples, &QuadGrid::default()).unwrap();
        assert_eq!(p.values()[CHANNEL_LEN], 1.0 / CHANNEL_LEN as f64);
    }
}
