//! Loss-robustness sweep of the photon-subtracted two-mode squeezed state.

use std::path::Path;

use super::config::KvConfig;
use super::evaluate::sampled_pattern;
use super::{num, streams, write_csv};
use crate::error::{CvError, Result};
use crate::fock::FockCutoff;
use crate::homodyne::{pattern_from_pdf, HomodyneSampler, QuadGrid};
use crate::mlp::{predict_labels, signed_score, MlpModel};
use crate::seeding::rng_for;
use crate::stellar::{photon_subtracted_state, PhotonSubtraction};
use crate::witness::{label_state, WitnessValues};

pub const SWEEP_HEADER: [&str; 10] = [
    "eta",
    "ppt_witness",
    "qfi1_witness",
    "qfi2_witness",
    "nn_theory_ppt",
    "nn_theory_qfi1",
    "nn_theory_qfi2",
    "nn_sampled_ppt",
    "nn_sampled_qfi1",
    "nn_sampled_qfi2",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LossSweepOptions {
    pub r1_db: f64,
    pub r2_db: f64,
    pub gamma: f64,
    pub etas: Vec<f64>,
    /// Homodyne outcomes per channel for the sampled patterns.
    pub samples: usize,
    pub cutoff: FockCutoff,
    pub seed: u64,
}

pub fn eta_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect()
}

impl Default for LossSweepOptions {
    fn default() -> Self {
        let reference = PhotonSubtraction::reference(0.0);
        Self {
            r1_db: reference.r1_db,
            r2_db: reference.r2_db,
            gamma: reference.gamma,
            etas: eta_grid(0.0, 0.95, 20),
            samples: 100_000,
            cutoff: FockCutoff::default(),
            seed: 0,
        }
    }
}

impl LossSweepOptions {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        cfg.reject_unknown(&["r1_db", "r2_db", "gamma", "eta_min", "eta_max", "eta_steps", "samples", "n_max"])?;
        let d = Self::default();
        let lo = cfg.get("eta_min", 0.0)?;
        let hi = cfg.get("eta_max", 0.95)?;
        let steps = cfg.get("eta_steps", 20usize)?;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(CvError::Config(format!("eta range [{lo}, {hi}] must lie in [0, 1]")));
        }
        Ok(Self {
            r1_db: cfg.get("r1_db", d.r1_db)?,
            r2_db: cfg.get("r2_db", d.r2_db)?,
            gamma: cfg.get("gamma", d.gamma)?,
            etas: eta_grid(lo, hi, steps),
            samples: cfg.get("samples", d.samples)?,
            cutoff: FockCutoff::new(cfg.get("n_max", FockCutoff::DEFAULT_N_MAX)?)?,
            seed,
        })
    }

    pub fn params(&self, eta: f64) -> PhotonSubtraction {
        PhotonSubtraction {
            r1_db: self.r1_db,
            r2_db: self.r2_db,
            omega1: 0.0,
            omega2: 0.0,
            gamma: self.gamma,
            eta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub witness: WitnessValues,
    /// Signed network scores `2p − 1` on the exact pattern.
    pub nn_theory: Option<[f64; 3]>,
    /// Signed network scores on the sampled pattern.
    pub nn_sampled: Option<[f64; 3]>,
}

/// Witness curves, plus network scores when a model is given.
pub fn loss_sweep(model: Option<&MlpModel>, opts: &LossSweepOptions) -> Result<Vec<SweepRow>> {
    let grid = QuadGrid::default();
    opts.etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| {
            let state = photon_subtracted_state(&opts.params(eta), opts.cutoff)?;
            let (witness, _) = label_state(&state)?;
            let (nn_theory, nn_sampled) = match model {
                Some(m) => {
                    let theory = predict_labels(m, &pattern_from_pdf(&state)?).0.map(signed_score);
                    let mut rng = rng_for(opts.seed, &[streams::SWEEP_SAMPLES, k as u64]);
                    let samples = HomodyneSampler::with_grid(&state, &grid)?.sample(opts.samples, &mut rng);
                    let sampled = predict_labels(m, &sampled_pattern(&samples, &grid)?).0.map(signed_score);
                    (Some(theory), Some(sampled))
                }
                None => (None, None),
            };
            Ok(SweepRow {
                eta,
                witness,
                nn_theory,
                nn_sampled,
            })
        })
        .collect()
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    let opt = |v: Option<[f64; 3]>| -> Vec<String> {
        match v {
            Some(a) => a.iter().map(|&x| num(x)).collect(),
            None => vec![String::new(); 3],
        }
    };
    rows.iter()
        .map(|r| {
            let mut row = vec![
                num(r.eta),
                num(r.witness.ppt_min),
                num(r.witness.qfi1),
                num(r.witness.qfi2),
            ];
            row.extend(opt(r.nn_theory));
            row.extend(opt(r.nn_sampled));
            row
        })
        .collect()
}

pub fn cmd_loss_sweep(model: Option<&MlpModel>, opts: &LossSweepOptions, out: &Path) -> Result<Vec<SweepRow>> {
    let rows = loss_sweep(model, opts)?;
    write_csv(out, &SWEEP_HEADER, &sweep_rows(&rows))?;
    Ok(rows)
}

/// First `x` where `f` drops from positive to non-positive, linearly
/// interpolated between grid points.
pub fn first_zero_crossing(xs: &[f64], fs: &[f64]) -> Option<f64> {
    xs.windows(2).zip(fs.windows(2)).find_map(|(x, f)| {
        if f[0] > 0.0 && f[1] <= 0.0 {
            Some(x[0] + (x[1] - x[0]) * f[0] / (f[0] - f[1]))
        } else {
            None
        }
    })
}
