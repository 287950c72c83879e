//! Maximum-likelihood reconstruction from binned homodyne records.
//!
//! Each bin effect factorizes as `E₁ ⊗ E₂`, where the single-mode factor is a
//! lattice sum `w Σ_u |v_u⟩⟨v_u|` over the same points used for pattern
//! binning. Probabilities and the `R` operator are accumulated through these
//! factors without forming the `d² × d²` effects.

use num_complex::Complex64 as C64;

use crate::error::{CvError, Result};
use crate::fock::{fidelity, FockCutoff, TwoModeState, CMatrix};
use crate::homodyne::{wavefunction_table, Channel, HomodyneSampleSet, QuadGrid, Quadrature};
use crate::witness::{label_state, LabelVector};

pub const DEFAULT_ITERATIONS: usize = 20;
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Binned quadrature effects for all four channels.
#[derive(Clone, Debug)]
pub struct BinPovm {
    cutoff: FockCutoff,
    grid: QuadGrid,
    x_effects: Vec<CMatrix>,
    p_effects: Vec<CMatrix>,
}

impl BinPovm {
    pub fn new(cutoff: FockCutoff, grid: QuadGrid) -> Result<Self> {
        if grid.bins == 0 || grid.lattice == 0 {
            return Err(CvError::InvalidParameter("empty quadrature grid".into()));
        }
        let d = cutoff.local_dim();
        let weight = grid.bin_width() / grid.lattice as f64;
        let points = grid.lattice_points();
        let build = |basis| {
            let table = wavefunction_table(&points, basis, d);
            (0..grid.bins)
                .map(|k| {
                    let mut e = CMatrix::zeros(d, d);
                    for u in 0..grid.lattice {
                        let row = k * grid.lattice + u;
                        for m in 0..d {
                            let tm = table[(row, m)];
                            for n in 0..d {
                                e[(n, m)] += table[(row, n)].conj() * tm * weight;
                            }
                        }
                    }
                    e
                })
                .collect::<Vec<_>>()
        };
        Ok(Self {
            cutoff,
            grid,
            x_effects: build(Quadrature::X),
            p_effects: build(Quadrature::P),
        })
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn grid(&self) -> &QuadGrid {
        &self.grid
    }

    pub fn bins_per_channel(&self) -> usize {
        self.grid.bins * self.grid.bins
    }

    /// Single-mode factor for bin `k` of one quadrature.
    pub fn single_mode(&self, basis: Quadrature, k: usize) -> &CMatrix {
        match basis {
            Quadrature::X => &self.x_effects[k],
            Quadrature::P => &self.p_effects[k],
        }
    }

    fn factors(&self, channel: Channel) -> (&[CMatrix], &[CMatrix]) {
        let pick = |b| match b {
            Quadrature::X => self.x_effects.as_slice(),
            Quadrature::P => self.p_effects.as_slice(),
        };
        let (b1, b2) = channel.bases();
        (pick(b1), pick(b2))
    }

    /// Full two-mode effect of bin `(i, j)`.
    pub fn effect(&self, channel: Channel, i: usize, j: usize) -> CMatrix {
        let (e1, e2) = self.factors(channel);
        e1[i].kronecker(&e2[j])
    }

    /// Largest entry of `|Σ_bins Π − I|` for the channel.
    pub fn coverage_defect(&self, channel: Channel) -> f64 {
        let (e1, e2) = self.factors(channel);
        let d = self.cutoff.local_dim();
        let s1 = e1.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        let s2 = e2.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        let total = s1.kronecker(&s2) - CMatrix::identity(d * d, d * d);
        total.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Tr(ρ Π)` for every bin, channel-major.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        let bins = self.grid.bins;
        let mut out = vec![0.0; 4 * bins * bins];
        for channel in Channel::ALL {
            let (e1, e2) = self.factors(channel);
            let base = channel.index() * bins * bins;
            for (i, ei) in e1.iter().enumerate() {
                let t = self.partial_contract(rho, ei);
                for (j, ej) in e2.iter().enumerate() {
                    out[base + i * bins + j] = trace_product(&t, ej);
                }
            }
        }
        out
    }

    // T[n2, m2] = Σ_{n1,m1} E[m1, n1] ρ[(n1,n2),(m1,m2)]
    fn partial_contract(&self, rho: &CMatrix, e: &CMatrix) -> CMatrix {
        let d = self.cutoff.local_dim();
        let mut t = CMatrix::zeros(d, d);
        for n1 in 0..d {
            for m1 in 0..d {
                let w = e[(m1, n1)];
                if w == ZERO {
                    continue;
                }
                let block = rho.view((n1 * d, m1 * d), (d, d));
                t.zip_apply(&block, |acc, b| *acc += w * b);
            }
        }
        t
    }

    /// `R = Σ_bins c_bin Π_bin`; zero coefficients are skipped.
    pub fn weighted_sum(&self, coeffs: &[f64]) -> CMatrix {
        let d = self.cutoff.local_dim();
        let bins = self.grid.bins;
        let mut r = CMatrix::zeros(d * d, d * d);
        for channel in Channel::ALL {
            let (e1, e2) = self.factors(channel);
            let base = channel.index() * bins * bins;
            for (i, ei) in e1.iter().enumerate() {
                let row = &coeffs[base + i * bins..base + (i + 1) * bins];
                if row.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let mut g = CMatrix::zeros(d, d);
                for (ej, &c) in e2.iter().zip(row) {
                    if c != 0.0 {
                        g += ej * C64::new(c, 0.0);
                    }
                }
                for n1 in 0..d {
                    for m1 in 0..d {
                        let w = ei[(n1, m1)];
                        let mut block = r.view_mut((n1 * d, m1 * d), (d, d));
                        block.zip_apply(&g, |acc, gv| *acc += w * gv);
                    }
                }
            }
        }
        r
    }
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = ZERO;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc.re
}

pub fn build_bin_povm(cutoff: FockCutoff, grid: QuadGrid) -> Result<BinPovm> {
    BinPovm::new(cutoff, grid)
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub state: TwoModeState,
    /// `Σ f log p` for the initial state and after every iteration.
    pub log_likelihood: Vec<f64>,
}

/// Relative bin frequencies normalized over every in-window outcome.
pub fn relative_frequencies(samples: &HomodyneSampleSet, grid: &QuadGrid) -> Result<Vec<f64>> {
    if Channel::ALL.iter().any(|&c| samples.channel(c).is_empty()) {
        return Err(CvError::EmptyDistribution("a channel has no samples".into()));
    }
    let mut counts = samples.bin_counts(grid);
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(CvError::EmptyDistribution(
            "all samples fall outside the binning window".into(),
        ));
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(counts)
}

pub fn log_likelihood(freqs: &[f64], probs: &[f64]) -> f64 {
    freqs
        .iter()
        .zip(probs)
        .filter(|(f, _)| **f > 0.0)
        .map(|(f, p)| f * p.max(PROBABILITY_FLOOR).ln())
        .sum()
}

/// One `ρ ← 𝒩[RρR]` step.
pub fn iterate(povm: &BinPovm, rho: &CMatrix, freqs: &[f64]) -> Result<CMatrix> {
    let probs = povm.probabilities(rho);
    let coeffs: Vec<f64> = freqs
        .iter()
        .zip(&probs)
        .map(|(&f, &p)| if f > 0.0 { f / p.max(PROBABILITY_FLOOR) } else { 0.0 })
        .collect();
    let r = povm.weighted_sum(&coeffs);
    let next = &r * rho * &r;
    let next = (&next + next.adjoint()) * C64::new(0.5, 0.0);
    let tr = next.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(CvError::Divergence(format!("iterate trace {tr}")));
    }
    Ok(next / C64::new(tr, 0.0))
}

pub fn reconstruct_from_frequencies(
    povm: &BinPovm,
    freqs: &[f64],
    iterations: usize,
) -> Result<Reconstruction> {
    let expected = 4 * povm.bins_per_channel();
    if freqs.len() != expected {
        return Err(CvError::DimensionMismatch {
            expected,
            got: freqs.len(),
        });
    }
    if freqs.iter().all(|&f| f <= 0.0) {
        return Err(CvError::EmptyDistribution("no in-window frequencies".into()));
    }
    let cutoff = povm.cutoff();
    let mut rho = TwoModeState::maximally_mixed(cutoff).into_rho();
    let mut history = Vec::with_capacity(iterations + 1);
    history.push(log_likelihood(freqs, &povm.probabilities(&rho)));
    for _ in 0..iterations {
        rho = iterate(povm, &rho, freqs)?;
        history.push(log_likelihood(freqs, &povm.probabilities(&rho)));
    }
    Ok(Reconstruction {
        state: TwoModeState::from_density(rho, cutoff)?,
        log_likelihood: history,
    })
}

pub fn reconstruct_with(
    povm: &BinPovm,
    samples: &HomodyneSampleSet,
    iterations: usize,
) -> Result<Reconstruction> {
    let freqs = relative_frequencies(samples, povm.grid())?;
    reconstruct_from_frequencies(povm, &freqs, iterations)
}

pub fn reconstruct(
    samples: &HomodyneSampleSet,
    cutoff: FockCutoff,
    iterations: usize,
) -> Result<TwoModeState> {
    let povm = BinPovm::new(cutoff, QuadGrid::default())?;
    Ok(reconstruct_with(&povm, samples, iterations)?.state)
}

pub fn label_reconstruction(samples: &HomodyneSampleSet, cutoff: FockCutoff) -> Result<LabelVector> {
    let state = reconstruct(samples, cutoff, DEFAULT_ITERATIONS)?;
    Ok(label_state(&state)?.1)
}

/// Labels and fidelity of a reconstruction against a known state.
pub fn reconstruction_report(
    povm: &BinPovm,
    samples: &HomodyneSampleSet,
    truth: &TwoModeState,
) -> Result<(LabelVector, f64)> {
    let rec = reconstruct_with(povm, samples, DEFAULT_ITERATIONS)?;
    let labels = label_state(&rec.state)?.1;
    Ok((labels, fidelity(truth, &rec.state)?))
}
