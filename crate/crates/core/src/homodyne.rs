//! Joint quadrature statistics, correlation patterns and simulated homodyne
//! records.
//!
//! Patterns are stored channel-major as `[channel][i][j]`, where `i` bins the
//! mode-1 outcome and `j` the mode-2 outcome, both ascending from `-6`.
//! Channels are ordered `X1X2, X1P2, P1X2, P1P2`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{CvError, Result};
use crate::fock::{CMatrix, TwoModeState};

pub const PATTERN_BINS: usize = 24;
pub const CHANNEL_LEN: usize = PATTERN_BINS * PATTERN_BINS;
pub const PATTERN_LEN: usize = 4 * CHANNEL_LEN;

/// Negative pdf values down to this are treated as truncation noise.
pub const PDF_NEGATIVE_TOL: f64 = 1e-8;

/// Binning and sampling geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Evaluation points per bin and axis for the median.
    pub lattice: usize,
    pub sample_lo: f64,
    pub sample_hi: f64,
    pub sample_cells: usize,
}

impl Default for QuadGrid {
    fn default() -> Self {
        Self {
            lo: -6.0,
            hi: 6.0,
            bins: PATTERN_BINS,
            lattice: 5,
            sample_lo: -8.0,
            sample_hi: 8.0,
            sample_cells: 320,
        }
    }
}

impl QuadGrid {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Bin index of `v`, or `None` outside `[lo, hi)`.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v < self.hi) {
            return None;
        }
        let k = ((v - self.lo) / self.bin_width()) as usize;
        Some(k.min(self.bins - 1))
    }

    /// Interior evaluation points, `lattice` per bin, ordered by bin.
    pub fn lattice_points(&self) -> Vec<f64> {
        let w = self.bin_width();
        let step = w / self.lattice as f64;
        (0..self.bins)
            .flat_map(|k| {
                (0..self.lattice).map(move |i| self.lo + k as f64 * w + (i as f64 + 0.5) * step)
            })
            .collect()
    }

    pub fn sample_cell_width(&self) -> f64 {
        (self.sample_hi - self.sample_lo) / self.sample_cells as f64
    }

    pub fn sample_centers(&self) -> Vec<f64> {
        let w = self.sample_cell_width();
        (0..self.sample_cells)
            .map(|k| self.sample_lo + (k as f64 + 0.5) * w)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    XX,
    XP,
    PX,
    PP,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::XX, Channel::XP, Channel::PX, Channel::PP];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Measured quadrature on (mode 1, mode 2).
    pub fn bases(self) -> (Quadrature, Quadrature) {
        use Quadrature::*;
        match self {
            Channel::XX => (X, X),
            Channel::XP => (X, P),
            Channel::PX => (P, X),
            Channel::PP => (P, P),
        }
    }

    /// The channel seen after exchanging the two modes.
    pub fn swapped(self) -> Self {
        match self {
            Channel::XP => Channel::PX,
            Channel::PX => Channel::XP,
            c => c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::XX => "X1X2",
            Channel::XP => "X1P2",
            Channel::PX => "P1X2",
            Channel::PP => "P1P2",
        }
    }
}

/// `⟨v|n⟩` for `n = 0..dim`, via the normalized Hermite-function recurrence
/// `ψ_{n+1} = (v ψ_n − √n ψ_{n−1}) / √(n+1)`.
///
/// The P basis carries an extra `(−i)^n`, the Fourier phase for
/// `p = i(a† − a)`.
pub fn wavefunction_row(v: f64, basis: Quadrature, dim: usize) -> Vec<C64> {
    let mut psi = vec![0.0f64; dim];
    psi[0] = (-v * v / 4.0).exp() / (2.0 * std::f64::consts::PI).powf(0.25);
    if dim > 1 {
        psi[1] = v * psi[0];
    }
    for n in 1..dim.saturating_sub(1) {
        psi[n + 1] = (v * psi[n] - (n as f64).sqrt() * psi[n - 1]) / ((n + 1) as f64).sqrt();
    }
    psi.into_iter()
        .enumerate()
        .map(|(n, amp)| match basis {
            Quadrature::X => C64::new(amp, 0.0),
            Quadrature::P => minus_i_pow(n) * amp,
        })
        .collect()
}

fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

pub fn quad_wavefunction(n: usize, v: f64, basis: Quadrature) -> C64 {
    wavefunction_row(v, basis, n + 1)[n]
}

/// Rows are evaluation points, columns Fock numbers.
pub fn wavefunction_table(values: &[f64], basis: Quadrature, dim: usize) -> CMatrix {
    let mut table = CMatrix::zeros(values.len(), dim);
    for (r, &v) in values.iter().enumerate() {
        for (n, amp) in wavefunction_row(v, basis, dim).into_iter().enumerate() {
            table[(r, n)] = amp;
        }
    }
    table
}

fn clamp_density(p: f64) -> Result<f64> {
    if p < -PDF_NEGATIVE_TOL || !p.is_finite() {
        return Err(CvError::NegativeDensity(p));
    }
    Ok(p.max(0.0))
}

/// Joint density of the channel's quadrature pair at `(v1, v2)`.
pub fn joint_pdf(state: &TwoModeState, channel: Channel, v1: f64, v2: f64) -> Result<f64> {
    let grid = pdf_grid(state, channel, &[v1], &[v2])?;
    Ok(grid[(0, 0)])
}

/// Joint density on the product grid `xs × ys` (rows index `xs`).
pub fn pdf_grid(state: &TwoModeState, channel: Channel, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
    let d = state.cutoff().local_dim();
    let (b1, b2) = channel.bases();
    let t1 = wavefunction_table(xs, b1, d);
    let t2 = wavefunction_table(ys, b2, d);
    let rho = state.rho();
    let mut out = DMatrix::zeros(xs.len(), ys.len());
    let mut reduced = CMatrix::zeros(d, d);
    for a in 0..xs.len() {
        // reduced[n2, m2] = Σ_{n1,m1} ψ(n1) ψ*(m1) ρ[(n1,n2),(m1,m2)]
        reduced.fill(C64::new(0.0, 0.0));
        for n1 in 0..d {
            let wa = t1[(a, n1)];
            for m1 in 0..d {
                let w = wa * t1[(a, m1)].conj();
                let block = rho.view((n1 * d, m1 * d), (d, d));
                reduced.zip_apply(&block, |r, b| *r += w * b);
            }
        }
        let left = &t2 * &reduced;
        for b in 0..ys.len() {
            let mut acc = 0.0;
            for m2 in 0..d {
                acc += (left[(b, m2)] * t2[(b, m2)].conj()).re;
            }
            out[(a, b)] = clamp_density(acc)?;
        }
    }
    Ok(out)
}

/// Four binned joint distributions, each channel normalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationPattern {
    values: Vec<f64>,
}

impl CorrelationPattern {
    /// Normalizes each channel of a raw nonnegative `[4][24][24]` array.
    pub fn from_raw(mut values: Vec<f64>) -> Result<Self> {
        if values.len() != PATTERN_LEN {
            return Err(CvError::DimensionMismatch {
                expected: PATTERN_LEN,
                got: values.len(),
            });
        }
        for (c, chunk) in values.chunks_mut(CHANNEL_LEN).enumerate() {
            if chunk.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(CvError::InvalidParameter(format!(
                    "channel {c} has negative or non-finite entries"
                )));
            }
            let total: f64 = chunk.iter().sum();
            if total <= 0.0 {
                return Err(CvError::EmptyDistribution(format!("channel {c} is all zero")));
            }
            chunk.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self { values })
    }

    /// Wraps already normalized values, checking each channel sum to `tol`.
    pub fn from_normalized(values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.len() != PATTERN_LEN {
            return Err(CvError::DimensionMismatch {
                expected: PATTERN_LEN,
                got: values.len(),
            });
        }
        for (c, chunk) in values.chunks(CHANNEL_LEN).enumerate() {
            let total: f64 = chunk.iter().sum();
            if chunk.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > tol {
                return Err(CvError::InvalidParameter(format!(
                    "channel {c} is not normalized (sum {total})"
                )));
            }
        }
        Ok(Self { values })
    }

    /// Flattened channel-major values, the network input order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        let start = channel.index() * CHANNEL_LEN;
        &self.values[start..start + CHANNEL_LEN]
    }

    pub fn get(&self, channel: Channel, i: usize, j: usize) -> f64 {
        self.values[channel.index() * CHANNEL_LEN + i * PATTERN_BINS + j]
    }

    /// Total-variation distance between one channel of two patterns.
    pub fn total_variation(&self, other: &Self, channel: Channel) -> f64 {
        0.5 * self
            .channel(channel)
            .iter()
            .zip(other.channel(channel))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn max_total_variation(&self, other: &Self) -> f64 {
        Channel::ALL
            .iter()
            .map(|&c| self.total_variation(other, c))
            .fold(0.0, f64::max)
    }

    /// Pattern of the mode-swapped state: channels 2 and 3 exchange and
    /// every channel is transposed.
    pub fn swap_modes(&self) -> Self {
        let mut values = vec![0.0; PATTERN_LEN];
        for c in Channel::ALL {
            let target = c.swapped().index() * CHANNEL_LEN;
            for i in 0..PATTERN_BINS {
                for j in 0..PATTERN_BINS {
                    values[target + j * PATTERN_BINS + i] = self.get(c, i, j);
                }
            }
        }
        Self { values }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median-binned pattern of the exact joint distributions.
pub fn pattern_from_pdf(state: &TwoModeState) -> Result<CorrelationPattern> {
    pattern_from_pdf_on(state, &QuadGrid::default())
}

pub fn pattern_from_pdf_on(state: &TwoModeState, grid: &QuadGrid) -> Result<CorrelationPattern> {
    if grid.bins != PATTERN_BINS {
        return Err(CvError::InvalidParameter(format!(
            "pattern grid must have {PATTERN_BINS} bins"
        )));
    }
    let points = grid.lattice_points();
    let l = grid.lattice;
    let mut raw = vec![0.0; PATTERN_LEN];
    let mut cell = vec![0.0; l * l];
    for channel in Channel::ALL {
        let pdf = pdf_grid(state, channel, &points, &points)?;
        let base = channel.index() * CHANNEL_LEN;
        for i in 0..PATTERN_BINS {
            for j in 0..PATTERN_BINS {
                for u in 0..l {
                    for w in 0..l {
                        cell[u * l + w] = pdf[(i * l + u, j * l + w)];
                    }
                }
                raw[base + i * PATTERN_BINS + j] = median(&mut cell);
            }
        }
    }
    CorrelationPattern::from_raw(raw)
}

/// Simulated homodyne record: `N` joint outcomes per channel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HomodyneSampleSet {
    pub channels: [Vec<(f64, f64)>; 4],
}

impl HomodyneSampleSet {
    pub fn channel(&self, channel: Channel) -> &[(f64, f64)] {
        &self.channels[channel.index()]
    }

    /// Outcome counts per pattern bin, channel-major; out-of-window outcomes
    /// are dropped.
    pub fn bin_counts(&self, grid: &QuadGrid) -> Vec<f64> {
        let mut counts = vec![0.0; 4 * grid.bins * grid.bins];
        for channel in Channel::ALL {
            let base = channel.index() * grid.bins * grid.bins;
            for &(v1, v2) in self.channel(channel) {
                if let (Some(i), Some(j)) = (grid.bin_of(v1), grid.bin_of(v2)) {
                    counts[base + i * grid.bins + j] += 1.0;
                }
            }
        }
        counts
    }
}

/// Cached categorical distribution over the sampling lattice of one channel.
#[derive(Clone, Debug)]
pub struct ChannelSampler {
    index: WeightedIndex<f64>,
    grid: QuadGrid,
}

impl ChannelSampler {
    pub fn new(state: &TwoModeState, channel: Channel, grid: &QuadGrid) -> Result<Self> {
        let centers = grid.sample_centers();
        let pdf = pdf_grid(state, channel, &centers, &centers)?;
        // row-major over (mode-1 cell, mode-2 cell)
        let weights: Vec<f64> = pdf.transpose().iter().copied().collect();
        let index = WeightedIndex::new(&weights).map_err(|e| {
            CvError::EmptyDistribution(format!("{} pdf on sampling lattice: {e}", channel.name()))
        })?;
        Ok(Self { index, grid: *grid })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let cells = self.grid.sample_cells;
        let w = self.grid.sample_cell_width();
        let lo = self.grid.sample_lo;
        (0..n)
            .map(|_| {
                let k = self.index.sample(rng);
                let (i, j) = (k / cells, k % cells);
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                (lo + (i as f64 + u1) * w, lo + (j as f64 + u2) * w)
            })
            .collect()
    }
}

/// Samplers for all four channels of one state.
#[derive(Clone, Debug)]
pub struct HomodyneSampler {
    channels: Vec<ChannelSampler>,
}

impl HomodyneSampler {
    pub fn new(state: &TwoModeState) -> Result<Self> {
        Self::with_grid(state, &QuadGrid::default())
    }

    pub fn with_grid(state: &TwoModeState, grid: &QuadGrid) -> Result<Self> {
        let channels = Channel::ALL
            .iter()
            .map(|&c| ChannelSampler::new(state, c, grid))
            .collect::<Result<_>>()?;
        Ok(Self { channels })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> HomodyneSampleSet {
        let mut set = HomodyneSampleSet::default();
        for (slot, sampler) in set.channels.iter_mut().zip(&self.channels) {
            *slot = sampler.sample(n, rng);
        }
        set
    }
}

/// Draws `n` joint outcomes of one channel.
pub fn sample_quadratures<R: Rng + ?Sized>(
    state: &TwoModeState,
    channel: Channel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(ChannelSampler::new(state, channel, &QuadGrid::default())?.sample(n, rng))
}

/// Histogram pattern of a homodyne record over the pattern window.
pub fn pattern_from_samples(samples: &HomodyneSampleSet) -> Result<CorrelationPattern> {
    let grid = QuadGrid::default();
    let counts = samples.bin_counts(&grid);
    for (c, chunk) in counts.chunks(CHANNEL_LEN).enumerate() {
        if chunk.iter().sum::<f64>() == 0.0 {
            return Err(CvError::EmptyDistribution(format!(
                "channel {} has no outcomes inside the pattern window",
                Channel::ALL[c].name()
            )));
        }
    }
    CorrelationPattern::from_raw(counts)
}
