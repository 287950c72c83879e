//! Random two-mode states of bounded stellar rank.
//!
//! A state is built as `loss ∘ G |C>`: a core state `|C>` with Fock support on
//! `n1 + n2 <= r`, a random Gaussian unitary `G` in Bloch-Messiah form, and
//! independent loss on each mode.

use std::f64::consts::{FRAC_PI_2, LN_10, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CvError, Result};
use crate::fock::{apply_loss, CMatrix, FockCutoff, GaussianCircuit, TwoModeState};

pub const MAX_RANK: usize = 2;

/// Generated states with more trace leakage than this are redrawn.
pub const MAX_LEAKAGE: f64 = 1e-3;

pub const MAX_ATTEMPTS: usize = 100;

/// Minimum squared weight of the top shell `n1 + n2 = r` of a random core.
pub const MIN_TOP_SHELL_WEIGHT: f64 = 1e-4;

const RANK_TOL: f64 = 1e-10;

/// Fock indices with `n1 + n2 <= 2`, ordered by shell.
pub const CORE_SUPPORT: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Normalized core state with support on `n1 + n2 <= rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreState {
    coeffs: [C64; 6],
    rank: usize,
}

impl CoreState {
    pub fn vacuum() -> Self {
        let mut coeffs = [C64::new(0.0, 0.0); 6];
        coeffs[0] = C64::new(1.0, 0.0);
        Self { coeffs, rank: 0 }
    }

    /// Builds a core from coefficients in `CORE_SUPPORT` order and normalizes
    /// it. Entries above `rank` must be zero and the top shell must be
    /// occupied.
    pub fn new(rank: usize, coeffs: [C64; 6]) -> Result<Self> {
        if rank > MAX_RANK {
            return Err(CvError::UnsupportedRank(rank));
        }
        for (k, &(n1, n2)) in CORE_SUPPORT.iter().enumerate() {
            if n1 + n2 > rank && coeffs[k].norm() > 0.0 {
                return Err(CvError::InvalidParameter(format!(
                    "coefficient for |{n1},{n2}> exceeds rank {rank}"
                )));
            }
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CvError::InvalidParameter("core state has zero norm".into()));
        }
        let coeffs = coeffs.map(|c| c / norm);
        let core = Self { coeffs, rank };
        if stellar_rank_of_core(&core) != rank {
            return Err(CvError::InvalidParameter(format!(
                "core has no weight on the degree-{rank} shell"
            )));
        }
        Ok(core)
    }

    /// Like [`CoreState::new`] but keeps the coefficients verbatim, requiring
    /// unit norm to within `tol`.
    pub fn from_normalized(rank: usize, coeffs: [C64; 6], tol: f64) -> Result<Self> {
        let checked = Self::new(rank, coeffs)?;
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol {
            return Err(CvError::InvalidParameter(format!("core state has norm {norm}")));
        }
        Ok(Self { coeffs, ..checked })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coeffs(&self) -> &[C64; 6] {
        &self.coeffs
    }

    pub fn coeff(&self, n1: usize, n2: usize) -> C64 {
        CORE_SUPPORT
            .iter()
            .position(|&idx| idx == (n1, n2))
            .map_or(C64::new(0.0, 0.0), |k| self.coeffs[k])
    }

    /// Squared weight of the shell `n1 + n2 = s`.
    pub fn shell_weight(&self, s: usize) -> f64 {
        CORE_SUPPORT
            .iter()
            .zip(self.coeffs.iter())
            .filter(|((n1, n2), _)| n1 + n2 == s)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Amplitudes as a 3×3 grid indexed `(n1, n2)`.
    pub fn to_grid(&self) -> CMatrix {
        let mut grid = DMatrix::zeros(3, 3);
        for (&(n1, n2), &c) in CORE_SUPPORT.iter().zip(self.coeffs.iter()) {
            grid[(n1, n2)] = c;
        }
        grid
    }
}

/// Degree of the core's stellar polynomial: the largest occupied shell.
pub fn stellar_rank_of_core(core: &CoreState) -> usize {
    CORE_SUPPORT
        .iter()
        .zip(core.coeffs.iter())
        .filter(|(_, c)| c.norm() > RANK_TOL)
        .map(|((n1, n2), _)| n1 + n2)
        .max()
        .unwrap_or(0)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Core with i.i.d. complex Gaussian coefficients on `n1 + n2 <= rank`.
pub fn random_core_state<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Result<CoreState> {
    if rank > MAX_RANK {
        return Err(CvError::UnsupportedRank(rank));
    }
    if rank == 0 {
        return Ok(CoreState::vacuum());
    }
    loop {
        let mut coeffs = [C64::new(0.0, 0.0); 6];
        for (k, &(n1, n2)) in CORE_SUPPORT.iter().enumerate() {
            if n1 + n2 <= rank {
                coeffs[k] = complex_normal(rng);
            }
        }
        let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let top: f64 = CORE_SUPPORT
            .iter()
            .zip(coeffs.iter())
            .filter(|((n1, n2), _)| n1 + n2 == rank)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        if top / total >= MIN_TOP_SHELL_WEIGHT {
            return CoreState::new(rank, coeffs);
        }
    }
}

/// Sampling bounds for the random circuit parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationRanges {
    /// Upper bound on squeezing magnitudes `|ξ|`.
    pub r_max: f64,
    pub alpha_max: f64,
    pub eta_max: f64,
    /// Probability that each of the two beamsplitters is present.
    pub bs_prob: f64,
}

impl Default for GenerationRanges {
    fn default() -> Self {
        Self {
            r_max: 1.15,
            alpha_max: 1.0,
            eta_max: 0.5,
            bs_prob: 0.5,
        }
    }
}

impl GenerationRanges {
    pub fn zero() -> Self {
        Self {
            r_max: 0.0,
            alpha_max: 0.0,
            eta_max: 0.0,
            bs_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.r_max) && finite_nonneg(self.alpha_max)) {
            return Err(CvError::InvalidParameter(format!("bad ranges {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.eta_max) || !(0.0..=1.0).contains(&self.bs_prob) {
            return Err(CvError::InvalidParameter(format!("bad ranges {self:?}")));
        }
        Ok(())
    }
}

/// A random state together with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct GeneratedState {
    pub state: TwoModeState,
    pub circuit: GaussianCircuit,
    pub core: CoreState,
    /// Draws used, including those discarded for leakage.
    pub attempts: usize,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    if hi > 0.0 {
        rng.random_range(0.0..hi)
    } else {
        0.0
    }
}

fn polar<R: Rng + ?Sized>(rng: &mut R, max_magnitude: f64) -> C64 {
    let magnitude = uniform(rng, max_magnitude);
    let phase = rng.random_range(0.0..2.0 * PI);
    C64::from_polar(magnitude, phase)
}

fn random_circuit<R: Rng + ?Sized>(ranges: &GenerationRanges, rng: &mut R) -> GaussianCircuit {
    // beamsplitter mixing angle |φ| in [0, π/2) covers every transmissivity
    let beamsplitter = |rng: &mut R| {
        let present = rng.random_bool(ranges.bs_prob);
        let phi = polar(rng, FRAC_PI_2);
        present.then_some(phi)
    };
    let bs_in = beamsplitter(rng);
    let squeeze = [polar(rng, ranges.r_max), polar(rng, ranges.r_max)];
    let displace = [polar(rng, ranges.alpha_max), polar(rng, ranges.alpha_max)];
    let bs_out = beamsplitter(rng);
    let loss = [uniform(rng, ranges.eta_max), uniform(rng, ranges.eta_max)];
    GaussianCircuit {
        bs_in,
        squeeze,
        displace,
        bs_out,
        loss,
    }
}

/// Runs the full circuit (unitary part, then loss) on a core state.
pub fn prepare_state(
    core: &CoreState,
    circuit: &GaussianCircuit,
    cutoff: FockCutoff,
) -> Result<TwoModeState> {
    let (grid, leakage) = circuit.evolve_pure(&core.to_grid(), cutoff)?;
    let pure = TwoModeState::from_grid(&grid, cutoff)?.with_leakage(leakage);
    apply_loss(&pure, circuit.loss[0], circuit.loss[1])
}

/// Draws a random state with rank uniform over `{0, 1, 2}`.
pub fn synthesize_random_state<R: Rng + ?Sized>(
    ranges: &GenerationRanges,
    cutoff: FockCutoff,
    rng: &mut R,
) -> Result<GeneratedState> {
    synthesize_with_rank(ranges, cutoff, None, rng)
}

/// Like [`synthesize_random_state`], optionally forcing the core rank.
pub fn synthesize_with_rank<R: Rng + ?Sized>(
    ranges: &GenerationRanges,
    cutoff: FockCutoff,
    rank: Option<usize>,
    rng: &mut R,
) -> Result<GeneratedState> {
    ranges.validate()?;
    if let Some(r) = rank {
        if r > MAX_RANK {
            return Err(CvError::UnsupportedRank(r));
        }
    }
    let mut last_leakage = f64::NAN;
    for attempt in 1..=MAX_ATTEMPTS {
        let r = match rank {
            Some(r) => r,
            None => rng.random_range(0..=MAX_RANK),
        };
        let core = random_core_state(r, rng)?;
        let circuit = random_circuit(ranges, rng);
        let state = prepare_state(&core, &circuit, cutoff)?;
        last_leakage = state.trace_leakage();
        if last_leakage <= MAX_LEAKAGE {
            return Ok(GeneratedState {
                state,
                circuit,
                core,
                attempts: attempt,
            });
        }
    }
    Err(CvError::ResamplingExhausted {
        attempts: MAX_ATTEMPTS,
        leakage: last_leakage,
    })
}

/// Converts a squeezing level in dB to the signed squeezing parameter `r`.
pub fn db_to_squeezing(db: f64) -> f64 {
    db * LN_10 / 20.0
}

/// Parameters of the lossy single-photon-subtracted two-mode squeezed state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonSubtraction {
    pub r1_db: f64,
    pub r2_db: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Which-mode angle: `cos γ a1 + sin γ a2`.
    pub gamma: f64,
    /// Symmetric loss fraction on both modes.
    pub eta: f64,
}

impl PhotonSubtraction {
    /// The robustness-sweep state: 2 dB, −3 dB, zero phases, γ = π/4.
    pub fn reference(eta: f64) -> Self {
        Self {
            r1_db: 2.0,
            r2_db: -3.0,
            omega1: 0.0,
            omega2: 0.0,
            gamma: std::f64::consts::FRAC_PI_4,
            eta,
        }
    }

    /// Core coefficients and squeezing circuit that reproduce the state.
    pub fn decomposition(&self) -> Result<(CMatrix, GaussianCircuit)> {
        if !(0.0..=FRAC_PI_2).contains(&self.gamma) {
            return Err(CvError::InvalidParameter(format!(
                "gamma {} outside [0, π/2]",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(CvError::InvalidParameter(format!(
                "loss {} outside [0, 1]",
                self.eta
            )));
        }
        let r1 = db_to_squeezing(self.r1_db);
        let r2 = db_to_squeezing(self.r2_db);
        let mut grid = DMatrix::zeros(2, 2);
        grid[(1, 0)] = C64::from_polar(self.gamma.cos() * r1.sinh(), self.omega1);
        grid[(0, 1)] = C64::from_polar(self.gamma.sin() * r2.sinh(), self.omega2);
        let norm = grid.norm();
        if norm < 1e-14 {
            return Err(CvError::InvalidParameter(
                "photon subtraction from vacuum is undefined".into(),
            ));
        }
        let circuit = GaussianCircuit {
            squeeze: [
                C64::from_polar(r1, self.omega1),
                C64::from_polar(r2, self.omega2),
            ],
            loss: [self.eta, self.eta],
            ..Default::default()
        };
        Ok((grid / C64::new(norm, 0.0), circuit))
    }
}

pub fn photon_subtracted_state(
    params: &PhotonSubtraction,
    cutoff: FockCutoff,
) -> Result<TwoModeState> {
    let (grid, circuit) = params.decomposition()?;
    let (psi, leakage) = circuit.evolve_pure(&grid, cutoff)?;
    let pure = TwoModeState::from_grid(&psi, cutoff)?.with_leakage(leakage);
    apply_loss(&pure, params.eta, params.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, embed, fidelity, squeezer, Mode};
    use crate::seeding::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn rank_zero_core_is_vacuum() {
        let core = random_core_state(0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(core, CoreState::vacuum());
        assert_eq!(stellar_rank_of_core(&core), 0);
    }

    #[test]
    fn rank_one_core_has_three_coefficients() {
        let core = random_core_state(1, &mut rng_from_seed(2)).unwrap();
        let nonzero = core.coeffs().iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(nonzero, 3);
        let norm: f64 = core.coeffs().iter().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_cores_have_requested_rank() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            for rank in 0..=2 {
                let core = random_core_state(rank, &mut rng).unwrap();
                assert_eq!(stellar_rank_of_core(&core), rank);
                if rank > 0 {
                    assert!(core.shell_weight(rank) >= MIN_TOP_SHELL_WEIGHT);
                }
            }
        }
    }

    #[test]
    fn unsupported_rank_rejected() {
        assert!(matches!(
            random_core_state(3, &mut rng_from_seed(0)),
            Err(CvError::UnsupportedRank(3))
        ));
    }

    #[test]
    fn stellar_rank_examples() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let core = CoreState::new(1, [zero, one, zero, zero, zero, zero]).unwrap();
        assert_eq!(stellar_rank_of_core(&core), 1);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let core = CoreState::new(2, [h, zero, zero, h, zero, zero]).unwrap();
        assert_eq!(stellar_rank_of_core(&core), 2);
    }

    #[test]
    fn zero_ranges_give_vacuum() {
        let c = FockCutoff::default();
        let generated =
            synthesize_with_rank(&GenerationRanges::zero(), c, Some(0), &mut rng_from_seed(5)).unwrap();
        let f = fidelity(&generated.state, &TwoModeState::vacuum(c)).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let c = FockCutoff::default();
        let ranges = GenerationRanges::default();
        let a = synthesize_random_state(&ranges, c, &mut rng_from_seed(11)).unwrap();
        let b = synthesize_random_state(&ranges, c, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a.circuit, b.circuit);
        assert_eq!(a.core, b.core);
        assert_eq!(a.state.rho(), b.state.rho());
    }

    #[test]
    fn lossless_generation_is_pure() {
        let c = FockCutoff::default();
        let ranges = GenerationRanges {
            eta_max: 0.0,
            ..Default::default()
        };
        let mut rng = rng_from_seed(12);
        for _ in 0..20 {
            let g = synthesize_random_state(&ranges, c, &mut rng).unwrap();
            assert_abs_diff_eq!(g.state.purity(), 1.0, epsilon = 1e-8);
            assert!(g.state.trace_leakage() <= MAX_LEAKAGE);
        }
    }

    #[test]
    fn photon_subtraction_matches_operator_form() {
        // (cos γ a1 + sin γ a2) S1 S2 |00>, computed directly
        let c = FockCutoff::new(20).unwrap();
        let params = PhotonSubtraction {
            r1_db: 2.0,
            r2_db: -3.0,
            omega1: 0.3,
            omega2: -1.1,
            gamma: 0.6,
            eta: 0.0,
        };
        let d = 40;
        let r1 = db_to_squeezing(params.r1_db);
        let r2 = db_to_squeezing(params.r2_db);
        let s1 = squeezer(C64::from_polar(r1, params.omega1), d);
        let s2 = squeezer(C64::from_polar(r2, params.omega2), d);
        let mut vac = DVector::zeros(d * d);
        vac[0] = C64::new(1.0, 0.0);
        let a = annihilation(d);
        let sub = embed(&a, Mode::One) * C64::new(params.gamma.cos(), 0.0)
            + embed(&a, Mode::Two) * C64::new(params.gamma.sin(), 0.0);
        let psi = sub * (s1.kronecker(&s2) * vac);
        let mut grid = CMatrix::zeros(c.local_dim(), c.local_dim());
        for n1 in 0..c.local_dim() {
            for n2 in 0..c.local_dim() {
                grid[(n1, n2)] = psi[n1 * d + n2];
            }
        }
        let direct = TwoModeState::from_grid(&grid, c).unwrap();
        let built = photon_subtracted_state(&params, c).unwrap();
        assert_abs_diff_eq!(fidelity(&direct, &built).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn photon_subtraction_rejects_vacuum_and_bad_angles() {
        let c = FockCutoff::default();
        let mut p = PhotonSubtraction::reference(0.0);
        p.r1_db = 0.0;
        p.r2_db = 0.0;
        assert!(photon_subtracted_state(&p, c).is_err());
        let mut p = PhotonSubtraction::reference(0.0);
        p.gamma = 2.0;
        assert!(photon_subtracted_state(&p, c).is_err());
        assert!(photon_subtracted_state(&PhotonSubtraction::reference(1.2), c).is_err());
    }

    #[test]
    fn gamma_zero_is_single_mode_subtraction() {
        let c = FockCutoff::default();
        let mut p = PhotonSubtraction::reference(0.0);
        p.gamma = 0.0;
        let state = photon_subtracted_state(&p, c).unwrap();
        // S1 S2 |10>: mode 1 has odd parity, mode 2 even
        let d = c.local_dim();
        for n1 in 0..d {
            for n2 in 0..d {
                let w = state.rho()[(c.index(n1, n2), c.index(n1, n2))].re;
                if n1 % 2 == 0 || n2 % 2 == 1 {
                    assert!(w < 1e-12);
                }
            }
        }
    }
}
