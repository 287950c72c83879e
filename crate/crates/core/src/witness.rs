//! Ground-truth entanglement labels.
//!
//! The PPT witness is `−λ_min(ρ^{T₂})`. The metrological witness is
//! `max_n [F_Q(ρ, n·H) − 4 Σ_i Var(n_i·H_i)]` over unit vectors `n` of local
//! generator coefficients; since both terms are quadratic forms in `n`, the
//! maximum is the top eigenvalue of `F − 4Γ`.

use nalgebra::DMatrix;

use crate::error::{CvError, Result};
use crate::fock::{build_mode_operators, embed, hermitian_eigen, CMatrix, Mode, TwoModeState};

pub const PPT_CUTOFF: f64 = 1e-3;
pub const QFI_CUTOFF: f64 = 1e-8;

/// Eigenvalue pairs with `λi + λj` at or below this are skipped in the QFI sum.
pub const SPECTRAL_FLOOR: f64 = 1e-10;

/// Local generator family: order 1 is `(x, p)`, order 2 adds
/// `(x², p², (xp+px)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorSet {
    First,
    Second,
}

impl GeneratorSet {
    pub fn order(self) -> usize {
        match self {
            GeneratorSet::First => 1,
            GeneratorSet::Second => 2,
        }
    }

    /// Operators per mode.
    pub fn len(self) -> usize {
        match self {
            GeneratorSet::First => 2,
            GeneratorSet::Second => 5,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Single-mode operators of the family at `dim` levels.
    pub fn operators(self, cutoff: crate::fock::FockCutoff) -> Vec<CMatrix> {
        let ops = build_mode_operators(cutoff);
        match self {
            GeneratorSet::First => vec![ops.x, ops.p],
            GeneratorSet::Second => vec![ops.x, ops.p, ops.x2, ops.p2, ops.sym_xp],
        }
    }
}

/// Real witness values before thresholding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessValues {
    pub ppt_min: f64,
    pub qfi1: f64,
    pub qfi2: f64,
}

/// Binary labels `(E_PPT, E_QFI1, E_QFI2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LabelVector {
    pub e_ppt: bool,
    pub e_qfi1: bool,
    pub e_qfi2: bool,
}

impl LabelVector {
    pub fn new(e_ppt: bool, e_qfi1: bool, e_qfi2: bool) -> Self {
        Self {
            e_ppt,
            e_qfi1,
            e_qfi2,
        }
    }

    pub fn as_array(&self) -> [bool; 3] {
        [self.e_ppt, self.e_qfi1, self.e_qfi2]
    }

    pub fn from_array(v: [bool; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn as_f64(&self) -> [f64; 3] {
        self.as_array().map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl WitnessValues {
    pub fn labels(&self) -> LabelVector {
        LabelVector {
            e_ppt: self.ppt_min > PPT_CUTOFF,
            e_qfi1: self.qfi1 > QFI_CUTOFF,
            e_qfi2: self.qfi2 > QFI_CUTOFF,
        }
    }
}

/// `−λ_min` of the partial transpose on mode 2.
pub fn ppt_witness(state: &TwoModeState) -> Result<f64> {
    let spec = hermitian_eigen(&state.partial_transpose(Mode::Two))?;
    Ok(-spec.min())
}

/// Quadratic forms of the metrological witness over `2k` local generators,
/// ordered mode-1 operators first.
#[derive(Clone, Debug)]
pub struct QfiForms {
    /// Quantum Fisher matrix.
    pub fisher: DMatrix<f64>,
    /// Block-diagonal symmetrized covariance (no cross-mode blocks).
    pub covariance: DMatrix<f64>,
}

impl QfiForms {
    /// `F − 4Γ`.
    pub fn witness_matrix(&self) -> DMatrix<f64> {
        &self.fisher - &self.covariance * 4.0
    }
}

fn symmetrized_covariance(rho: &CMatrix, ops: &[CMatrix]) -> DMatrix<f64> {
    let k = ops.len();
    let means: Vec<f64> = ops.iter().map(|h| (rho * h).trace().re).collect();
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        let rho_a = rho * &ops[a];
        for b in a..k {
            // ½⟨{A,B}⟩ = Re Tr(ρ A B) for Hermitian A, B
            let second = (&rho_a * &ops[b]).trace().re;
            let v = second - means[a] * means[b];
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

pub fn qfi_quadratic_forms(state: &TwoModeState, gens: GeneratorSet) -> Result<QfiForms> {
    let cutoff = state.cutoff();
    let local = gens.operators(cutoff);
    let k = local.len();
    let spec = hermitian_eigen(state.rho())?;
    let lambda = &spec.values;
    let dim = lambda.len();

    let mut weights = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let s = lambda[i] + lambda[j];
            if s > SPECTRAL_FLOOR {
                weights[(i, j)] = (lambda[i] - lambda[j]).powi(2) / s;
            }
        }
    }

    let v = &spec.vectors;
    let v_adj = v.adjoint();
    let in_eigenbasis: Vec<CMatrix> = [Mode::One, Mode::Two]
        .iter()
        .flat_map(|&mode| local.iter().map(move |op| embed(op, mode)))
        .map(|h| &v_adj * h * v)
        .collect();

    let n = 2 * k;
    let mut fisher = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            // Re(⟨i|A|j⟩⟨j|B|i⟩) = Re(A_ij conj(B_ij)) for Hermitian B
            let ha = &in_eigenbasis[a];
            let hb = &in_eigenbasis[b];
            let mut acc = 0.0;
            for j in 0..dim {
                for i in 0..dim {
                    let w = weights[(i, j)];
                    if w != 0.0 {
                        acc += w * (ha[(i, j)] * hb[(i, j)].conj()).re;
                    }
                }
            }
            fisher[(a, b)] = 2.0 * acc;
            fisher[(b, a)] = 2.0 * acc;
        }
    }

    let mut covariance = DMatrix::zeros(n, n);
    for (block, mode) in [Mode::One, Mode::Two].into_iter().enumerate() {
        let reduced = state.reduced(mode);
        let cov = symmetrized_covariance(&reduced, &local);
        covariance.view_mut((block * k, block * k), (k, k)).copy_from(&cov);
    }
    Ok(QfiForms { fisher, covariance })
}

/// Top eigenvalue of `F − 4Γ`.
pub fn qfi_witness(state: &TwoModeState, gens: GeneratorSet) -> Result<f64> {
    let forms = qfi_quadratic_forms(state, gens)?;
    top_eigenvalue(forms.witness_matrix())
}

fn top_eigenvalue(m: DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let sym = faer::Mat::<f64>::from_fn(n, n, |r, c| 0.5 * (m[(r, c)] + m[(c, r)]));
    let values = sym
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| CvError::Divergence(format!("eigendecomposition failed: {e:?}")))?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// All three witnesses with the fixed label cutoffs applied.
pub fn label_state(state: &TwoModeState) -> Result<(WitnessValues, LabelVector)> {
    let values = WitnessValues {
        ppt_min: ppt_witness(state)?,
        qfi1: qfi_witness(state, GeneratorSet::First)?,
        qfi2: qfi_witness(state, GeneratorSet::Second)?,
    };
    Ok((values, values.labels()))
}

/// Variance of a Hermitian operator, used by tests and diagnostics.
pub fn variance(state: &TwoModeState, op: &CMatrix) -> f64 {
    let mean = state.expectation(op).re;
    let second = state.expectation(&(op * op)).re;
    second - mean * mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockCutoff, GaussianCircuit};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C64;

    fn two_mode_squeezed(r: f64, cutoff: FockCutoff) -> TwoModeState {
        // |TMSV> = Σ (-e^{iθ} tanh r)^n / cosh r |n,n>, truncated and renormalized
        let d = cutoff.local_dim();
        let mut grid = CMatrix::zeros(d, d);
        for n in 0..d {
            grid[(n, n)] = C64::new(r.tanh().powi(n as i32) / r.cosh(), 0.0);
        }
        TwoModeState::from_grid(&grid, cutoff).unwrap()
    }

    #[test]
    fn vacuum_labels() {
        let (values, labels) = label_state(&TwoModeState::vacuum(FockCutoff::default())).unwrap();
        assert_abs_diff_eq!(values.ppt_min, 0.0, epsilon = 1e-12);
        assert!(values.qfi1 <= QFI_CUTOFF);
        assert!(values.qfi2 <= QFI_CUTOFF);
        assert_eq!(labels, LabelVector::default());
    }

    #[test]
    fn bell_state_ppt() {
        let c = FockCutoff::new(2).unwrap();
        let mut grid = CMatrix::zeros(2, 2);
        grid[(0, 0)] = C64::new(1.0, 0.0);
        grid[(1, 1)] = C64::new(1.0, 0.0);
        let s = TwoModeState::from_grid(&grid, c).unwrap();
        assert_abs_diff_eq!(ppt_witness(&s).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_vacuum_labels() {
        let c = FockCutoff::default();
        let weak = two_mode_squeezed(0.3, c);
        assert!(ppt_witness(&weak).unwrap() > PPT_CUTOFF);
        let strong = two_mode_squeezed(0.6, c);
        let (values, labels) = label_state(&strong).unwrap();
        assert!(values.qfi1 > 0.0);
        assert_eq!(labels, LabelVector::new(true, true, true));
    }

    #[test]
    fn pure_state_fisher_is_four_variances() {
        let c = FockCutoff::default();
        let circuit = GaussianCircuit {
            squeeze: [C64::new(0.3, 0.2), C64::new(-0.1, 0.4)],
            displace: [C64::new(0.5, -0.2), C64::new(0.1, 0.3)],
            bs_in: Some(C64::new(0.4, 0.1)),
            ..Default::default()
        };
        let mut core = CMatrix::zeros(2, 2);
        core[(1, 0)] = C64::new(0.6, 0.0);
        core[(0, 1)] = C64::new(0.0, 0.8);
        let (grid, _) = circuit.evolve_pure(&core, c).unwrap();
        let state = TwoModeState::from_grid(&grid, c).unwrap();
        let forms = qfi_quadratic_forms(&state, GeneratorSet::Second).unwrap();
        let ops = GeneratorSet::Second.operators(c);
        for (a, mode) in [(0usize, Mode::One), (5, Mode::Two)] {
            for (k, op) in ops.iter().enumerate() {
                let var = variance(&state, &embed(op, mode));
                assert_abs_diff_eq!(forms.fisher[(a + k, a + k)], 4.0 * var, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn vacuum_fisher_equals_four_gamma() {
        let forms = qfi_quadratic_forms(&TwoModeState::vacuum(FockCutoff::default()), GeneratorSet::First).unwrap();
        let diff = forms.witness_matrix();
        assert!(diff.amax() < 1e-12);
        assert_abs_diff_eq!(forms.covariance[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forms_are_symmetric() {
        let s = two_mode_squeezed(0.4, FockCutoff::default());
        let forms = qfi_quadratic_forms(&s, GeneratorSet::Second).unwrap();
        assert!((&forms.fisher - forms.fisher.transpose()).amax() < 1e-10);
        assert!((&forms.covariance - forms.covariance.transpose()).amax() < 1e-10);
    }

    #[test]
    fn second_order_dominates_first() {
        let s = two_mode_squeezed(0.2, FockCutoff::default());
        let q1 = qfi_witness(&s, GeneratorSet::First).unwrap();
        let q2 = qfi_witness(&s, GeneratorSet::Second).unwrap();
        assert!(q2 >= q1 - 1e-9);
    }
}
