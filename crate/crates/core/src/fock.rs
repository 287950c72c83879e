//! Truncated two-mode Fock space.
//!
//! Two-mode operators act on the product basis `|n1, n2>` flattened as
//! `n1 * d + n2`, with `d = n_max + 1`. Quadratures follow `x = a + a†`,
//! `p = i(a† - a)`, so the vacuum has unit quadrature variance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{CvError, Result};

pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Hermiticity tolerance accepted when constructing states.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Extra Fock levels per mode used while evolving pure states, before
/// projecting back onto the cutoff.
pub const EVOLUTION_PADDING: usize = 20;

/// Maximum photon number kept per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub const DEFAULT_N_MAX: usize = 9;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(CvError::CutoffTooSmall(n_max));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(self) -> usize {
        self.n_max
    }

    /// Single-mode dimension `n_max + 1`.
    pub fn local_dim(self) -> usize {
        self.n_max + 1
    }

    /// Two-mode dimension `(n_max + 1)^2`.
    pub fn dim(self) -> usize {
        self.local_dim() * self.local_dim()
    }

    pub fn index(self, n1: usize, n2: usize) -> usize {
        n1 * self.local_dim() + n2
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        Self {
            n_max: Self::DEFAULT_N_MAX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorLabel {
    A,
    ADag,
    X,
    P,
    X2,
    P2,
    SymXP,
}

/// Single-mode operators on the truncated space.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub x: CMatrix,
    pub p: CMatrix,
    pub x2: CMatrix,
    pub p2: CMatrix,
    pub sym_xp: CMatrix,
}

impl ModeOperators {
    pub fn get(&self, label: OperatorLabel) -> &CMatrix {
        match label {
            OperatorLabel::A => &self.a,
            OperatorLabel::ADag => &self.a_dag,
            OperatorLabel::X => &self.x,
            OperatorLabel::P => &self.p,
            OperatorLabel::X2 => &self.x2,
            OperatorLabel::P2 => &self.p2,
            OperatorLabel::SymXP => &self.sym_xp,
        }
    }
}

/// Annihilation operator on a `dim`-level truncated mode.
pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn build_mode_operators(cutoff: FockCutoff) -> ModeOperators {
    let a = annihilation(cutoff.local_dim());
    let a_dag = a.adjoint();
    let x = &a + &a_dag;
    let p = (&a_dag - &a) * C64::i();
    let x2 = &x * &x;
    let p2 = &p * &p;
    let sym_xp = (&x * &p + &p * &x) * C64::new(0.5, 0.0);
    ModeOperators {
        a,
        a_dag,
        x,
        p,
        x2,
        p2,
        sym_xp,
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embeds a single-mode operator into the two-mode space on `mode`.
pub fn embed(op: &CMatrix, mode: Mode) -> CMatrix {
    let id = CMatrix::identity(op.nrows(), op.ncols());
    match mode {
        Mode::One => kron(op, &id),
        Mode::Two => kron(&id, op),
    }
}

/// `exp(½(ξ* a² − ξ a†²))` on `dim` levels.
pub fn squeezer(xi: C64, dim: usize) -> CMatrix {
    let a = annihilation(dim);
    let a2 = &a * &a;
    let generator = (&a2 * xi.conj() - a2.adjoint() * xi) * C64::new(0.5, 0.0);
    generator.exp()
}

/// `exp(α a† − α* a)` on `dim` levels.
pub fn displacer(alpha: C64, dim: usize) -> CMatrix {
    let a = annihilation(dim);
    let generator = a.adjoint() * alpha - &a * alpha.conj();
    generator.exp()
}

/// `exp(φ a1† a2 − φ* a1 a2†)` on the two-mode space of `cutoff`.
pub fn beamsplitter(phi: C64, cutoff: FockCutoff) -> CMatrix {
    let a = annihilation(cutoff.local_dim());
    let a1 = embed(&a, Mode::One);
    let a2 = embed(&a, Mode::Two);
    let generator = a1.adjoint() * &a2 * phi - &a1 * a2.adjoint() * phi.conj();
    generator.exp()
}

/// Parameters of a two-mode Gaussian circuit followed by per-mode loss.
///
/// The unitary part applies `bs_in`, then displacement and squeezing on each
/// mode (`S_i D_i`), then `bs_out`. `loss` holds loss fractions, so `0` is a
/// lossless mode.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCircuit {
    pub bs_in: Option<C64>,
    pub squeeze: [C64; 2],
    pub displace: [C64; 2],
    pub bs_out: Option<C64>,
    pub loss: [f64; 2],
}

impl Default for GaussianCircuit {
    fn default() -> Self {
        Self {
            bs_in: None,
            squeeze: [ZERO; 2],
            displace: [ZERO; 2],
            bs_out: None,
            loss: [0.0; 2],
        }
    }
}

impl GaussianCircuit {
    pub fn validate(&self) -> Result<()> {
        for &eta in &self.loss {
            check_loss(eta)?;
        }
        let params = self
            .squeeze
            .iter()
            .chain(self.displace.iter())
            .chain(self.bs_in.iter())
            .chain(self.bs_out.iter());
        for z in params {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(CvError::InvalidParameter(format!(
                    "non-finite circuit parameter {z}"
                )));
            }
        }
        Ok(())
    }

    fn local_unitaries(&self, dim: usize) -> [CMatrix; 2] {
        let local = |i: usize| squeezer(self.squeeze[i], dim) * displacer(self.displace[i], dim);
        [local(0), local(1)]
    }

    /// Runs the unitary part on a pure amplitude grid `psi[(n1, n2)]` and
    /// projects onto `cutoff`.
    ///
    /// The evolution happens on `cutoff.local_dim() + EVOLUTION_PADDING`
    /// levels per mode; the returned leakage is the norm lost by the final
    /// projection. The returned grid is renormalized.
    pub fn evolve_pure(&self, psi: &CMatrix, cutoff: FockCutoff) -> Result<(CMatrix, f64)> {
        self.validate()?;
        let d = cutoff.local_dim();
        let work = d + EVOLUTION_PADDING;
        if psi.nrows() > work || psi.ncols() > work {
            return Err(CvError::DimensionMismatch {
                expected: work,
                got: psi.nrows().max(psi.ncols()),
            });
        }
        let mut grid = CMatrix::zeros(work, work);
        grid.view_mut((0, 0), (psi.nrows(), psi.ncols())).copy_from(psi);

        if let Some(phi) = self.bs_in {
            apply_beamsplitter_grid(&mut grid, phi);
        }
        let [m1, m2] = self.local_unitaries(work);
        grid = &m1 * grid * m2.transpose();
        if let Some(phi) = self.bs_out {
            apply_beamsplitter_grid(&mut grid, phi);
        }

        let total = grid.norm_squared();
        let projected = grid.view((0, 0), (d, d)).into_owned();
        let kept = projected.norm_squared();
        if kept <= 0.0 {
            return Err(CvError::InvalidParameter(
                "state has no weight inside the cutoff".into(),
            ));
        }
        let leakage = (1.0 - kept / total).max(0.0);
        Ok((projected / C64::new(kept.sqrt(), 0.0), leakage))
    }
}

fn check_loss(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(CvError::InvalidParameter(format!(
            "loss fraction {eta} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Applies `exp(φ a1† a2 − φ* a1 a2†)` to an amplitude grid by exponentiating
/// each total-photon-number block separately.
fn apply_beamsplitter_grid(grid: &mut CMatrix, phi: C64) {
    let l = grid.nrows();
    for total in 0..(2 * l - 1) {
        let k_lo = total.saturating_sub(l - 1);
        let k_hi = total.min(l - 1);
        let size = k_hi - k_lo + 1;
        let mut generator = CMatrix::zeros(size, size);
        for idx in 0..size {
            let k = k_lo + idx;
            let rest = total - k;
            // a1† a2 : |k, rest> -> |k+1, rest-1>
            if idx + 1 < size {
                let c = ((k + 1) as f64 * rest as f64).sqrt();
                generator[(idx + 1, idx)] += phi * c;
            }
            // a1 a2† : |k, rest> -> |k-1, rest+1>
            if idx > 0 {
                let c = (k as f64 * (rest + 1) as f64).sqrt();
                generator[(idx - 1, idx)] -= phi.conj() * c;
            }
        }
        let block = generator.exp();
        let input = DVector::from_iterator(size, (0..size).map(|i| grid[(k_lo + i, total - k_lo - i)]));
        let output = block * input;
        for i in 0..size {
            grid[(k_lo + i, total - k_lo - i)] = output[i];
        }
    }
}

/// `Û_out (Ŝ₁D̂₁ ⊗ Ŝ₂D̂₂) V̂_in` built from the truncated generators on `cutoff`.
/// Loss parameters are ignored.
pub fn gaussian_unitary(circuit: &GaussianCircuit, cutoff: FockCutoff) -> Result<CMatrix> {
    circuit.validate()?;
    let [m1, m2] = circuit.local_unitaries(cutoff.local_dim());
    let mut u = kron(&m1, &m2);
    if let Some(phi) = circuit.bs_in {
        u *= beamsplitter(phi, cutoff);
    }
    if let Some(phi) = circuit.bs_out {
        u = beamsplitter(phi, cutoff) * u;
    }
    Ok(u)
}

/// Truncated two-mode density matrix.
#[derive(Clone, Debug)]
pub struct TwoModeState {
    rho: CMatrix,
    cutoff: FockCutoff,
    trace_leakage: f64,
}

impl TwoModeState {
    /// Validates Hermiticity, then symmetrizes and normalizes the trace.
    pub fn from_density(rho: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        check_square(&rho, cutoff.dim())?;
        let asym = max_asymmetry(&rho);
        if asym > HERMITIAN_TOL {
            return Err(CvError::NotHermitian(asym));
        }
        let mut rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let tr = rho.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(CvError::InvalidTrace(tr));
        }
        rho /= C64::new(tr, 0.0);
        Ok(Self {
            rho,
            cutoff,
            trace_leakage: 0.0,
        })
    }

    /// Pure state from amplitudes indexed `n1 * d + n2`.
    pub fn from_pure(psi: &DVector<C64>, cutoff: FockCutoff) -> Result<Self> {
        if psi.len() != cutoff.dim() {
            return Err(CvError::DimensionMismatch {
                expected: cutoff.dim(),
                got: psi.len(),
            });
        }
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CvError::InvalidTrace(norm * norm));
        }
        let psi = psi / C64::new(norm, 0.0);
        Ok(Self {
            rho: &psi * psi.adjoint(),
            cutoff,
            trace_leakage: 0.0,
        })
    }

    /// Pure state from an amplitude grid `grid[(n1, n2)]` of size at most d×d.
    pub fn from_grid(grid: &CMatrix, cutoff: FockCutoff) -> Result<Self> {
        let d = cutoff.local_dim();
        if grid.nrows() > d || grid.ncols() > d {
            return Err(CvError::DimensionMismatch {
                expected: d,
                got: grid.nrows().max(grid.ncols()),
            });
        }
        let mut psi = DVector::zeros(cutoff.dim());
        for n1 in 0..grid.nrows() {
            for n2 in 0..grid.ncols() {
                psi[cutoff.index(n1, n2)] = grid[(n1, n2)];
            }
        }
        Self::from_pure(&psi, cutoff)
    }

    pub fn fock(n1: usize, n2: usize, cutoff: FockCutoff) -> Result<Self> {
        if n1 > cutoff.n_max() || n2 > cutoff.n_max() {
            return Err(CvError::InvalidParameter(format!(
                "|{n1},{n2}> outside cutoff {}",
                cutoff.n_max()
            )));
        }
        let mut psi = DVector::zeros(cutoff.dim());
        psi[cutoff.index(n1, n2)] = ONE;
        Self::from_pure(&psi, cutoff)
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        Self::fock(0, 0, cutoff).expect("vacuum is inside every cutoff")
    }

    /// `rho1 ⊗ rho2` from single-mode density matrices.
    pub fn product(rho1: &CMatrix, rho2: &CMatrix, cutoff: FockCutoff) -> Result<Self> {
        check_square(rho1, cutoff.local_dim())?;
        check_square(rho2, cutoff.local_dim())?;
        Self::from_density(kron(rho1, rho2), cutoff)
    }

    pub fn maximally_mixed(cutoff: FockCutoff) -> Self {
        let dim = cutoff.dim();
        Self {
            rho: CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
            cutoff,
            trace_leakage: 0.0,
        }
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.trace_leakage = leakage;
        self
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> CMatrix {
        self.rho
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Norm discarded when the state was projected onto the cutoff.
    pub fn trace_leakage(&self) -> f64 {
        self.trace_leakage
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.rho.norm_squared()
    }

    pub fn expectation(&self, op: &CMatrix) -> C64 {
        (&self.rho * op).trace()
    }

    /// Reduced single-mode density matrix of `mode`.
    pub fn reduced(&self, mode: Mode) -> CMatrix {
        let d = self.cutoff.local_dim();
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += match mode {
                        Mode::One => self.rho[(i * d + k, j * d + k)],
                        Mode::Two => self.rho[(k * d + i, k * d + j)],
                    };
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `U rho U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        check_square(u, self.cutoff.dim())?;
        let rho = u * &self.rho * u.adjoint();
        Ok(Self {
            rho: (&rho + rho.adjoint()) * C64::new(0.5, 0.0),
            cutoff: self.cutoff,
            trace_leakage: self.trace_leakage,
        })
    }

    /// Exchanges the roles of the two modes.
    pub fn swap_modes(&self) -> Self {
        let d = self.cutoff.local_dim();
        let dim = self.cutoff.dim();
        let rho = CMatrix::from_fn(dim, dim, |r, c| {
            let (n1, n2) = (r / d, r % d);
            let (m1, m2) = (c / d, c % d);
            self.rho[(n2 * d + n1, m2 * d + m1)]
        });
        Self {
            rho,
            cutoff: self.cutoff,
            trace_leakage: self.trace_leakage,
        }
    }

    pub fn partial_transpose(&self, mode: Mode) -> CMatrix {
        partial_transpose(&self.rho, self.cutoff, mode)
    }
}

fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(CvError::DimensionMismatch {
            expected: dim,
            got: if m.nrows() != dim { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Applies independent single-mode loss channels; `eta` is the loss fraction.
pub fn apply_loss(state: &TwoModeState, eta1: f64, eta2: f64) -> Result<TwoModeState> {
    check_loss(eta1)?;
    check_loss(eta2)?;
    let cutoff = state.cutoff;
    let mut rho = state.rho.clone();
    if eta1 > 0.0 {
        rho = loss_on_mode(&rho, cutoff, Mode::One, eta1);
    }
    if eta2 > 0.0 {
        rho = loss_on_mode(&rho, cutoff, Mode::Two, eta2);
    }
    Ok(TwoModeState {
        rho,
        cutoff,
        trace_leakage: state.trace_leakage,
    })
}

/// `c[n][k] = sqrt(C(n,k)) (1-eta)^((n-k)/2) eta^(k/2)`, the Kraus amplitude
/// taking `|n>` to `|n-k>`.
fn kraus_amplitudes(eta: f64, d: usize) -> Vec<Vec<f64>> {
    let mut binom = vec![vec![0.0f64; d]; d];
    for n in 0..d {
        binom[n][0] = 1.0;
        for k in 1..=n {
            binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0.0 };
        }
    }
    (0..d)
        .map(|n| {
            (0..d)
                .map(|k| {
                    if k > n {
                        0.0
                    } else {
                        binom[n][k].sqrt()
                            * (1.0 - eta).powf((n - k) as f64 / 2.0)
                            * eta.powf(k as f64 / 2.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn loss_on_mode(rho: &CMatrix, cutoff: FockCutoff, mode: Mode, eta: f64) -> CMatrix {
    let d = cutoff.local_dim();
    let c = kraus_amplitudes(eta, d);
    let dim = cutoff.dim();
    let mut out = CMatrix::zeros(dim, dim);
    let split = |idx: usize| -> (usize, usize) {
        match mode {
            Mode::One => (idx / d, idx % d),
            Mode::Two => (idx % d, idx / d),
        }
    };
    let join = |lossy: usize, other: usize| -> usize {
        match mode {
            Mode::One => lossy * d + other,
            Mode::Two => other * d + lossy,
        }
    };
    for r in 0..dim {
        let (n, n_other) = split(r);
        for col in 0..dim {
            let v = rho[(r, col)];
            if v == ZERO {
                continue;
            }
            let (m, m_other) = split(col);
            for k in 0..=n.min(m) {
                let w = c[n][k] * c[m][k];
                if w != 0.0 {
                    out[(join(n - k, n_other), join(m - k, m_other))] += v * w;
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn reconstruct(&self) -> CMatrix {
        let lambda = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| C64::new(v, 0.0)),
        ));
        &self.vectors * lambda * self.vectors.adjoint()
    }
}

pub fn hermitian_eigen(m: &CMatrix) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(CvError::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL {
        return Err(CvError::NotHermitian(asym));
    }
    let n = m.nrows();
    let sym = faer::Mat::<faer::c64>::from_fn(n, n, |r, c| {
        let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
        faer::c64::new(z.re, z.im)
    });
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| CvError::Divergence(format!("eigendecomposition failed: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = order.iter().map(|&k| s[k].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| {
        let z = u[(r, order[c])];
        C64::new(z.re, z.im)
    });
    Ok(Spectrum { values, vectors })
}

pub fn spectral(state: &TwoModeState) -> Result<Spectrum> {
    hermitian_eigen(&state.rho)
}

/// Partial transpose: swaps `n_i` with `n_i'` on the chosen mode.
pub fn partial_transpose(rho: &CMatrix, cutoff: FockCutoff, mode: Mode) -> CMatrix {
    let d = cutoff.local_dim();
    let dim = cutoff.dim();
    CMatrix::from_fn(dim, dim, |r, c| {
        let (n1, n2) = (r / d, r % d);
        let (m1, m2) = (c / d, c % d);
        match mode {
            Mode::One => rho[(m1 * d + n2, n1 * d + m2)],
            Mode::Two => rho[(n1 * d + m2, m1 * d + n2)],
        }
    })
}

/// Square root of a positive semidefinite Hermitian matrix; negative
/// eigenvalues are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let spec = hermitian_eigen(m)?;
    let roots = DVector::from_iterator(
        spec.values.len(),
        spec.values.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    );
    Ok(&spec.vectors * CMatrix::from_diagonal(&roots) * spec.vectors.adjoint())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &TwoModeState, sigma: &TwoModeState) -> Result<f64> {
    if rho.cutoff != sigma.cutoff {
        return Err(CvError::DimensionMismatch {
            expected: rho.cutoff.dim(),
            got: sigma.cutoff.dim(),
        });
    }
    let root = psd_sqrt(&rho.rho)?;
    let inner = &root * &sigma.rho * &root;
    let inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let spec = hermitian_eigen(&inner)?;
    let tr: f64 = spec.values.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
