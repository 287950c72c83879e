//! Truncated Fock-space operations on small textbook states.

use cvkit::fock::{apply_loss, build_mode_operators, embed, hermitian_eigen, squeezer, FockCutoff, Mode, TwoModeState};
use cvkit::witness::variance;
use nalgebra::DVector;
use num_complex::Complex64;

fn main() -> cvkit::Result<()> {
    let cutoff = FockCutoff::default();
    let d = cutoff.local_dim();
    let ops = build_mode_operators(cutoff);

    // single-mode squeezed vacuum on mode 1, vacuum on mode 2
    let big = FockCutoff::new(24)?;
    let s = squeezer(Complex64::new(0.3, 0.0), big.local_dim());
    let mut psi = DVector::zeros(big.dim());
    for n in 0..big.local_dim() {
        psi[big.index(n, 0)] = s[(n, 0)];
    }
    let squeezed = TwoModeState::from_pure(&psi, big)?;
    let x1 = embed(&build_mode_operators(big).x, Mode::One);
    println!("Var(x1) of squeezed vacuum r=0.3: {:.8}  (e^-0.6 = {:.8})", variance(&squeezed, &x1), (-0.6f64).exp());

    // loss on a single photon
    let one = TwoModeState::fock(1, 0, cutoff)?;
    let lossy = apply_loss(&one, 0.25, 0.0)?;
    println!(
        "|1><1| through 25% loss: p(0) = {:.4}, p(1) = {:.4}",
        lossy.rho()[(0, 0)].re,
        lossy.rho()[(cutoff.index(1, 0), cutoff.index(1, 0))].re
    );

    // partial transpose of a Bell-like state
    let mut bell = DVector::zeros(cutoff.dim());
    bell[cutoff.index(0, 0)] = Complex64::new(0.5f64.sqrt(), 0.0);
    bell[cutoff.index(1, 1)] = Complex64::new(0.5f64.sqrt(), 0.0);
    let bell = TwoModeState::from_pure(&bell, cutoff)?;
    let pt = hermitian_eigen(&bell.partial_transpose(Mode::Two))?;
    println!("smallest PT eigenvalue of (|00>+|11>)/sqrt2: {:.6}", pt.min());

    let n1 = embed(&(&ops.a_dag * &ops.a), Mode::One);
    println!("<n1> of the Bell state: {:.4}  (d = {d})", bell.expectation(&n1).re);
    Ok(())
}
