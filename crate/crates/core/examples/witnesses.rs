//! Entanglement witnesses of the two-mode squeezed vacuum under loss.

use cvkit::fock::{apply_loss, FockCutoff, TwoModeState};
use cvkit::witness::label_state;
use nalgebra::DVector;
use num_complex::Complex64;

fn tmsv(r: f64, cutoff: FockCutoff) -> cvkit::Result<TwoModeState> {
    let mut psi = DVector::zeros(cutoff.dim());
    for n in 0..cutoff.local_dim() {
        psi[cutoff.index(n, n)] = Complex64::new(r.tanh().powi(n as i32) / r.cosh(), 0.0);
    }
    let norm = psi.norm();
    TwoModeState::from_pure(&(psi / Complex64::new(norm, 0.0)), cutoff)
}

fn main() -> cvkit::Result<()> {
    let cutoff = FockCutoff::default();
    println!("   r   loss    ppt_min       qfi1       qfi2   labels");
    for r in [0.3, 0.6] {
        for eta in [0.0, 0.3, 0.6, 0.9] {
            let state = apply_loss(&tmsv(r, cutoff)?, eta, eta)?;
            let (w, l) = label_state(&state)?;
            println!(
                "{r:.1}  {eta:.1}  {:>10.5} {:>10.5} {:>10.5}   {:?}",
                w.ppt_min,
                w.qfi1,
                w.qfi2,
                l.as_array().map(u8::from)
            );
        }
    }
    Ok(())
}
