//! MaxLik reconstruction of one random state from growing homodyne records.

use cvkit::fock::{fidelity, FockCutoff};
use cvkit::homodyne::{HomodyneSampler, QuadGrid};
use cvkit::maxlik::{reconstruct_with, BinPovm, DEFAULT_ITERATIONS};
use cvkit::seeding::rng_for;
use cvkit::stellar::{synthesize_random_state, GenerationRanges};
use cvkit::witness::label_state;

fn main() -> cvkit::Result<()> {
    let cutoff = FockCutoff::default();
    let grid = QuadGrid::default();
    let povm = BinPovm::new(cutoff, grid)?;
    let g = synthesize_random_state(&GenerationRanges::default(), cutoff, &mut rng_for(2, &[0]))?;
    let (_, truth) = label_state(&g.state)?;
    println!("true labels {:?}", truth.as_array().map(u8::from));
    let sampler = HomodyneSampler::with_grid(&g.state, &grid)?;
    for n in [10, 100, 1_000, 10_000, 100_000] {
        let samples = sampler.sample(n, &mut rng_for(2, &[1, n as u64]));
        let rec = reconstruct_with(&povm, &samples, DEFAULT_ITERATIONS)?;
        let (_, labels) = label_state(&rec.state)?;
        let ll = &rec.log_likelihood;
        println!(
            "N = {n:>6}: fidelity {:.4}  logL {:.4} -> {:.4}  labels {:?}",
            fidelity(&g.state, &rec.state)?,
            ll[0],
            ll[ll.len() - 1],
            labels.as_array().map(u8::from)
        );
    }
    Ok(())
}
