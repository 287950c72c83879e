//! Exact correlation patterns versus finite-shot histograms.

use cvkit::fock::FockCutoff;
use cvkit::homodyne::{pattern_from_pdf, pattern_from_samples, HomodyneSampler};
use cvkit::seeding::rng_for;
use cvkit::stellar::{synthesize_random_state, GenerationRanges};

fn main() -> cvkit::Result<()> {
    let mut rng = rng_for(5, &[0]);
    let g = synthesize_random_state(&GenerationRanges::default(), FockCutoff::default(), &mut rng)?;
    let exact = pattern_from_pdf(&g.state)?;
    let sampler = HomodyneSampler::new(&g.state)?;
    for n in [100, 1_000, 10_000, 100_000] {
        let samples = sampler.sample(n, &mut rng_for(5, &[1, n as u64]));
        match pattern_from_samples(&samples) {
            Ok(p) => println!("N = {n:>6}: max total variation {:.4}", exact.max_total_variation(&p)),
            Err(e) => println!("N = {n:>6}: {e}"),
        }
    }
    let swapped = exact.swap_modes().swap_modes();
    println!("swap twice is identity: {}", swapped == exact);
    Ok(())
}
