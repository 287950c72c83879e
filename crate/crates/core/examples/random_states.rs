//! Random bounded-rank states: core, circuit, and resulting labels.

use cvkit::fock::FockCutoff;
use cvkit::seeding::rng_from_seed;
use cvkit::stellar::{synthesize_with_rank, GenerationRanges};
use cvkit::witness::label_state;

fn main() -> cvkit::Result<()> {
    let cutoff = FockCutoff::default();
    let ranges = GenerationRanges::default();
    let mut rng = rng_from_seed(11);
    println!("rank  purity   leakage    ppt_min    qfi1       qfi2     labels");
    for k in 0..9 {
        let g = synthesize_with_rank(&ranges, cutoff, Some(k % 3), &mut rng)?;
        let (w, l) = label_state(&g.state)?;
        println!(
            "{:>4}  {:.4}  {:.2e}  {:>9.4}  {:>9.4}  {:>9.4}  {:?}",
            g.core.rank(),
            g.state.purity(),
            g.state.trace_leakage(),
            w.ppt_min,
            w.qfi1,
            w.qfi2,
            l.as_array().map(u8::from)
        );
    }
    Ok(())
}
