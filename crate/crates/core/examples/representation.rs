//! Learns a subspace for one sequence and reports the per-round trace.

use acot::advgen::random_negatives;
use acot::data::{make_synthetic, RngSeed, SyntheticConfig};
use acot::representation::{learn_representation, ordering_satisfaction, AcotConfig};

fn main() -> acot::Result<()> {
    let ds = make_synthetic(&SyntheticConfig::default(), RngSeed(3))?;
    let x = &ds.sequences()[0];
    let y = random_negatives(x, 2 * x.len(), RngSeed(4))?;
    let cfg = AcotConfig::default();
    let out = learn_representation(x, &y, &cfg)?;
    for r in &out.trace {
        println!(
            "round {}  objective {:.5} -> {:.5}  rcg iters {:>3}  ordered {:.3}",
            r.round, r.step_value_before, r.step_value_after, r.rcg_iterations, r.ordering_satisfied
        );
    }
    println!(
        "subspace G({}, {}), ordering satisfied {:.3}",
        out.subspace.ambient_dim(),
        out.subspace.rank(),
        ordering_satisfaction(x, &out.subspace, cfg.eta)?
    );
    Ok(())
}
