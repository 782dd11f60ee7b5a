//! The transport sandwich bound on a handful of random point clouds.

use acot::data::RngSeed;
use acot::srot::{estimate_bounds, random_instance, BoundsConfig, DEFAULT_RESTARTS};

fn main() -> acot::Result<()> {
    println!("{:>2} {:>2} {:>10} {:>10} {:>10} {:>10}  ok", "d", "k", "p2", "c2", "s2", "residual");
    for i in 0..8 {
        let seed = RngSeed(42).child(i);
        let inst = random_instance(seed, false);
        let r = estimate_bounds(&inst.x, &inst.y, inst.k, DEFAULT_RESTARTS, seed.child(1), &BoundsConfig::default())?;
        println!(
            "{:>2} {:>2} {:>10.5} {:>10.5} {:>10.5} {:>10.5}  {}",
            r.d, r.k, r.p2, r.c2, r.s2, r.residual, r.sandwich_ok
        );
    }
    Ok(())
}
