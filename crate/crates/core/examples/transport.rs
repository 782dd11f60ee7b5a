//! IPOT against the exact assignment solver on a small cost matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use acot::ot::{cost_matrix, exact_ot_uniform, ipot_with_trace, transport_cost, uniform, IpotConfig, Metric};

fn main() -> acot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = DMatrix::from_fn(3, 5, |_, _| rng.random::<f64>());
    let b = DMatrix::from_fn(3, 5, |_, _| rng.random::<f64>());
    let cost = cost_matrix(&a, &b, Metric::SquaredEuclidean)?;

    let (_, exact) = exact_ot_uniform(&cost)?;
    let cfg = IpotConfig::default();
    let mut iterations = 0;
    let pi = ipot_with_trace(&cost, &uniform(5), &uniform(5), &cfg, &mut |t, _| iterations = t + 1)?;
    println!("exact cost  {exact:.6}");
    println!("ipot cost   {:.6}", transport_cost(&pi, &cost)?);
    println!("marginals   {:.2e}", pi.marginal_violation());
    println!("iterations  {}", iterations);
    println!("plan\n{:.3}", pi.plan());
    Ok(())
}
