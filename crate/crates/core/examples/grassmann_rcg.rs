//! Recovers the top-k eigenspace of a symmetric matrix with Riemannian
//! conjugate gradient on the Grassmannian.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use acot::grassmann::{principal_angle_affinity, rcg_minimize, RayleighObjective, RcgConfig, SubspacePoint};
use acot::linalg::random_rotation;

fn main() -> acot::Result<()> {
    let (d, k) = (8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_rotation(d, &mut rng);
    let spectrum = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| i as f64 + 1.0));
    let a = &q * spectrum * q.transpose();

    let start = SubspacePoint::random(d, k, &mut rng)?;
    let out = rcg_minimize(&RayleighObjective::new(a.clone()), &start, &RcgConfig::with_max_iters(500))?;

    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let truth = DMatrix::from_columns(&order[..k].iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());

    println!("value       {:.8} (optimum -{})", out.value, (d - k + 1..=d).sum::<usize>());
    println!("iterations  {} ({:?})", out.iterations, out.stop);
    println!("grad norm   {:.2e}", out.grad_norm);
    println!("affinity    {:.8}", principal_angle_affinity(&out.point, &SubspacePoint::new(truth)?)?);
    Ok(())
}
