//! Subspace-robust transport quantities and the sandwich bound relating
//! them to the contrastive objective.
//!
//! For point clouds `X` (d×n) and `Y` (d×m) with uniform weights:
//!
//! ```text
//! P²ₖ = max_U min_π E_π ‖UUᵀx − UUᵀy‖²
//! C²ₖ = max_U min_π E_π ‖UUᵀx − y‖²
//! S²ₖ = min_π max_U E_π ‖UUᵀx − UUᵀy‖²
//! P²ₖ ≤ C²ₖ ≤ S²ₖ + max_U E_ν ‖(I − UUᵀ)y‖²
//! ```
//!
//! The last term equals the sum of the `d−k` largest eigenvalues of
//! `Σ_Y = (1/m) Σ y yᵀ`. The decomposition behind the bound is the
//! orthogonal split `‖UUᵀx − y‖² = ‖UUᵀ(x − y)‖² + ‖(I − UUᵀ)y‖²`.
//!
//! Maximizations over `U` are estimated from below and the S-side
//! minimization over `π` from above (its inner maximization is exact), so a
//! correct estimate must satisfy the sandwich up to solver tolerance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::RngSeed;
use crate::error::{Error, Result};
use crate::grassmann::{rcg_minimize, RayleighObjective, RcgConfig, SubspacePoint};
use crate::linalg::sorted_symmetric_eigen;
use crate::ot::{cost_matrix, ipot, transport_cost, uniform, Coupling, CostMatrix, IpotConfig, Metric};

/// Sum of the `d−k` largest eigenvalues of `(1/m) YYᵀ`. Accepts `0 ≤ k ≤ d`.
pub fn gram_residual(y: &DMatrix<f64>, k: usize) -> Result<f64> {
    let d = y.nrows();
    if k > d {
        return Err(Error::InvalidInput(format!("k={k} exceeds dimension {d}")));
    }
    if y.ncols() == 0 || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Gram residual needs a nonempty finite Y".into()));
    }
    let gram = y * y.transpose() / y.ncols() as f64;
    let (values, _) = sorted_symmetric_eigen(&gram);
    Ok(values.iter().take(d - k).sum::<f64>().max(0.0))
}

/// `(1/m) Σ_j ‖(I − UUᵀ)y_j‖²`, the quantity maximized by [`gram_residual`].
pub fn out_of_subspace_energy(y: &DMatrix<f64>, u: &SubspacePoint) -> f64 {
    let proj = u.basis().tr_mul(y);
    (y.norm_squared() - proj.norm_squared()) / y.ncols() as f64
}

/// Both sides of `‖UUᵀx − y‖² = ‖UUᵀx − UUᵀy‖² + ‖(I − UUᵀ)y‖²`.
pub fn pythagorean_check(x: &DVector<f64>, y: &DVector<f64>, u: &SubspacePoint) -> (f64, f64) {
    let p = u.projector();
    let px = &p * x;
    let py = &p * y;
    let lhs = (&px - y).norm_squared();
    let rhs = (&px - &py).norm_squared() + (y - &py).norm_squared();
    (lhs, rhs)
}

fn check_clouds(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "point clouds of dim {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::InvalidInput("point clouds must be nonempty".into()));
    }
    Ok(())
}

/// Squared cost between `UUᵀX` and `Y`.
fn contrastive_cost(x: &DMatrix<f64>, y: &DMatrix<f64>, u: &SubspacePoint) -> Result<CostMatrix> {
    cost_matrix(&(u.projector() * x), y, Metric::SquaredEuclidean)
}

/// Squared cost between `UUᵀX` and `UUᵀY`.
fn projected_cost(x: &DMatrix<f64>, y: &DMatrix<f64>, u: &SubspacePoint) -> Result<CostMatrix> {
    let p = u.projector();
    cost_matrix(&(&p * x), &(&p * y), Metric::SquaredEuclidean)
}

/// `min_π Σ π_ij ‖UUᵀx_i − y_j‖²` at a fixed subspace.
pub fn c2_value(x: &DMatrix<f64>, y: &DMatrix<f64>, u: &SubspacePoint, cfg: &IpotConfig) -> Result<f64> {
    check_clouds(x, y)?;
    let cost = contrastive_cost(x, y, u)?;
    let pi = ipot(&cost, &uniform(x.ncols()), &uniform(y.ncols()), cfg)?;
    transport_cost(&pi, &cost)
}

/// `min_π Σ π_ij ‖UUᵀ(x_i − y_j)‖²` at a fixed subspace.
pub fn p2_value(x: &DMatrix<f64>, y: &DMatrix<f64>, u: &SubspacePoint, cfg: &IpotConfig) -> Result<f64> {
    check_clouds(x, y)?;
    let cost = projected_cost(x, y, u)?;
    let pi = ipot(&cost, &uniform(x.ncols()), &uniform(y.ncols()), cfg)?;
    transport_cost(&pi, &cost)
}

/// `M_π = Σ π_ij (x_i − y_j)(x_i − y_j)ᵀ`.
pub fn displacement_moment(x: &DMatrix<f64>, y: &DMatrix<f64>, pi: &Coupling) -> DMatrix<f64> {
    let d = x.nrows();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..x.ncols() {
        for j in 0..y.ncols() {
            let w = pi.plan()[(i, j)];
            if w == 0.0 {
                continue;
            }
            let diff = x.column(i) - y.column(j);
            m.syger(w, &diff, &diff, 1.0);
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

/// Quadratic form `A` with `Σ π_ij ‖UUᵀx_i − y_j‖² = tr(UᵀAU) + const`.
fn contrastive_form(x: &DMatrix<f64>, y: &DMatrix<f64>, pi: &Coupling) -> DMatrix<f64> {
    let rows = pi.plan().column_sum();
    let mut a = x * DMatrix::from_diagonal(&rows) * x.transpose();
    let cross = x * pi.plan() * y.transpose();
    a -= &cross + cross.transpose();
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub ipot: IpotConfig,
    /// RCG settings for each fixed-coupling maximization over U.
    pub rcg: RcgConfig,
    /// Alternation rounds between the U-step and the π-step.
    pub alternations: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            ipot: IpotConfig::default(),
            rcg: RcgConfig::with_max_iters(50),
            alternations: 6,
        }
    }
}

pub const DEFAULT_RESTARTS: usize = 8;

/// Estimated quantities for one instance plus the sandwich verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub p2: f64,
    pub c2: f64,
    pub s2: f64,
    pub residual: f64,
    /// `c2 − p2`
    pub slack_lower: f64,
    /// `s2 + residual − c2`
    pub slack_upper: f64,
    pub epsilon: f64,
    pub sandwich_ok: bool,
    pub seed: u64,
}

/// `1e-6 + 1e-3·max(|p2|, |s2|, 1)`.
pub fn sandwich_tolerance(p2: f64, s2: f64) -> f64 {
    1e-6 + 1e-3 * p2.abs().max(s2.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy)]
enum MaxMinKind {
    Projected,
    Contrastive,
}

struct MaxMinEstimate {
    value: f64,
    point: SubspacePoint,
}

/// Alternating estimate of `max_U min_π` for one start: π-step by IPOT,
/// U-step by RCG on the fixed-π objective. Returns the best inner-min value
/// evaluated along the way together with its subspace.
fn max_min_from(
    kind: MaxMinKind,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    start: SubspacePoint,
    cfg: &BoundsConfig,
) -> Result<MaxMinEstimate> {
    let mu = uniform(x.ncols());
    let nu = uniform(y.ncols());
    let mut u = start;
    let mut best: Option<MaxMinEstimate> = None;
    for round in 0..=cfg.alternations {
        let cost = match kind {
            MaxMinKind::Projected => projected_cost(x, y, &u)?,
            MaxMinKind::Contrastive => contrastive_cost(x, y, &u)?,
        };
        let pi = ipot(&cost, &mu, &nu, &cfg.ipot)?;
        let value = transport_cost(&pi, &cost)?;
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(MaxMinEstimate {
                value,
                point: u.clone(),
            });
        }
        if round == cfg.alternations {
            break;
        }
        let form = match kind {
            MaxMinKind::Projected => displacement_moment(x, y, &pi),
            MaxMinKind::Contrastive => contrastive_form(x, y, &pi),
        };
        u = rcg_minimize(&RayleighObjective::new(form), &u, &cfg.rcg)?.point;
    }
    Ok(best.expect("at least one round"))
}

/// Alternating estimate of `min_π max_U`: the inner max at fixed π is the
/// sum of the top-k eigenvalues of `M_π`, the π-step re-solves IPOT on the
/// cost induced by the maximizing subspace. Returns the smallest inner-max
/// value seen.
fn min_max(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize, cfg: &BoundsConfig) -> Result<f64> {
    let mu = uniform(x.ncols());
    let nu = uniform(y.ncols());
    let full = cost_matrix(x, y, Metric::SquaredEuclidean)?;
    let mut pi = ipot(&full, &mu, &nu, &cfg.ipot)?;
    let mut best = f64::INFINITY;
    for round in 0..=cfg.alternations {
        let moment = displacement_moment(x, y, &pi);
        let (values, vectors) = sorted_symmetric_eigen(&moment);
        let inner_max: f64 = values.iter().take(k).sum();
        best = best.min(inner_max);
        if round == cfg.alternations {
            break;
        }
        let top = SubspacePoint::from_span(&vectors.columns(0, k).into_owned())?;
        let cost = projected_cost(x, y, &top)?;
        pi = ipot(&cost, &mu, &nu, &cfg.ipot)?;
    }
    Ok(best)
}

/// Estimates `P²ₖ`, `C²ₖ`, `S²ₖ` and the Gram residual for one instance and
/// checks the sandwich. Restarts run in parallel; the best value wins, ties
/// going to the lowest restart index.
pub fn estimate_bounds(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    k: usize,
    restarts: usize,
    seed: RngSeed,
    cfg: &BoundsConfig,
) -> Result<BoundsReport> {
    check_clouds(x, y)?;
    let d = x.nrows();
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("need 1 ≤ k ≤ d, got k={k}, d={d}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig("estimate_bounds needs at least one restart".into()));
    }

    let starts: Vec<SubspacePoint> = (0..restarts)
        .map(|r| SubspacePoint::random(d, k, &mut seed.child(r as u64).rng()))
        .collect::<Result<_>>()?;

    let run = |kind: MaxMinKind| -> Result<MaxMinEstimate> {
        let estimates: Vec<MaxMinEstimate> = starts
            .par_iter()
            .map(|s| max_min_from(kind, x, y, s.clone(), cfg))
            .collect::<Result<_>>()?;
        let mut best: Option<MaxMinEstimate> = None;
        for e in estimates {
            if best.as_ref().is_none_or(|b| e.value > b.value) {
                best = Some(e);
            }
        }
        Ok(best.expect("restarts ≥ 1"))
    };

    let p = run(MaxMinKind::Projected)?;
    let c = run(MaxMinKind::Contrastive)?;
    // The P-maximizer is a valid candidate for the C maximization and vice
    // versa; C(U) ≥ P(U) pointwise, so this keeps both estimates coherent.
    let c_at_p = c2_value(x, y, &p.point, &cfg.ipot)?;
    let p_at_c = p2_value(x, y, &c.point, &cfg.ipot)?;
    let p2 = p.value.max(p_at_c);
    let c2 = c.value.max(c_at_p);
    let s2 = min_max(x, y, k, cfg)?;
    let residual = gram_residual(y, k)?;

    let epsilon = sandwich_tolerance(p2, s2);
    let slack_lower = c2 - p2;
    let slack_upper = s2 + residual - c2;
    Ok(BoundsReport {
        d,
        k,
        n: x.ncols(),
        m: y.ncols(),
        p2,
        c2,
        s2,
        residual,
        slack_lower,
        slack_upper,
        epsilon,
        sandwich_ok: slack_lower >= -epsilon && slack_upper >= -epsilon,
        seed: seed.0,
    })
}

/// A random point-cloud pair for bound verification.
#[derive(Debug, Clone)]
pub struct BoundsInstance {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub k: usize,
}

/// Gaussian clouds with `d ∈ {2,3,4}`, `n, m ∈ {2,…,5}` and `k < d`, or
/// `k = d` when `full_rank` is set.
pub fn random_instance(seed: RngSeed, full_rank: bool) -> BoundsInstance {
    let mut rng = seed.rng();
    let d = rng.random_range(2..=4);
    let n = rng.random_range(2..=5);
    let m = rng.random_range(2..=5);
    let k = if full_rank { d } else { rng.random_range(1..d) };
    let x = DMatrix::from_fn(d, n, |_, _| rng.sample(StandardNormal));
    let y = DMatrix::from_fn(d, m, |_, _| rng.sample(StandardNormal));
    BoundsInstance { x, y, k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn gram_residual_cases() {
        let y = DMatrix::identity(2, 2);
        assert_eq!(gram_residual(&y, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(gram_residual(&y, 1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gram_residual(&y, 0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(gram_residual(&y, 3).is_err());
    }

    #[test]
    fn gram_residual_is_nonincreasing_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = DMatrix::from_fn(5, 7, |_, _| rng.random::<f64>() - 0.3);
        let trace = (&y * y.transpose()).trace() / 7.0;
        assert_abs_diff_eq!(gram_residual(&y, 0).unwrap(), trace, epsilon = 1e-12);
        let vals: Vec<f64> = (0..=5).map(|k| gram_residual(&y, k).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert_eq!(vals[5], 0.0);
    }

    #[test]
    fn gram_residual_matches_sphere_search_in_3d() {
        // k = 1 in d = 3: U is a unit vector, searched by random sampling.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = DMatrix::from_fn(3, 4, |_, _| rng.random::<f64>());
        let mut best = 0.0f64;
        for _ in 0..10_000 {
            let u = SubspacePoint::random(3, 1, &mut rng).unwrap();
            best = best.max(out_of_subspace_energy(&y, &u));
        }
        let exact = gram_residual(&y, 1).unwrap();
        assert!(best <= exact + 1e-12);
        assert!(exact - best <= 1e-3, "exact {exact} vs search {best}");
    }

    #[test]
    fn pythagorean_cases() {
        let u = SubspacePoint::new(DMatrix::identity(3, 1)).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.2, -1.0]);
        let y = e(3, 0) * 0.7;
        let (lhs, rhs) = pythagorean_check(&x, &y, &u);
        assert_abs_diff_eq!(lhs, (0.3f64 - 0.7).powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);

        let y = DVector::from_vec(vec![0.5, -0.2, 0.1]);
        let (lhs, rhs) = pythagorean_check(&DVector::zeros(3), &y, &u);
        assert_abs_diff_eq!(lhs, y.norm_squared(), epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, 0.25 + 0.05, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = SubspacePoint::random(5, 2, &mut rng).unwrap();
        let x = crate::linalg::gaussian_vector(5, &mut rng);
        let y = crate::linalg::gaussian_vector(5, &mut rng);
        let (lhs, rhs) = pythagorean_check(&x, &y, &u);
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn c2_value_cases() {
        let cfg = IpotConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = SubspacePoint::random(4, 2, &mut rng).unwrap();
        let x = DMatrix::from_fn(4, 3, |_, _| rng.random::<f64>());
        let y = u.projector() * &x;
        assert!(c2_value(&x, &y, &u, &cfg).unwrap() < 1e-6);

        let e1 = SubspacePoint::new(DMatrix::identity(2, 1)).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_abs_diff_eq!(c2_value(&x, &y, &e1, &cfg).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn two_dimensional_toy_by_angle_grid() {
        // X = [e₁], Y = [e₂], k = 1: parameterize u = (cos θ, sin θ).
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let mut p_grid = 0.0f64;
        let mut c_grid = 0.0f64;
        for i in 0..=20_000 {
            let th = std::f64::consts::PI * i as f64 / 20_000.0;
            let u = DVector::from_vec(vec![th.cos(), th.sin()]);
            let ux = u.dot(&x.column(0));
            let uy = u.dot(&y.column(0));
            p_grid = p_grid.max((ux - uy).powi(2));
            c_grid = c_grid.max((&u * ux - y.column(0)).norm_squared());
        }
        let report = estimate_bounds(&x, &y, 1, 4, RngSeed(5), &BoundsConfig::default()).unwrap();
        assert_abs_diff_eq!(report.p2, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p_grid, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.c2, c_grid, epsilon = 1e-6);
        assert!(report.c2 >= 2.0 - 1e-9);
        assert_abs_diff_eq!(report.residual, 1.0, epsilon = 1e-12);
        assert!(report.sandwich_ok, "{report:?}");
        assert!(report.c2 <= 2.0 + 1.0 + report.epsilon);
    }

    #[test]
    fn full_rank_collapses_all_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(3, 4, |_, _| rng.random::<f64>());
        let y = DMatrix::from_fn(3, 4, |_, _| rng.random::<f64>());
        let r = estimate_bounds(&x, &y, 3, 2, RngSeed(1), &BoundsConfig::default()).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!((r.p2 - r.c2).abs() <= r.epsilon && (r.c2 - r.s2).abs() <= r.epsilon, "{r:?}");
    }

    #[test]
    fn estimate_bounds_rejects_bad_arguments() {
        let x = DMatrix::identity(2, 2);
        let cfg = BoundsConfig::default();
        assert!(estimate_bounds(&x, &x, 1, 0, RngSeed(0), &cfg).is_err());
        assert!(estimate_bounds(&x, &x, 3, 1, RngSeed(0), &cfg).is_err());
        assert!(estimate_bounds(&x, &DMatrix::identity(3, 3), 1, 1, RngSeed(0), &cfg).is_err());
    }

    #[test]
    fn bounds_scale_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>());
        let y = DMatrix::from_fn(3, 4, |_, _| rng.random::<f64>());
        let cfg = BoundsConfig::default();
        let base = estimate_bounds(&x, &y, 1, 4, RngSeed(2), &cfg).unwrap();
        let t = 1.5;
        let scaled = estimate_bounds(&(&x * t), &(&y * t), 1, 4, RngSeed(2), &cfg).unwrap();
        let t2 = t * t;
        assert_abs_diff_eq!(scaled.residual, base.residual * t2, epsilon = 1e-10);
        for (a, b) in [(scaled.p2, base.p2), (scaled.c2, base.c2), (scaled.s2, base.s2)] {
            assert!((a - b * t2).abs() <= 1e-3 * (1.0 + a), "{a} vs {}", b * t2);
        }
    }
}
