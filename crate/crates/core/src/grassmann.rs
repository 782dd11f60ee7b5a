//! Geometry of the Grassmann manifold G(d,k) and a Riemannian
//! conjugate-gradient minimizer.
//!
//! Points are represented by `d×k` orthonormal bases `U`; the subspace is
//! the equivalence class `{UR : R ∈ O(k)}`. Tangent vectors live in the
//! horizontal space `{ξ : Uᵀξ = 0}`, retraction is the positive-diagonal
//! thin QR of `U + tξ`, and vector transport re-projects onto the new
//! horizontal space.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frob_inner, max_abs, random_orthonormal, thin_qr_positive};

/// Orthonormality tolerance for [`SubspacePoint`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A point of G(d,k) stored as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePoint {
    basis: DMatrix<f64>,
}

impl SubspacePoint {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (d, k) = basis.shape();
        if k == 0 || k > d {
            return Err(Error::InvalidInput(format!("subspace basis must satisfy 1 ≤ k ≤ d, got {d}×{k}")));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("subspace basis has non-finite entries".into()));
        }
        let defect = max_abs(&(basis.tr_mul(&basis) - DMatrix::identity(k, k)));
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "basis columns are not orthonormal (max |UᵀU − I| = {defect:e})"
            )));
        }
        Ok(SubspacePoint { basis })
    }

    /// Orthonormalizes an arbitrary full-rank `d×k` matrix via QR.
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        let q = thin_qr_positive(m)
            .ok_or_else(|| Error::Numerical("cannot orthonormalize a rank-deficient matrix".into()))?;
        SubspacePoint::new(q)
    }

    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidInput(format!("need 1 ≤ k ≤ d, got d={d}, k={k}")));
        }
        SubspacePoint::new(random_orthonormal(d, k, rng))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `UUᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Same subspace, basis rotated on the right by an orthogonal `k×k` matrix.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        if r.shape() != (self.rank(), self.rank()) {
            return Err(Error::DimensionMismatch(format!(
                "rotation {:?} for a rank-{} subspace",
                r.shape(),
                self.rank()
            )));
        }
        SubspacePoint::new(&self.basis * r)
    }
}

/// A horizontal tangent vector at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    delta: DMatrix<f64>,
}

impl TangentVector {
    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }

    pub(crate) fn from_raw(delta: DMatrix<f64>) -> Self {
        TangentVector { delta }
    }
}

/// Horizontal projection `(I − UUᵀ)G`.
pub fn project_tangent(u: &SubspacePoint, g: &DMatrix<f64>) -> Result<TangentVector> {
    if g.shape() != u.basis.shape() {
        return Err(Error::DimensionMismatch(format!(
            "tangent projection of {:?} at a {:?} basis",
            g.shape(),
            u.basis.shape()
        )));
    }
    Ok(TangentVector {
        delta: horizontal(&u.basis, g),
    })
}

fn horizontal(u: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    g - u * u.tr_mul(g)
}

/// QR retraction: the Q factor of `U + step·ξ` with nonnegative `diag(R)`.
pub fn retract_qr(u: &SubspacePoint, xi: &TangentVector, step: f64) -> Result<SubspacePoint> {
    if xi.delta.shape() != u.basis.shape() {
        return Err(Error::DimensionMismatch(format!(
            "retracting a {:?} tangent at a {:?} basis",
            xi.delta.shape(),
            u.basis.shape()
        )));
    }
    if step == 0.0 {
        return Ok(u.clone());
    }
    let moved = &u.basis + &xi.delta * step;
    let q = thin_qr_positive(&moved).ok_or_else(|| {
        Error::Numerical(format!("U + {step}·ξ is rank deficient; retraction undefined"))
    })?;
    Ok(SubspacePoint { basis: q })
}

/// `‖U₁ᵀU₂‖²_F ∈ [0, k]`, the sum of squared cosines of the principal angles.
pub fn principal_angle_affinity(u1: &SubspacePoint, u2: &SubspacePoint) -> Result<f64> {
    if u1.basis.shape() != u2.basis.shape() {
        return Err(Error::DimensionMismatch(format!(
            "affinity between {:?} and {:?} bases",
            u1.basis.shape(),
            u2.basis.shape()
        )));
    }
    Ok(u1.basis.tr_mul(&u2.basis).norm_squared())
}

/// A smooth function of a basis, invariant to right rotations.
pub trait GrassmannObjective {
    fn value(&self, u: &DMatrix<f64>) -> f64;
    /// Euclidean gradient with respect to the `d×k` basis.
    fn euclidean_grad(&self, u: &DMatrix<f64>) -> DMatrix<f64>;
}

/// Riemannian gradient `(I − UUᵀ)∇f(U)`.
pub fn riemannian_grad<O: GrassmannObjective + ?Sized>(obj: &O, u: &SubspacePoint) -> TangentVector {
    TangentVector {
        delta: horizontal(&u.basis, &obj.euclidean_grad(&u.basis)),
    }
}

/// `f(U) = −tr(UᵀAU)` for symmetric `A`; minimized by the top-k eigenvectors.
#[derive(Debug, Clone)]
pub struct RayleighObjective {
    pub matrix: DMatrix<f64>,
}

impl RayleighObjective {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        RayleighObjective { matrix }
    }
}

impl GrassmannObjective for RayleighObjective {
    fn value(&self, u: &DMatrix<f64>) -> f64 {
        -frob_inner(u, &(&self.matrix * u))
    }

    fn euclidean_grad(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * u * -2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoConfig {
    pub c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        ArmijoConfig {
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcgConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: ArmijoConfig,
}

impl Default for RcgConfig {
    fn default() -> Self {
        RcgConfig {
            max_iters: 5,
            grad_tol: 1e-6,
            armijo: ArmijoConfig::default(),
        }
    }
}

impl RcgConfig {
    pub fn with_max_iters(max_iters: usize) -> Self {
        RcgConfig {
            max_iters,
            ..RcgConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if self.max_iters == 0
            || !(self.grad_tol > 0.0)
            || !(a.c1 > 0.0 && a.c1 < 1.0)
            || !(a.shrink > 0.0 && a.shrink < 1.0)
            || a.max_backtracks == 0
            || !(a.initial_step > 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid RCG configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub point: SubspacePoint,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective value at the start and after every accepted step.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

/// Riemannian conjugate gradient with Fletcher–Reeves coefficients, Armijo
/// backtracking and QR retraction. The objective value never increases.
pub fn rcg_minimize<O: GrassmannObjective + ?Sized>(
    obj: &O,
    start: &SubspacePoint,
    cfg: &RcgConfig,
) -> Result<RcgOutcome> {
    cfg.validate()?;
    let mut u = start.clone();
    let mut f = checked_value(obj, &u)?;
    let mut g = checked_grad(obj, &u)?;
    let mut g_sq = g.norm_squared();
    let mut dir = -&g;
    let mut history = vec![f];
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    while iterations < cfg.max_iters {
        iterations += 1;
        if g_sq.sqrt() <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut slope = frob_inner(&g, &dir);
        if slope >= 0.0 {
            dir = -&g;
            slope = -g_sq;
        }

        let tangent = TangentVector::from_raw(dir.clone());
        let mut step = cfg.armijo.initial_step;
        let mut accepted = None;
        for _ in 0..=cfg.armijo.max_backtracks {
            if let Ok(candidate) = retract_qr(&u, &tangent, step) {
                let fc = checked_value(obj, &candidate)?;
                if fc <= f + cfg.armijo.c1 * step * slope {
                    accepted = Some((candidate, fc));
                    break;
                }
            }
            step *= cfg.armijo.shrink;
        }
        let Some((next, f_next)) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };

        let g_next = checked_grad(obj, &next)?;
        let g_next_sq = g_next.norm_squared();
        let beta = g_next_sq / g_sq;
        let transported = horizontal(&next.basis, &dir);
        dir = -&g_next + transported * beta;

        u = next;
        f = f_next;
        g = g_next;
        g_sq = g_next_sq;
        history.push(f);
    }

    Ok(RcgOutcome {
        point: u,
        value: f,
        grad_norm: g_sq.sqrt(),
        iterations,
        history,
        stop,
    })
}

fn checked_value<O: GrassmannObjective + ?Sized>(obj: &O, u: &SubspacePoint) -> Result<f64> {
    let v = obj.value(&u.basis);
    if !v.is_finite() {
        return Err(Error::Numerical(format!("objective returned non-finite value {v}")));
    }
    Ok(v)
}

fn checked_grad<O: GrassmannObjective + ?Sized>(obj: &O, u: &SubspacePoint) -> Result<DMatrix<f64>> {
    let e = obj.euclidean_grad(&u.basis);
    if e.shape() != u.basis.shape() {
        return Err(Error::DimensionMismatch(format!(
            "objective gradient has shape {:?}, basis is {:?}",
            e.shape(),
            u.basis.shape()
        )));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("objective returned a non-finite gradient".into()));
    }
    Ok(horizontal(&u.basis, &e))
}

/// Central finite difference of `f` along the retraction curve
/// `h ↦ f(retract(U, ξ, h))`, for gradient checks.
pub fn retraction_directional_fd<O: GrassmannObjective + ?Sized>(
    obj: &O,
    u: &SubspacePoint,
    xi: &TangentVector,
    h: f64,
) -> Result<f64> {
    let plus = retract_qr(u, xi, h)?;
    let minus = retract_qr(u, xi, -h)?;
    Ok((obj.value(&plus.basis) - obj.value(&minus.basis)) / (2.0 * h))
}
