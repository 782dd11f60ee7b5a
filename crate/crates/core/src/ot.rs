//! Discrete optimal transport: ground-cost matrices, the inexact proximal
//! point (IPOT) solver, an exhaustive permutation oracle for small uniform
//! problems, and transport-cost evaluation.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground metric between columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖a − b‖`, the W₁ ground cost.
    Euclidean,
    /// `‖a − b‖²`, the W₂² ground cost.
    #[default]
    SquaredEuclidean,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "w1" => Ok(Metric::Euclidean),
            "squared_euclidean" | "sqeuclidean" | "w2" => Ok(Metric::SquaredEuclidean),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: DMatrix<f64>,
    metric: Metric,
}

impl CostMatrix {
    /// Wraps a raw matrix; entries must be finite and nonnegative.
    pub fn from_raw(costs: DMatrix<f64>, metric: Metric) -> Result<Self> {
        if let Some(v) = costs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cost entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(CostMatrix { costs, metric })
    }

    pub fn costs(&self) -> &DMatrix<f64> {
        &self.costs
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn shape(&self) -> (usize, usize) {
        self.costs.shape()
    }
}

/// `costs[i][j] = c(A[:,i], B[:,j])`.
pub fn cost_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, metric: Metric) -> Result<CostMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix between {}-dim and {}-dim columns",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cost matrix inputs must be finite".into()));
    }
    let costs = DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        let sq = a.column(i).metric_distance(&b.column(j)).powi(2);
        match metric {
            Metric::Euclidean => sq.sqrt(),
            Metric::SquaredEuclidean => sq,
        }
    });
    Ok(CostMatrix { costs, metric })
}

/// A transport plan together with the marginals it was solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    plan: DMatrix<f64>,
    row_marginal: DVector<f64>,
    col_marginal: DVector<f64>,
}

impl Coupling {
    pub fn new(plan: DMatrix<f64>, row_marginal: DVector<f64>, col_marginal: DVector<f64>) -> Result<Self> {
        if plan.nrows() != row_marginal.len() || plan.ncols() != col_marginal.len() {
            return Err(Error::DimensionMismatch(format!(
                "plan {:?} vs marginals ({}, {})",
                plan.shape(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        Ok(Coupling {
            plan,
            row_marginal,
            col_marginal,
        })
    }

    /// The independent coupling `μνᵀ`.
    pub fn product(row_marginal: DVector<f64>, col_marginal: DVector<f64>) -> Self {
        let plan = &row_marginal * col_marginal.transpose();
        Coupling {
            plan,
            row_marginal,
            col_marginal,
        }
    }

    pub fn plan(&self) -> &DMatrix<f64> {
        &self.plan
    }

    pub fn row_marginal(&self) -> &DVector<f64> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &DVector<f64> {
        &self.col_marginal
    }

    /// `max(|rowsum − μ|_∞, |colsum − ν|_∞)`.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.plan.column_sum() - &self.row_marginal;
        let cols = self.plan.row_sum().transpose() - &self.col_marginal;
        rows.amax().max(cols.amax())
    }

    pub fn transpose(&self) -> Coupling {
        Coupling {
            plan: self.plan.transpose(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
        }
    }
}

pub fn uniform(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpotConfig {
    /// Proximal weight β in `G = exp(−C/β)`.
    pub proximal_weight: f64,
    pub outer_iters: usize,
    pub inner_sinkhorn_iters: usize,
    pub tol_marginal: f64,
}

impl Default for IpotConfig {
    fn default() -> Self {
        IpotConfig {
            proximal_weight: 1.0,
            outer_iters: 1000,
            inner_sinkhorn_iters: 1,
            tol_marginal: 1e-6,
        }
    }
}

impl IpotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.proximal_weight > 0.0 && self.proximal_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "proximal weight must be positive, got {}",
                self.proximal_weight
            )));
        }
        if self.outer_iters == 0 || self.inner_sinkhorn_iters == 0 {
            return Err(Error::InvalidConfig("IPOT iteration counts must be positive".into()));
        }
        if !(self.tol_marginal > 0.0) {
            return Err(Error::InvalidConfig("marginal tolerance must be positive".into()));
        }
        Ok(())
    }
}

const PROBABILITY_TOL: f64 = 1e-12;
const UNDERFLOW_GUARD: f64 = 1e-300;
/// Cap on the extra scaling rounds used to bring the final proximal step's
/// marginals inside tolerance.
const MAX_POLISH_ROUNDS: usize = 100_000;

fn check_probability(v: &DVector<f64>, name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{name} marginal is empty")));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput(format!("{name} marginal has negative or non-finite mass")));
    }
    let total = v.sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidInput(format!("{name} marginal sums to {total}, expected 1")));
    }
    Ok(())
}

/// Solves `min ⟨π, C⟩` over couplings with marginals `μ`, `ν` by inexact
/// proximal point iterations under the KL divergence.
///
/// Each outer step multiplies the current plan by `G = exp(−C/β)` and runs
/// `inner_sinkhorn_iters` Sinkhorn scaling rounds against the marginals.
/// After the outer loop the last proximal step is completed with further
/// scaling rounds until both marginals hold to `tol_marginal`.
pub fn ipot(cost: &CostMatrix, mu: &DVector<f64>, nu: &DVector<f64>, cfg: &IpotConfig) -> Result<Coupling> {
    ipot_with_trace(cost, mu, nu, cfg, &mut |_, _| {})
}

/// [`ipot`] with a callback receiving `(outer_iteration, current_plan)` after
/// every outer step (1-based).
pub fn ipot_with_trace(
    cost: &CostMatrix,
    mu: &DVector<f64>,
    nu: &DVector<f64>,
    cfg: &IpotConfig,
    observer: &mut dyn FnMut(usize, &DMatrix<f64>),
) -> Result<Coupling> {
    cfg.validate()?;
    check_probability(mu, "row")?;
    check_probability(nu, "column")?;
    let c = cost.costs();
    let (n, m) = c.shape();
    if n != mu.len() || m != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "cost {:?} vs marginals ({}, {})",
            c.shape(),
            mu.len(),
            nu.len()
        )));
    }

    let kernel = c.map(|v| (-v / cfg.proximal_weight).exp());
    let mut plan = mu * nu.transpose();
    let mut a = DVector::from_element(n, 1.0);
    let mut b = DVector::from_element(m, 1.0);
    let mut q = plan.clone();

    for iter in 1..=cfg.outer_iters {
        q = kernel.component_mul(&plan);
        for _ in 0..cfg.inner_sinkhorn_iters {
            scale_round(&q, mu, nu, &mut a, &mut b)?;
        }
        plan = scaled_plan(&q, &a, &b);
        observer(iter, &plan);
    }

    let mut coupling = Coupling::new(plan, mu.clone(), nu.clone())?;
    let mut rounds = 0;
    while coupling.marginal_violation() > cfg.tol_marginal {
        if rounds >= MAX_POLISH_ROUNDS {
            return Err(Error::Numerical(format!(
                "IPOT marginals did not reach tolerance {} (violation {})",
                cfg.tol_marginal,
                coupling.marginal_violation()
            )));
        }
        scale_round(&q, mu, nu, &mut a, &mut b)?;
        coupling.plan = scaled_plan(&q, &a, &b);
        rounds += 1;
    }
    if coupling.plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("IPOT produced a non-finite plan".into()));
    }
    Ok(coupling)
}

fn scale_round(
    q: &DMatrix<f64>,
    mu: &DVector<f64>,
    nu: &DVector<f64>,
    a: &mut DVector<f64>,
    b: &mut DVector<f64>,
) -> Result<()> {
    let qta = q.tr_mul(a);
    for j in 0..b.len() {
        if !(qta[j] >= UNDERFLOW_GUARD) {
            return Err(scaling_failure("column", qta[j]));
        }
        b[j] = nu[j] / qta[j];
    }
    let qb = q * &*b;
    for i in 0..a.len() {
        if !(qb[i] >= UNDERFLOW_GUARD) {
            return Err(scaling_failure("row", qb[i]));
        }
        a[i] = mu[i] / qb[i];
    }
    Ok(())
}

fn scaling_failure(side: &str, denom: f64) -> Error {
    Error::Numerical(format!(
        "IPOT {side} scaling denominator {denom:e} underflowed; the proximal weight is too small for the cost scale"
    ))
}

fn scaled_plan(q: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| a[i] * q[(i, j)] * b[j])
}

/// Largest problem size accepted by [`exact_ot_uniform`].
pub const EXACT_OT_MAX_N: usize = 8;

/// Exhaustive minimum over all `n!` permutation couplings of a square
/// uniform problem. Birkhoff's theorem makes this the exact optimum.
pub fn exact_ot_uniform(cost: &CostMatrix) -> Result<(Coupling, f64)> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(Error::DimensionMismatch(format!("exact OT needs a square cost, got {n}×{m}")));
    }
    if n == 0 || n > EXACT_OT_MAX_N {
        return Err(Error::InvalidInput(format!(
            "exact OT supports 1 ≤ n ≤ {EXACT_OT_MAX_N}, got {n}"
        )));
    }
    let c = cost.costs();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((perm, total));
        }
    }
    let (perm, total) = best.expect("at least one permutation");
    let w = 1.0 / n as f64;
    let mut plan = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        plan[(i, j)] = w;
    }
    Ok((Coupling::new(plan, uniform(n), uniform(n))?, total * w))
}

/// `Σ_ij π_ij C_ij`.
pub fn transport_cost(coupling: &Coupling, cost: &CostMatrix) -> Result<f64> {
    if coupling.plan().shape() != cost.shape() {
        return Err(Error::DimensionMismatch(format!(
            "plan {:?} vs cost {:?}",
            coupling.plan().shape(),
            cost.shape()
        )));
    }
    Ok(crate::linalg::frob_inner(coupling.plan(), cost.costs()))
}
