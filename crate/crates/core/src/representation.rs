//! Contrastive subspace representations of sequences: the objective
//! (transport term, distortion and temporal-ordering penalties), the
//! subspace-step objective, the alternating solver and sequence pooling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advgen::NegativeSet;
use crate::data::{column_mean, FeatureSequence};
use crate::error::{Error, Result};
use crate::grassmann::{rcg_minimize, GrassmannObjective, RcgConfig, SubspacePoint};
use crate::linalg::sorted_symmetric_eigen;
use crate::ot::{cost_matrix, ipot, transport_cost, uniform, Coupling, IpotConfig, Metric};

/// Gradient form used in the subspace step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceStep {
    /// `−‖UUᵀX − Yπᵀ‖²_F` plus penalties.
    #[default]
    Surrogate,
    /// `−Σ π_ij c(UUᵀx_i, y_j)` plus penalties.
    ExactTransport,
}

impl std::str::FromStr for SubspaceStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surrogate" => Ok(SubspaceStep::Surrogate),
            "exact" | "exact_transport" => Ok(SubspaceStep::ExactTransport),
            other => Err(Error::InvalidConfig(format!("unknown subspace step {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcotConfig {
    pub k: usize,
    /// Distortion weight β₁.
    pub beta1: f64,
    /// Ordering weight β₂.
    pub beta2: f64,
    /// Temporal margin η.
    pub eta: f64,
    pub metric: Metric,
    pub outer_rounds: usize,
    pub ipot: IpotConfig,
    pub rcg: RcgConfig,
    pub subspace_step: SubspaceStep,
    /// Multiplier on the transport term; 0 drops it entirely.
    pub ot_weight: f64,
}

impl Default for AcotConfig {
    fn default() -> Self {
        AcotConfig {
            k: 1,
            beta1: 1.0,
            beta2: 10.0,
            eta: 0.01,
            metric: Metric::SquaredEuclidean,
            outer_rounds: 3,
            ipot: IpotConfig::default(),
            rcg: RcgConfig::default(),
            subspace_step: SubspaceStep::Surrogate,
            ot_weight: 1.0,
        }
    }
}

impl AcotConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if self.k == 0 {
            return Err(Error::InvalidConfig("subspace dimension k must be at least 1".into()));
        }
        if !nonneg(self.beta1) || !nonneg(self.beta2) || !nonneg(self.eta) || !nonneg(self.ot_weight) {
            return Err(Error::InvalidConfig(format!(
                "beta1, beta2, eta and ot_weight must be nonnegative, got {}, {}, {}, {}",
                self.beta1, self.beta2, self.eta, self.ot_weight
            )));
        }
        if self.outer_rounds == 0 {
            return Err(Error::InvalidConfig("outer_rounds must be at least 1".into()));
        }
        self.ipot.validate()?;
        self.rcg.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcotObjectiveParts {
    pub ot_term: f64,
    /// β₁-weighted mean distortion.
    pub distortion: f64,
    /// β₂-weighted mean ordering hinge.
    pub ordering: f64,
    /// `ot_weight·ot_term − distortion − ordering`.
    pub total: f64,
}

fn check_dims(x: &DMatrix<f64>, u: &SubspacePoint) -> Result<()> {
    if x.nrows() != u.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have dimension {}, subspace lives in R^{}",
            x.nrows(),
            u.ambient_dim()
        )));
    }
    Ok(())
}

/// `‖Uᵀx_t‖²` for every column.
fn projection_energies(x: &DMatrix<f64>, u: &DMatrix<f64>) -> Vec<f64> {
    let proj = u.transpose() * x;
    proj.column_iter().map(|c| c.norm_squared()).collect()
}

fn hinge_terms(energies: &[f64], eta: f64) -> impl Iterator<Item = f64> + '_ {
    energies.windows(2).map(move |w| w[0] + eta - w[1])
}

/// `(1/n) Σ_t ‖UUᵀx_t − x_t‖²`.
pub fn distortion_penalty(x: &FeatureSequence, u: &SubspacePoint) -> Result<f64> {
    check_dims(x.features(), u)?;
    Ok(distortion_raw(x.features(), u.basis()).max(0.0) / x.len() as f64)
}

fn distortion_raw(x: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let total = x.norm_squared();
    let kept: f64 = projection_energies(x, u).iter().sum();
    total - kept
}

/// `(1/(n−1)) Σ_t max(0, ‖Uᵀx_t‖² + η − ‖Uᵀx_{t+1}‖²)`; 0 for a single frame.
pub fn ordering_penalty(x: &FeatureSequence, u: &SubspacePoint, eta: f64) -> Result<f64> {
    check_dims(x.features(), u)?;
    if x.len() < 2 {
        return Ok(0.0);
    }
    let e = projection_energies(x.features(), u.basis());
    Ok(hinge_terms(&e, eta).map(|h| h.max(0.0)).sum::<f64>() / (x.len() - 1) as f64)
}

/// Fraction of consecutive pairs with `‖Uᵀx_t‖² + η ≤ ‖Uᵀx_{t+1}‖²`.
pub fn ordering_satisfaction(x: &FeatureSequence, u: &SubspacePoint, eta: f64) -> Result<f64> {
    check_dims(x.features(), u)?;
    if x.len() < 2 {
        return Ok(1.0);
    }
    let e = projection_energies(x.features(), u.basis());
    let ok = hinge_terms(&e, eta).filter(|h| *h <= 0.0).count();
    Ok(ok as f64 / (x.len() - 1) as f64)
}

/// Evaluates every term of the objective at a fixed coupling.
pub fn acot_objective(
    x: &FeatureSequence,
    y: &NegativeSet,
    u: &SubspacePoint,
    pi: &Coupling,
    cfg: &AcotConfig,
) -> Result<AcotObjectiveParts> {
    check_dims(x.features(), u)?;
    if y.samples().nrows() != x.dim() {
        return Err(Error::DimensionMismatch("negatives and positives differ in dimension".into()));
    }
    if pi.plan().shape() != (x.len(), y.len()) {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {:?}, expected {}x{}",
            pi.plan().shape(),
            x.len(),
            y.len()
        )));
    }
    let projected = u.projector() * x.features();
    let cost = cost_matrix(&projected, y.samples(), cfg.metric)?;
    let ot_term = transport_cost(pi, &cost)?;
    let distortion = cfg.beta1 * distortion_penalty(x, u)?;
    let ordering = cfg.beta2 * ordering_penalty(x, u, cfg.eta)?;
    Ok(AcotObjectiveParts {
        ot_term,
        distortion,
        ordering,
        total: cfg.ot_weight * ot_term - distortion - ordering,
    })
}

/// The subspace-step objective at a fixed coupling, minimized over U.
///
/// `F(U) = −w·T(U) + β₁ Σ_t ‖UUᵀx_t − x_t‖² + β₂ Σ_t [‖Uᵀx_t‖² + η − ‖Uᵀx_{t+1}‖²]₊`
/// with `T(U) = ‖UUᵀX − Yπᵀ‖²_F` (surrogate) or `Σ π_ij c(UUᵀx_i, y_j)`.
pub struct SubspaceObjective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    plan: &'a DMatrix<f64>,
    target: DMatrix<f64>,
    xxt: DMatrix<f64>,
    cfg: AcotConfig,
}

impl<'a> SubspaceObjective<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DMatrix<f64>, plan: &'a DMatrix<f64>, cfg: &AcotConfig) -> Result<Self> {
        if x.nrows() != y.nrows() || plan.shape() != (x.ncols(), y.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "X is {:?}, Y is {:?}, plan is {:?}",
                x.shape(),
                y.shape(),
                plan.shape()
            )));
        }
        Ok(SubspaceObjective {
            x,
            y,
            plan,
            target: y * plan.transpose(),
            xxt: x * x.transpose(),
            cfg: *cfg,
        })
    }

    fn transport_value(&self, u: &DMatrix<f64>) -> f64 {
        let px = u * (u.transpose() * self.x);
        match self.cfg.subspace_step {
            SubspaceStep::Surrogate => (px - &self.target).norm_squared(),
            SubspaceStep::ExactTransport => {
                let mut total = 0.0;
                for i in 0..self.x.ncols() {
                    for j in 0..self.y.ncols() {
                        let sq = (px.column(i) - self.y.column(j)).norm_squared();
                        let c = match self.cfg.metric {
                            Metric::SquaredEuclidean => sq,
                            Metric::Euclidean => sq.sqrt(),
                        };
                        total += self.plan[(i, j)] * c;
                    }
                }
                total
            }
        }
    }

    fn transport_grad(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let px = u * (u.transpose() * self.x);
        // m = Σ_i r̃_i x_iᵀ, gradient (m + mᵀ)U
        let m = match self.cfg.subspace_step {
            SubspaceStep::Surrogate => (px - &self.target) * self.x.transpose() * 2.0,
            SubspaceStep::ExactTransport => {
                let mut weighted = DMatrix::zeros(self.x.nrows(), self.x.ncols());
                for i in 0..self.x.ncols() {
                    for j in 0..self.y.ncols() {
                        let r = px.column(i) - self.y.column(j);
                        let scale = match self.cfg.metric {
                            Metric::SquaredEuclidean => 2.0,
                            Metric::Euclidean => {
                                let n = r.norm();
                                if n > 1e-12 {
                                    1.0 / n
                                } else {
                                    0.0
                                }
                            }
                        };
                        let mut col = weighted.column_mut(i);
                        col += r * (self.plan[(i, j)] * scale);
                    }
                }
                weighted * self.x.transpose()
            }
        };
        (&m + m.transpose()) * u
    }

    /// Smallest `|hinge pre-activation|`, for excluding kinks in gradient checks.
    pub fn min_abs_hinge(&self, u: &DMatrix<f64>) -> f64 {
        let e = projection_energies(self.x, u);
        hinge_terms(&e, self.cfg.eta).fold(f64::INFINITY, |m, h| m.min(h.abs()))
    }
}

impl GrassmannObjective for SubspaceObjective<'_> {
    fn value(&self, u: &DMatrix<f64>) -> f64 {
        let mut f = 0.0;
        if self.cfg.ot_weight != 0.0 {
            f -= self.cfg.ot_weight * self.transport_value(u);
        }
        f += self.cfg.beta1 * distortion_raw(self.x, u);
        if self.cfg.beta2 != 0.0 {
            let e = projection_energies(self.x, u);
            f += self.cfg.beta2 * hinge_terms(&e, self.cfg.eta).map(|h| h.max(0.0)).sum::<f64>();
        }
        f
    }

    fn euclidean_grad(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(u.nrows(), u.ncols());
        if self.cfg.ot_weight != 0.0 {
            g -= self.transport_grad(u) * self.cfg.ot_weight;
        }
        g -= &self.xxt * u * (2.0 * self.cfg.beta1);
        if self.cfg.beta2 != 0.0 {
            let e = projection_energies(self.x, u);
            let n = self.x.ncols();
            // Σ_t active (x_t x_tᵀ − x_{t+1} x_{t+1}ᵀ) as per-frame weights
            let mut w = vec![0.0; n];
            for (t, h) in hinge_terms(&e, self.cfg.eta).enumerate() {
                if h > 0.0 {
                    w[t] += 1.0;
                    w[t + 1] -= 1.0;
                }
            }
            if w.iter().any(|v| *v != 0.0) {
                let xw = DMatrix::from_fn(self.x.nrows(), n, |r, c| self.x[(r, c)] * w[c]);
                g += xw * (self.x.transpose() * u) * (2.0 * self.cfg.beta2);
            }
        }
        g
    }
}

/// Top-k eigenvectors of `XXᵀ`, i.e. the leading left singular vectors of X.
pub fn svd_init(x: &DMatrix<f64>, k: usize) -> Result<SubspacePoint> {
    if k == 0 || k > x.nrows() {
        return Err(Error::InvalidConfig(format!("k = {k} outside 1..={}", x.nrows())));
    }
    let (_, vecs) = sorted_symmetric_eigen(&(x * x.transpose()));
    SubspacePoint::from_span(&vecs.columns(0, k).into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    /// Objective at the new coupling and the previous subspace.
    pub after_coupling: AcotObjectiveParts,
    /// Objective at the new coupling and the new subspace.
    pub after_subspace: AcotObjectiveParts,
    pub step_value_before: f64,
    pub step_value_after: f64,
    pub rcg_iterations: usize,
    pub ordering_satisfied: f64,
}

#[derive(Debug, Clone)]
pub struct AcotOutcome {
    pub subspace: SubspacePoint,
    pub coupling: Coupling,
    pub trace: Vec<RoundTrace>,
}

/// Alternates an IPOT coupling step on `cost(UUᵀX, Y)` with a Riemannian
/// conjugate-gradient subspace step, starting from [`svd_init`].
pub fn learn_representation(x: &FeatureSequence, y: &NegativeSet, cfg: &AcotConfig) -> Result<AcotOutcome> {
    cfg.validate()?;
    if cfg.k > x.dim() {
        return Err(Error::InvalidConfig(format!("k = {} exceeds feature dimension {}", cfg.k, x.dim())));
    }
    if y.samples().nrows() != x.dim() {
        return Err(Error::DimensionMismatch("negatives and positives differ in dimension".into()));
    }
    let mu = uniform(x.len());
    let nu = uniform(y.len());
    let mut u = svd_init(x.features(), cfg.k)?;
    let mut coupling = Coupling::product(mu.clone(), nu.clone());
    let mut trace = Vec::with_capacity(cfg.outer_rounds);

    for round in 1..=cfg.outer_rounds {
        let projected = u.projector() * x.features();
        let cost = cost_matrix(&projected, y.samples(), cfg.metric)?;
        coupling = ipot(&cost, &mu, &nu, &cfg.ipot)?;
        let after_coupling = acot_objective(x, y, &u, &coupling, cfg)?;

        let obj = SubspaceObjective::new(x.features(), y.samples(), coupling.plan(), cfg)?;
        let step = rcg_minimize(&obj, &u, &cfg.rcg)?;
        u = step.point;
        let after_subspace = acot_objective(x, y, &u, &coupling, cfg)?;
        trace.push(RoundTrace {
            round,
            after_coupling,
            after_subspace,
            step_value_before: step.history[0],
            step_value_after: step.value,
            rcg_iterations: step.iterations,
            ordering_satisfied: ordering_satisfaction(x, &u, cfg.eta)?,
        });
    }
    Ok(AcotOutcome {
        subspace: u,
        coupling,
        trace,
    })
}

/// [`learn_representation`] for every sequence in parallel; results keep
/// input order.
pub fn learn_representations(
    sequences: &[FeatureSequence],
    negatives: &[NegativeSet],
    cfg: &AcotConfig,
) -> Result<Vec<AcotOutcome>> {
    if sequences.len() != negatives.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sequences but {} negative sets",
            sequences.len(),
            negatives.len()
        )));
    }
    sequences
        .par_iter()
        .zip(negatives.par_iter())
        .map(|(x, y)| learn_representation(x, y, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Subspace,
    AvgpoolProjected,
    AvgpoolRaw,
}

impl std::str::FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subspace" => Ok(PoolMode::Subspace),
            "avgpool_projected" => Ok(PoolMode::AvgpoolProjected),
            "avgpool_raw" => Ok(PoolMode::AvgpoolRaw),
            other => Err(Error::InvalidConfig(format!("unknown pooling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pooled {
    Subspace(SubspacePoint),
    Vector(DVector<f64>),
}

pub fn pool_sequence(x: &FeatureSequence, u: &SubspacePoint, mode: PoolMode) -> Result<Pooled> {
    check_dims(x.features(), u)?;
    Ok(match mode {
        PoolMode::Subspace => Pooled::Subspace(u.clone()),
        PoolMode::AvgpoolProjected => Pooled::Vector(column_mean(&(u.projector() * x.features()))),
        PoolMode::AvgpoolRaw => Pooled::Vector(column_mean(x.features())),
    })
}
