//! Sequence classification on learned representations: the Grassmann RBF
//! kernel, kernel k-NN on subspaces, multinomial logistic regression on
//! pooled vectors, and pipeline evaluation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advgen::mlp::softmax;
use crate::error::{Error, Result};
use crate::grassmann::SubspacePoint;
use crate::representation::{PoolMode, Pooled};

/// `exp(γ‖U₁ᵀU₂‖²_F)`.
pub fn grassmann_kernel(u1: &SubspacePoint, u2: &SubspacePoint, gamma: f64) -> Result<f64> {
    if u1.ambient_dim() != u2.ambient_dim() || u1.rank() != u2.rank() {
        return Err(Error::DimensionMismatch(format!(
            "kernel between G({}, {}) and G({}, {})",
            u1.ambient_dim(),
            u1.rank(),
            u2.ambient_dim(),
            u2.rank()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("kernel bandwidth must be positive, got {gamma}")));
    }
    Ok((gamma * (u1.basis().transpose() * u2.basis()).norm_squared()).exp())
}

/// Bandwidth used when none is given: keeps `exp(γk)` near `e^0.2`.
pub fn default_gamma(k: usize) -> f64 {
    0.2 / k as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    gamma: f64,
}

impl KernelMatrix {
    pub fn new(points: &[SubspacePoint], gamma: f64) -> Result<Self> {
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| grassmann_kernel(&points[i], &points[j], gamma)).collect())
            .collect::<Result<_>>()?;
        let mut values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        values = (&values + values.transpose()) * 0.5;
        Ok(KernelMatrix { values, gamma })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn majority(labels: impl Iterator<Item = usize>) -> usize {
    let mut counts: Vec<usize> = Vec::new();
    for l in labels {
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    // first maximum wins, i.e. the smallest label among ties
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |(bl, bc), (l, &c)| if c > bc { (l, c) } else { (bl, bc) })
        .0
}

/// Majority label among the `k_nn` training subspaces with the largest
/// kernel value to the query. Vote ties go to the smallest label.
pub fn kernel_knn_classify(
    train: &[(SubspacePoint, usize)],
    query: &SubspacePoint,
    gamma: f64,
    k_nn: usize,
) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::InvalidInput("kernel k-NN needs a nonempty training set".into()));
    }
    if k_nn == 0 {
        return Err(Error::InvalidConfig("k_nn must be at least 1".into()));
    }
    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .map(|(u, l)| grassmann_kernel(u, query, gamma).map(|k| (k, *l)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(majority(scored.iter().take(k_nn).map(|(_, l)| *l)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            lr: 0.5,
            max_iters: 5000,
            tol: 1e-6,
            l2: 1e-3,
        }
    }
}

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `classes × (d + 1)`, last column is the bias.
    pub weights: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
    pub iterations: usize,
}

impl LinearModel {
    /// Full-batch gradient descent from zero weights.
    pub fn train(vectors: &[(DVector<f64>, usize)], num_classes: usize, cfg: &LogisticConfig) -> Result<Self> {
        let Some((first, _)) = vectors.first() else {
            return Err(Error::InvalidInput("logistic regression needs at least one sample".into()));
        };
        let d = first.len();
        if vectors.iter().any(|(v, l)| v.len() != d || *l >= num_classes) {
            return Err(Error::DimensionMismatch("inconsistent feature length or label".into()));
        }
        let n = vectors.len() as f64;
        let mean = vectors.iter().fold(DVector::zeros(d), |acc, (v, _)| acc + v) / n;
        let var = vectors
            .iter()
            .fold(DVector::zeros(d), |acc, (v, _)| acc + (v - &mean).map(|x| x * x))
            / n;
        let scale = var.map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });

        let design = DMatrix::from_fn(d + 1, vectors.len(), |r, c| {
            if r == d {
                1.0
            } else {
                (vectors[c].0[r] - mean[r]) / scale[r]
            }
        });
        let mut targets = DMatrix::zeros(num_classes, vectors.len());
        for (c, (_, l)) in vectors.iter().enumerate() {
            targets[(*l, c)] = 1.0;
        }
        let mut w = DMatrix::zeros(num_classes, d + 1);
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            iterations += 1;
            let mut probs = &w * &design;
            for mut col in probs.column_iter_mut() {
                let p = softmax(&col.clone_owned());
                col.copy_from(&p);
            }
            let mut grad = (probs - &targets) * design.transpose() / n;
            let mut reg = w.clone() * cfg.l2;
            reg.column_mut(d).fill(0.0);
            grad += reg;
            if grad.norm() < cfg.tol {
                break;
            }
            w -= grad * cfg.lr;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("logistic regression diverged".into()));
        }
        Ok(LinearModel {
            weights: w,
            mean,
            scale,
            iterations,
        })
    }

    pub fn scores(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.mean.len();
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!("model expects {d} features, got {}", v.len())));
        }
        let mut x = DVector::from_element(d + 1, 1.0);
        for i in 0..d {
            x[i] = (v[i] - self.mean[i]) / self.scale[i];
        }
        Ok(&self.weights * x)
    }

    /// Highest-scoring class; ties go to the smallest label.
    pub fn predict(&self, v: &DVector<f64>) -> Result<usize> {
        let s = self.scores(v)?;
        Ok(s.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
            .0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Mean raw frame, logistic regression.
    AvgpoolRaw,
    /// Learned subspace, Grassmann-kernel k-NN.
    AcotSubspaceKnn,
    /// Mean projected frame, logistic regression.
    AcotAvgpoolLinear,
}

impl Pipeline {
    pub fn pool_mode(self) -> PoolMode {
        match self {
            Pipeline::AvgpoolRaw => PoolMode::AvgpoolRaw,
            Pipeline::AcotSubspaceKnn => PoolMode::Subspace,
            Pipeline::AcotAvgpoolLinear => PoolMode::AvgpoolProjected,
        }
    }

    pub fn needs_subspaces(self) -> bool {
        self != Pipeline::AvgpoolRaw
    }

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::AvgpoolRaw => "avgpool_raw",
            Pipeline::AcotSubspaceKnn => "acot_subspace_knn",
            Pipeline::AcotAvgpoolLinear => "acot_avgpool_linear",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avgpool_raw" => Ok(Pipeline::AvgpoolRaw),
            "acot_subspace_knn" => Ok(Pipeline::AcotSubspaceKnn),
            "acot_avgpool_linear" => Ok(Pipeline::AcotAvgpoolLinear),
            other => Err(Error::InvalidConfig(format!("unknown pipeline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub pipeline: Pipeline,
    /// Kernel bandwidth; `None` uses [`default_gamma`].
    pub gamma: Option<f64>,
    pub knn: usize,
    pub logistic: LogisticConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            pipeline: Pipeline::AcotAvgpoolLinear,
            gamma: None,
            knn: 1,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub pipeline: Pipeline,
    pub accuracy: f64,
    /// `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub predictions: Vec<usize>,
}

/// Trains the configured classifier on pooled training representations and
/// scores it on the test representations.
pub fn evaluate(
    cfg: &ClassifyConfig,
    train: &[(Pooled, usize)],
    test: &[(Pooled, usize)],
    num_classes: usize,
) -> Result<Evaluation> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput("train and test sets must be nonempty".into()));
    }
    if train.iter().chain(test).any(|(_, l)| *l >= num_classes) {
        return Err(Error::InvalidInput(format!("label outside 0..{num_classes}")));
    }
    let predictions = match cfg.pipeline {
        Pipeline::AcotSubspaceKnn => {
            let subspaces = |set: &[(Pooled, usize)]| -> Result<Vec<(SubspacePoint, usize)>> {
                set.iter()
                    .map(|(p, l)| match p {
                        Pooled::Subspace(u) => Ok((u.clone(), *l)),
                        Pooled::Vector(_) => Err(Error::InvalidInput("pipeline expects subspaces".into())),
                    })
                    .collect()
            };
            let train = subspaces(train)?;
            let test = subspaces(test)?;
            let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(train[0].0.rank()));
            test.iter()
                .map(|(u, _)| kernel_knn_classify(&train, u, gamma, cfg.knn))
                .collect::<Result<Vec<_>>>()?
        }
        Pipeline::AvgpoolRaw | Pipeline::AcotAvgpoolLinear => {
            let vectors = |set: &[(Pooled, usize)]| -> Result<Vec<(DVector<f64>, usize)>> {
                set.iter()
                    .map(|(p, l)| match p {
                        Pooled::Vector(v) => Ok((v.clone(), *l)),
                        Pooled::Subspace(_) => Err(Error::InvalidInput("pipeline expects pooled vectors".into())),
                    })
                    .collect()
            };
            let train = vectors(train)?;
            let model = LinearModel::train(&train, num_classes, &cfg.logistic)?;
            vectors(test)?
                .iter()
                .map(|(v, _)| model.predict(v))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for ((_, l), p) in test.iter().zip(&predictions) {
        totals[*l] += 1;
        hits[*l] += usize::from(p == l);
    }
    let correct: usize = hits.iter().sum();
    Ok(Evaluation {
        pipeline: cfg.pipeline,
        accuracy: correct as f64 / test.len() as f64,
        per_class_accuracy: hits
            .iter()
            .zip(&totals)
            .map(|(h, t)| (*t > 0).then(|| *h as f64 / *t as f64))
            .collect(),
        predictions,
    })
}
