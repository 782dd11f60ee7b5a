//! Experiment orchestration behind the `acot` binary: flat key=value
//! settings, one entry point per subcommand, and the ablation grid.
//!
//! Every command is a pure function of its settings and seed. Work items run
//! on the rayon pool; all files are written afterwards from the calling
//! thread in item order.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::advgen::{
    fooling_rates, make_negatives, random_negatives, train_classifier, train_wgan, ClassifierConfig, GanConfig,
    MlpParams, NegativeSet,
};
use crate::classify::{evaluate, ClassifyConfig, Evaluation, Pipeline};
use crate::data::{
    column_mean, load_dataset, make_synthetic, read_json, read_matrix_csv, save_dataset, write_json,
    write_matrix_csv, Dataset, RngSeed, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::grassmann::SubspacePoint;
use crate::ot::Metric;
use crate::representation::{
    acot_objective, learn_representations, ordering_satisfaction, pool_sequence, AcotConfig, AcotObjectiveParts,
    Pooled, RoundTrace, SubspaceStep,
};
use crate::srot::{estimate_bounds, random_instance, BoundsConfig, BoundsReport, DEFAULT_RESTARTS};

// ---------------------------------------------------------------------------
// Settings

/// Every key accepted in a config file or on the command line.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    // data
    "dim",
    "signal_dim",
    "classes",
    "sequences_per_class",
    "frames",
    "snr",
    "noise_scale",
    "distractors",
    "distractor_scale",
    "jitter",
    "frame_noise_support",
    "frame_noise_spread",
    "test_fraction",
    "data",
    "train",
    "test",
    "train_repr",
    "test_repr",
    // advgen
    "sigma",
    "lambda1",
    "lambda2",
    "lr",
    "critic_steps",
    "clip",
    "iters",
    "batch",
    "eval_every",
    "classifier_iters",
    "classifier_lr",
    "generator",
    // representation
    "k",
    "beta1",
    "beta2",
    "eta",
    "metric",
    "outer_rounds",
    "rcg_iters",
    "ipot_iters",
    "ot_weight",
    "exact_ot_grad",
    "negatives",
    "negatives_per_positive",
    "dump_coupling",
    // classify
    "pipeline",
    "gamma",
    "knn",
    // bounds
    "instances",
    "restarts",
    "full_rank",
    // ablation
    "random_trials",
    "k_sweep",
    "beta1_sweep",
    "beta2_sweep",
    "negatives_sweep",
    "sigma_sweep",
];

/// Flat `key=value` configuration. Keys are stored with `-` folded to `_`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut s = Settings::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, format!("line {}: expected key=value, got {raw:?}", i + 1)))?;
            s.set(key, value.trim());
        }
        s.check_known()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Settings::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value.to_string());
        self
    }

    /// Copies every entry of `other` over this one.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn check_known(&self) -> Result<()> {
        match self.values.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidConfig(format!("unknown setting {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::InvalidConfig(format!("setting {key}={v:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| Error::InvalidConfig(format!("setting {key}={v:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        self.raw(key)
            .map(PathBuf::from)
            .ok_or_else(|| Error::InvalidConfig(format!("missing required setting {key}")))
    }

    pub fn seed(&self) -> Result<RngSeed> {
        Ok(RngSeed(self.get_or("seed", 0u64)?))
    }
}

// ---------------------------------------------------------------------------
// Typed configuration from settings

pub fn synthetic_config(s: &Settings) -> Result<SyntheticConfig> {
    let d = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        dim: s.get_or("dim", d.dim)?,
        signal_dim: s.get_or("signal_dim", d.signal_dim)?,
        num_classes: s.get_or("classes", d.num_classes)?,
        sequences_per_class: s.get_or("sequences_per_class", d.sequences_per_class)?,
        frames: s.get_or("frames", d.frames)?,
        snr: s.get_or("snr", d.snr)?,
        noise_scale: s.get_or("noise_scale", d.noise_scale)?,
        distractors: s.get_or("distractors", d.distractors)?,
        distractor_scale: s.get_or("distractor_scale", d.distractor_scale)?,
        jitter: s.get_or("jitter", d.jitter)?,
        frame_noise_support: s.get_or("frame_noise_support", d.frame_noise_support)?,
        frame_noise_spread: s.get_or("frame_noise_spread", d.frame_noise_spread)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn classifier_config(s: &Settings) -> Result<ClassifierConfig> {
    let d = ClassifierConfig::default();
    let cfg = ClassifierConfig {
        iters: s.get_or("classifier_iters", d.iters)?,
        lr: s.get_or("classifier_lr", d.lr)?,
        ..d
    };
    if cfg.iters == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid classifier configuration {cfg:?}")));
    }
    Ok(cfg)
}

pub fn gan_config(s: &Settings) -> Result<GanConfig> {
    let d = GanConfig::default();
    let cfg = GanConfig {
        sigma: s.get_or("sigma", d.sigma)?,
        lambda1: s.get_or("lambda1", d.lambda1)?,
        lambda2: s.get_or("lambda2", d.lambda2)?,
        lr: s.get_or("lr", d.lr)?,
        critic_steps: s.get_or("critic_steps", d.critic_steps)?,
        clip: s.get_or("clip", d.clip)?,
        iters: s.get_or("iters", d.iters)?,
        batch: s.get_or("batch", d.batch)?,
        eval_every: s.get_or("eval_every", d.eval_every)?,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn acot_config(s: &Settings) -> Result<AcotConfig> {
    let d = AcotConfig::default();
    let mut cfg = AcotConfig {
        k: s.get_or("k", d.k)?,
        beta1: s.get_or("beta1", d.beta1)?,
        beta2: s.get_or("beta2", d.beta2)?,
        eta: s.get_or("eta", d.eta)?,
        metric: s.get_or::<Metric>("metric", d.metric)?,
        outer_rounds: s.get_or("outer_rounds", d.outer_rounds)?,
        ot_weight: s.get_or("ot_weight", d.ot_weight)?,
        ..d
    };
    cfg.rcg.max_iters = s.get_or("rcg_iters", d.rcg.max_iters)?;
    cfg.ipot.outer_iters = s.get_or("ipot_iters", d.ipot.outer_iters)?;
    if s.get_or("exact_ot_grad", false)? {
        cfg.subspace_step = SubspaceStep::ExactTransport;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn classify_config(s: &Settings) -> Result<ClassifyConfig> {
    let d = ClassifyConfig::default();
    let cfg = ClassifyConfig {
        pipeline: s.get_or::<Pipeline>("pipeline", d.pipeline)?,
        gamma: s.get("gamma")?,
        knn: s.get_or("knn", d.knn)?,
        ..d
    };
    if cfg.knn == 0 || cfg.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidConfig(format!("invalid classifier settings {cfg:?}")));
    }
    Ok(cfg)
}

/// Where the negatives of each sequence come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeKind {
    Adversarial,
    Random,
}

impl FromStr for NegativeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" | "gan" => Ok(NegativeKind::Adversarial),
            "random" => Ok(NegativeKind::Random),
            other => Err(Error::InvalidConfig(format!("unknown negative source {other:?}"))),
        }
    }
}

fn negatives_per_positive(s: &Settings) -> Result<usize> {
    let m = s.get_or("negatives_per_positive", 2usize)?;
    if m == 0 {
        return Err(Error::InvalidConfig("negatives_per_positive must be at least 1".into()));
    }
    Ok(m)
}

fn test_fraction(s: &Settings) -> Result<f64> {
    s.get_or("test_fraction", 1.0 / 3.0)
}

// ---------------------------------------------------------------------------
// Shared helpers

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::parse(path, e))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Negatives for every sequence, `m_per_positive · n` each. Sequence `i`
/// draws from `seed.child(i)`.
pub fn negatives_for(
    ds: &Dataset,
    kind: NegativeKind,
    generator: Option<&MlpParams>,
    sigma: f64,
    m_per_positive: usize,
    seed: RngSeed,
) -> Result<Vec<NegativeSet>> {
    ds.sequences()
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let m = m_per_positive * x.len();
            let s = seed.child(i as u64);
            match (kind, generator) {
                (NegativeKind::Random, _) => random_negatives(x, m, s),
                (NegativeKind::Adversarial, Some(g)) => make_negatives(g, x, m, sigma, s),
                (NegativeKind::Adversarial, None) => {
                    Err(Error::InvalidConfig("adversarial negatives need a trained generator".into()))
                }
            }
        })
        .collect()
}

/// Pooled representation of every sequence for `pipeline`.
pub fn pool_dataset(ds: &Dataset, subspaces: Option<&[SubspacePoint]>, pipeline: Pipeline) -> Result<Vec<(Pooled, usize)>> {
    if !pipeline.needs_subspaces() {
        return Ok(ds
            .sequences()
            .iter()
            .map(|s| (Pooled::Vector(column_mean(s.features())), s.label()))
            .collect());
    }
    let subspaces = subspaces.ok_or_else(|| {
        Error::InvalidConfig(format!("pipeline {} needs learned subspaces", pipeline.name()))
    })?;
    if subspaces.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} subspaces for {} sequences",
            subspaces.len(),
            ds.len()
        )));
    }
    ds.sequences()
        .iter()
        .zip(subspaces)
        .map(|(s, u)| Ok((pool_sequence(s, u, pipeline.pool_mode())?, s.label())))
        .collect()
}

fn learned_subspaces(ds: &Dataset, negs: &[NegativeSet], cfg: &AcotConfig) -> Result<Vec<SubspacePoint>> {
    Ok(learn_representations(ds.sequences(), negs, cfg)?
        .into_iter()
        .map(|o| o.subspace)
        .collect())
}

// ---------------------------------------------------------------------------
// gen-data

#[derive(Debug, Clone, Serialize)]
pub struct GenDataReport {
    pub seed: u64,
    pub config: SyntheticConfig,
    pub test_fraction: f64,
    pub train_sequences: usize,
    pub test_sequences: usize,
}

/// Synthetic dataset split into `out/train` and `out/test`.
pub fn gen_data(s: &Settings, out: &Path) -> Result<GenDataReport> {
    let cfg = synthetic_config(s)?;
    let seed = s.seed()?;
    let fraction = test_fraction(s)?;
    let ds = make_synthetic(&cfg, seed)?;
    let (train, test) = ds.split(fraction, seed.child(1))?;
    create_dir(out)?;
    save_dataset(&train, out.join("train"))?;
    save_dataset(&test, out.join("test"))?;
    let report = GenDataReport {
        seed: seed.0,
        config: cfg,
        test_fraction: fraction,
        train_sequences: train.len(),
        test_sequences: test.len(),
    };
    write_json(out.join("gen_data.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// train-gan

#[derive(Debug, Clone, Serialize)]
pub struct TrainGanReport {
    pub seed: u64,
    pub classifier: ClassifierConfig,
    pub gan: GanConfig,
    pub classifier_train_accuracy: f64,
    pub final_loose_fooling: f64,
    pub final_strict_fooling: f64,
    pub final_mean_perturbation_sq: f64,
}

/// Frame classifier plus WGAN generator on the dataset at `data`.
pub fn train_gan(s: &Settings, out: &Path) -> Result<TrainGanReport> {
    let ds = load_dataset(s.path("data")?)?;
    let ccfg = classifier_config(s)?;
    let gcfg = gan_config(s)?;
    let seed = s.seed()?;
    let clf = train_classifier(&ds, &ccfg, seed.child(2))?;
    let gan = train_wgan(&ds, &clf.params, &gcfg, seed.child(3))?;
    let last = gan
        .history
        .last()
        .ok_or_else(|| Error::Numerical("GAN produced no history".into()))?;
    let report = TrainGanReport {
        seed: seed.0,
        classifier: ccfg,
        gan: gcfg,
        classifier_train_accuracy: clf.train_accuracy,
        final_loose_fooling: last.loose_fooling,
        final_strict_fooling: last.strict_fooling,
        final_mean_perturbation_sq: last.mean_perturbation_sq,
    };
    create_dir(out)?;
    write_json(out.join("classifier.json"), &clf.params)?;
    write_json(out.join("generator.json"), &gan.generator)?;
    write_json(out.join("critic.json"), &gan.critic)?;
    write_json_lines(&out.join("gan_history.jsonl"), &gan.history)?;
    write_json(out.join("train_gan.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// learn-repr

#[derive(Debug, Clone, Serialize)]
pub struct SequenceTrace {
    pub id: String,
    pub label: usize,
    pub file: String,
    pub objective: AcotObjectiveParts,
    pub ordering_satisfied: f64,
    pub rounds: Vec<RoundTrace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearnReprReport {
    pub seed: u64,
    pub config: AcotConfig,
    pub negatives: NegativeKind,
    pub negatives_per_positive: usize,
    pub mean_ordering_satisfied: f64,
    pub sequences: Vec<SequenceTrace>,
}

fn subspace_file(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{safe}.csv")
}

/// One subspace CSV per sequence under `out/subspaces`, plus `trace.json`.
pub fn learn_repr(s: &Settings, out: &Path) -> Result<LearnReprReport> {
    let ds = load_dataset(s.path("data")?)?;
    let cfg = acot_config(s)?;
    let seed = s.seed()?;
    let m = negatives_per_positive(s)?;
    let generator = match s.raw("generator") {
        Some(p) => Some(read_json::<MlpParams>(p)?),
        None => None,
    };
    let kind = match s.get::<NegativeKind>("negatives")? {
        Some(k) => k,
        None if generator.is_some() => NegativeKind::Adversarial,
        None => NegativeKind::Random,
    };
    let sigma = s.get_or("sigma", GanConfig::default().sigma)?;
    let negs = negatives_for(&ds, kind, generator.as_ref(), sigma, m, seed.child(4))?;
    let outcomes = learn_representations(ds.sequences(), &negs, &cfg)?;

    let mut traces = Vec::with_capacity(ds.len());
    for ((x, y), o) in ds.sequences().iter().zip(&negs).zip(&outcomes) {
        traces.push(SequenceTrace {
            id: x.id().to_string(),
            label: x.label(),
            file: subspace_file(x.id()),
            objective: acot_objective(x, y, &o.subspace, &o.coupling, &cfg)?,
            ordering_satisfied: ordering_satisfaction(x, &o.subspace, cfg.eta)?,
            rounds: o.trace.clone(),
        });
    }
    let mean_ordering_satisfied = traces.iter().map(|t| t.ordering_satisfied).sum::<f64>() / traces.len().max(1) as f64;

    let dir = out.join("subspaces");
    create_dir(&dir)?;
    for (t, o) in traces.iter().zip(&outcomes) {
        write_matrix_csv(dir.join(&t.file), o.subspace.basis())?;
    }
    if s.get_or("dump_coupling", false)? {
        let cdir = out.join("couplings");
        create_dir(&cdir)?;
        for (t, o) in traces.iter().zip(&outcomes) {
            write_matrix_csv(cdir.join(&t.file), o.coupling.plan())?;
        }
    }
    let report = LearnReprReport {
        seed: seed.0,
        config: cfg,
        negatives: kind,
        negatives_per_positive: m,
        mean_ordering_satisfied,
        sequences: traces,
    };
    write_json(out.join("trace.json"), &report)?;
    Ok(report)
}

/// Subspaces written by [`learn_repr`], in dataset order.
pub fn load_subspaces(ds: &Dataset, repr_dir: &Path) -> Result<Vec<SubspacePoint>> {
    ds.sequences()
        .iter()
        .map(|x| {
            let path = repr_dir.join("subspaces").join(subspace_file(x.id()));
            let u = SubspacePoint::new(read_matrix_csv(&path)?)?;
            if u.ambient_dim() != x.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "{} holds a subspace of R^{} for {}-dim features",
                    path.display(),
                    u.ambient_dim(),
                    x.dim()
                )));
            }
            Ok(u)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// classify

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub pipeline: Pipeline,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
}

impl From<&Evaluation> for ClassifyReport {
    fn from(e: &Evaluation) -> Self {
        ClassifyReport {
            pipeline: e.pipeline,
            accuracy: e.accuracy,
            per_class_accuracy: e.per_class_accuracy.clone(),
        }
    }
}

pub fn classify(s: &Settings, out: &Path) -> Result<ClassifyReport> {
    let cfg = classify_config(s)?;
    let train = load_dataset(s.path("train")?)?;
    let test = load_dataset(s.path("test")?)?;
    if train.num_classes() != test.num_classes() || train.dim() != test.dim() {
        return Err(Error::DimensionMismatch("train and test datasets disagree in classes or dimension".into()));
    }
    let (tr_u, te_u) = if cfg.pipeline.needs_subspaces() {
        (
            Some(load_subspaces(&train, &s.path("train_repr")?)?),
            Some(load_subspaces(&test, &s.path("test_repr")?)?),
        )
    } else {
        (None, None)
    };
    let tr = pool_dataset(&train, tr_u.as_deref(), cfg.pipeline)?;
    let te = pool_dataset(&test, te_u.as_deref(), cfg.pipeline)?;
    let ev = evaluate(&cfg, &tr, &te, train.num_classes())?;
    let report = ClassifyReport::from(&ev);
    create_dir(out)?;
    write_json(out.join("classify.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// verify-bounds

/// Instance `i` uses seed `seed.child(i)`; records keep instance order.
pub fn verify_bounds(s: &Settings, out: &Path) -> Result<Vec<BoundsReport>> {
    let instances = s.get_or("instances", 100usize)?;
    let restarts = s.get_or("restarts", DEFAULT_RESTARTS)?;
    let full_rank = s.get_or("full_rank", false)?;
    let seed = s.seed()?;
    let cfg = BoundsConfig::default();
    let reports: Vec<BoundsReport> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst_seed = seed.child(i as u64);
            let inst = random_instance(inst_seed, full_rank);
            estimate_bounds(&inst.x, &inst.y, inst.k, restarts, inst_seed, &cfg)
        })
        .collect::<Result<_>>()?;
    create_dir(out)?;
    write_json_lines(&out.join("bounds.jsonl"), &reports)?;
    Ok(reports)
}

// ---------------------------------------------------------------------------
// ablate

/// How one ablation row builds its representations.
#[derive(Debug, Clone, Serialize)]
pub struct VariantSpec {
    pub name: String,
    pub pipeline: Pipeline,
    /// `None` for the average-pooling baseline.
    pub acot: Option<AcotConfig>,
    pub negatives: NegativeKind,
    pub negatives_per_positive: usize,
    pub sigma: f64,
    /// Independent negative draws averaged into the row.
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRecord {
    pub kind: &'static str,
    pub variant: String,
    pub pipeline: Pipeline,
    pub accuracy: f64,
    /// Sample standard deviation over trials; `None` for a single trial.
    pub accuracy_std: Option<f64>,
    pub trial_accuracies: Vec<f64>,
    pub seeds: Vec<u64>,
    pub k: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub ot_weight: Option<f64>,
    pub negatives: Option<NegativeKind>,
    pub negatives_per_positive: Option<usize>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub seed: u64,
    pub records: Vec<AblationRecord>,
    pub classifier_train_accuracy: BTreeMap<String, f64>,
    pub loose_fooling: BTreeMap<String, f64>,
}

impl AblationReport {
    pub fn table(&self, variant: &str) -> Option<&AblationRecord> {
        self.records.iter().find(|r| r.kind == "table" && r.variant == variant)
    }
}

pub const TABLE_VARIANTS: [&str; 6] = ["avg_pool", "cot_random", "acot", "acot_pca", "ac_pca_order_no_ot", "full"];

/// The six table rows derived from one base configuration. Each row changes
/// only the fields named in its comment.
pub fn table_variants(
    base: &AcotConfig,
    pipeline: Pipeline,
    m: usize,
    sigma: f64,
    random_trials: usize,
) -> Vec<VariantSpec> {
    let row = |name: &str, acot: Option<AcotConfig>, negatives: NegativeKind, trials: usize, pipeline: Pipeline| {
        VariantSpec {
            name: name.to_string(),
            pipeline,
            acot,
            negatives,
            negatives_per_positive: m,
            sigma,
            trials,
        }
    };
    let adv = NegativeKind::Adversarial;
    let no_penalties = AcotConfig {
        beta1: 0.0,
        beta2: 0.0,
        ..*base
    };
    vec![
        // no subspace
        row("avg_pool", None, adv, 1, Pipeline::AvgpoolRaw),
        // beta1 = beta2 = 0, random negatives
        row("cot_random", Some(no_penalties), NegativeKind::Random, random_trials, pipeline),
        // beta1 = beta2 = 0
        row("acot", Some(no_penalties), adv, 1, pipeline),
        // beta2 = 0
        row("acot_pca", Some(AcotConfig { beta2: 0.0, ..*base }), adv, 1, pipeline),
        // ot_weight = 0
        row("ac_pca_order_no_ot", Some(AcotConfig { ot_weight: 0.0, ..*base }), adv, 1, pipeline),
        row("full", Some(*base), adv, 1, pipeline),
    ]
}

struct AblationData {
    train: Dataset,
    test: Dataset,
}

fn ablation_data(s: &Settings, seed: RngSeed) -> Result<AblationData> {
    match s.raw("data") {
        Some(dir) => {
            let dir = Path::new(dir);
            Ok(AblationData {
                train: load_dataset(dir.join("train"))?,
                test: load_dataset(dir.join("test"))?,
            })
        }
        None => {
            let ds = make_synthetic(&synthetic_config(s)?, seed)?;
            let (train, test) = ds.split(test_fraction(s)?, seed.child(1))?;
            Ok(AblationData { train, test })
        }
    }
}

fn sigma_key(sigma: f64) -> String {
    format!("{sigma}")
}

fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    Some(var.sqrt())
}

struct Runner<'a> {
    data: &'a AblationData,
    classify: ClassifyConfig,
    seed: RngSeed,
    generators: BTreeMap<String, MlpParams>,
}

impl Runner<'_> {
    fn generator(&self, sigma: f64) -> Result<&MlpParams> {
        self.generators
            .get(&sigma_key(sigma))
            .ok_or_else(|| Error::InvalidConfig(format!("no generator trained for sigma {sigma}")))
    }

    /// Seed for the negatives of one trial. Adversarial rows share trial 0 so
    /// they contrast against identical samples.
    fn trial_seed(&self, kind: NegativeKind, m: usize, trial: usize) -> RngSeed {
        let stream = match kind {
            NegativeKind::Adversarial => 4,
            NegativeKind::Random => 5,
        };
        self.seed.child(stream).child(m as u64).child(trial as u64)
    }

    fn run(&self, v: &VariantSpec, kind: &'static str) -> Result<AblationRecord> {
        let cfg = ClassifyConfig {
            pipeline: v.pipeline,
            ..self.classify
        };
        let mut accs = Vec::with_capacity(v.trials);
        let mut seeds = Vec::with_capacity(v.trials);
        for trial in 0..v.trials {
            let acc = match &v.acot {
                None => {
                    let tr = pool_dataset(&self.data.train, None, v.pipeline)?;
                    let te = pool_dataset(&self.data.test, None, v.pipeline)?;
                    evaluate(&cfg, &tr, &te, self.data.train.num_classes())?.accuracy
                }
                Some(acot) => {
                    let seed = self.trial_seed(v.negatives, v.negatives_per_positive, trial);
                    seeds.push(seed.0);
                    let generator = match v.negatives {
                        NegativeKind::Adversarial => Some(self.generator(v.sigma)?),
                        NegativeKind::Random => None,
                    };
                    let neg = |ds: &Dataset, part: u64| {
                        negatives_for(ds, v.negatives, generator, v.sigma, v.negatives_per_positive, seed.child(part))
                    };
                    let tr_u = learned_subspaces(&self.data.train, &neg(&self.data.train, 0)?, acot)?;
                    let te_u = learned_subspaces(&self.data.test, &neg(&self.data.test, 1)?, acot)?;
                    let tr = pool_dataset(&self.data.train, Some(&tr_u), v.pipeline)?;
                    let te = pool_dataset(&self.data.test, Some(&te_u), v.pipeline)?;
                    evaluate(&cfg, &tr, &te, self.data.train.num_classes())?.accuracy
                }
            };
            accs.push(acc);
        }
        let uses_negatives = v.acot.is_some();
        Ok(AblationRecord {
            kind,
            variant: v.name.clone(),
            pipeline: v.pipeline,
            accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            accuracy_std: sample_std(&accs),
            trial_accuracies: accs,
            seeds,
            k: v.acot.map(|a| a.k),
            beta1: v.acot.map(|a| a.beta1),
            beta2: v.acot.map(|a| a.beta2),
            ot_weight: v.acot.map(|a| a.ot_weight),
            negatives: uses_negatives.then_some(v.negatives),
            negatives_per_positive: uses_negatives.then_some(v.negatives_per_positive),
            sigma: (uses_negatives && v.negatives == NegativeKind::Adversarial).then_some(v.sigma),
        })
    }
}

/// Table rows first, then the sweep grid (lexicographic over
/// `k × β₁ × β₂ × m × σ`) when any sweep axis is given.
pub fn ablation_specs(s: &Settings) -> Result<Vec<(&'static str, VariantSpec)>> {
    let base = acot_config(s)?;
    let gan = gan_config(s)?;
    let m = negatives_per_positive(s)?;
    let pipeline = s.get_or::<Pipeline>("pipeline", ClassifyConfig::default().pipeline)?;
    if !pipeline.needs_subspaces() {
        return Err(Error::InvalidConfig("ablation pipeline must use learned subspaces".into()));
    }
    let trials = s.get_or("random_trials", 5usize)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("random_trials must be at least 1".into()));
    }
    let mut specs: Vec<(&'static str, VariantSpec)> = table_variants(&base, pipeline, m, gan.sigma, trials)
        .into_iter()
        .map(|v| ("table", v))
        .collect();

    let ks: Option<Vec<usize>> = s.get_list("k_sweep")?;
    let b1: Option<Vec<f64>> = s.get_list("beta1_sweep")?;
    let b2: Option<Vec<f64>> = s.get_list("beta2_sweep")?;
    let ms: Option<Vec<usize>> = s.get_list("negatives_sweep")?;
    let sigmas: Option<Vec<f64>> = s.get_list("sigma_sweep")?;
    if ks.is_some() || b1.is_some() || b2.is_some() || ms.is_some() || sigmas.is_some() {
        for &k in ks.as_deref().unwrap_or(&[base.k]) {
            for &beta1 in b1.as_deref().unwrap_or(&[base.beta1]) {
                for &beta2 in b2.as_deref().unwrap_or(&[base.beta2]) {
                    for &mm in ms.as_deref().unwrap_or(&[m]) {
                        for &sigma in sigmas.as_deref().unwrap_or(&[gan.sigma]) {
                            let acot = AcotConfig { k, beta1, beta2, ..base };
                            acot.validate()?;
                            if mm == 0 || !(sigma > 0.0 && sigma.is_finite()) {
                                return Err(Error::InvalidConfig(format!("invalid sweep point m={mm}, sigma={sigma}")));
                            }
                            specs.push((
                                "sweep",
                                VariantSpec {
                                    name: format!("full[k={k},beta1={beta1},beta2={beta2},m={mm},sigma={sigma}]"),
                                    pipeline,
                                    acot: Some(acot),
                                    negatives: NegativeKind::Adversarial,
                                    negatives_per_positive: mm,
                                    sigma,
                                    trials: 1,
                                },
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// Runs the table and any sweep on one dataset. One classifier ζ and one
/// generator per distinct σ are trained on the training split.
pub fn ablate(s: &Settings) -> Result<AblationReport> {
    let seed = s.seed()?;
    let specs = ablation_specs(s)?;
    let data = ablation_data(s, seed)?;
    let classify = classify_config(s)?;
    let ccfg = classifier_config(s)?;
    let gcfg = gan_config(s)?;

    let clf = train_classifier(&data.train, &ccfg, seed.child(2))?;
    let mut sigmas: Vec<f64> = specs
        .iter()
        .filter(|(_, v)| v.acot.is_some() && v.negatives == NegativeKind::Adversarial)
        .map(|(_, v)| v.sigma)
        .collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut generators = BTreeMap::new();
    let mut loose = BTreeMap::new();
    let mut clf_acc = BTreeMap::new();
    clf_acc.insert("train".to_string(), clf.train_accuracy);
    for sigma in sigmas {
        let cfg = GanConfig { sigma, ..gcfg };
        let gan = train_wgan(&data.train, &clf.params, &cfg, seed.child(3))?;
        let rates = fooling_rates(&gan.generator, &clf.params, &data.train, sigma, seed.child(6))?;
        loose.insert(sigma_key(sigma), rates.loose);
        generators.insert(sigma_key(sigma), gan.generator);
    }

    let runner = Runner {
        data: &data,
        classify,
        seed,
        generators,
    };
    let records = specs
        .iter()
        .map(|(kind, v)| runner.run(v, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        seed: seed.0,
        records,
        classifier_train_accuracy: clf_acc,
        loose_fooling: loose,
    })
}

/// [`ablate`] plus its artifacts: `ablation.jsonl`, `ablation_summary.csv`
/// and `resolved_configs.json`.
pub fn ablate_to_dir(s: &Settings, out: &Path) -> Result<AblationReport> {
    let report = ablate(s)?;
    create_dir(out)?;
    write_json_lines(&out.join("ablation.jsonl"), &report.records)?;

    let path = out.join("ablation_summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
    w.write_record(["kind", "variant", "pipeline", "accuracy", "accuracy_std", "trials"])
        .map_err(|e| Error::parse(&path, e))?;
    for r in &report.records {
        w.write_record([
            r.kind.to_string(),
            r.variant.clone(),
            r.pipeline.name().to_string(),
            format!("{:.6}", r.accuracy),
            r.accuracy_std.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.trial_accuracies.len().to_string(),
        ])
        .map_err(|e| Error::parse(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let specs: Vec<Value> = ablation_specs(s)?
        .into_iter()
        .map(|(kind, v)| json!({ "kind": kind, "spec": v }))
        .collect();
    let resolved = json!({
        "settings": s,
        "classifier": classifier_config(s)?,
        "gan": gan_config(s)?,
        "classify": classify_config(s)?,
        "variants": specs,
        "classifier_train_accuracy": report.classifier_train_accuracy,
        "loose_fooling": report.loose_fooling,
    });
    write_json(out.join("resolved_configs.json"), &resolved)?;
    Ok(report)
}

/// Writes one JSON value per line to `w`.
pub fn emit_json_lines<T: Serialize>(w: &mut impl Write, records: &[T]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::parse("<stdout>", e))?;
        writeln!(w, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_parse_fold_and_override() {
        let s = Settings::parse("# comment\nbeta1 = 0.1\nouter-rounds=4\n\n", Path::new("cfg")).unwrap();
        assert_eq!(s.get::<f64>("beta1").unwrap(), Some(0.1));
        assert_eq!(s.get::<usize>("outer_rounds").unwrap(), Some(4));
        let mut merged = s.clone();
        merged.overlay(&Settings::new().with("beta1", 0.5));
        assert_eq!(merged.get::<f64>("beta1").unwrap(), Some(0.5));
        assert_eq!(merged.get::<usize>("outer-rounds").unwrap(), Some(4));
    }

    #[test]
    fn settings_reject_unknown_and_malformed() {
        assert!(matches!(
            Settings::parse("bogus=1", Path::new("cfg")),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(Settings::parse("k 3", Path::new("cfg")), Err(Error::Parse { .. })));
        let s = Settings::new().with("k", "abc");
        assert!(matches!(acot_config(&s), Err(Error::InvalidConfig(_))));
        let s = Settings::new().with("k_sweep", "1, 2,3");
        assert_eq!(s.get_list::<usize>("k_sweep").unwrap(), Some(vec![1, 2, 3]));
    }

    #[test]
    fn typed_configs_pick_up_overrides() {
        let s = Settings::new()
            .with("beta2", 0)
            .with("rcg_iters", 7)
            .with("exact_ot_grad", true)
            .with("metric", "euclidean");
        let a = acot_config(&s).unwrap();
        assert_eq!(a.beta2, 0.0);
        assert_eq!(a.rcg.max_iters, 7);
        assert_eq!(a.subspace_step, SubspaceStep::ExactTransport);
        assert_eq!(a.metric, Metric::Euclidean);
        assert_eq!(acot_config(&Settings::new()).unwrap(), AcotConfig::default());
        assert_eq!(gan_config(&Settings::new()).unwrap(), GanConfig::default());
    }

    #[test]
    fn table_variants_differ_only_in_documented_fields() {
        let base = AcotConfig::default();
        let rows = table_variants(&base, Pipeline::AcotAvgpoolLinear, 2, 0.01, 5);
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, TABLE_VARIANTS);
        let full = serde_json::to_value(rows[5].acot.unwrap()).unwrap();
        let changed = |i: usize| -> Vec<String> {
            let v = serde_json::to_value(rows[i].acot.unwrap()).unwrap();
            full.as_object()
                .unwrap()
                .iter()
                .filter(|(k, val)| v[k.as_str()] != **val)
                .map(|(k, _)| k.clone())
                .collect()
        };
        assert_eq!(changed(1), ["beta1", "beta2"]);
        assert_eq!(changed(2), ["beta1", "beta2"]);
        assert_eq!(changed(3), ["beta2"]);
        assert_eq!(changed(4), ["ot_weight"]);
        assert!(rows[0].acot.is_none());
        assert_eq!(rows[1].negatives, NegativeKind::Random);
        assert_eq!(rows[1].trials, 5);
        assert!(rows[2..].iter().all(|r| r.negatives == NegativeKind::Adversarial && r.trials == 1));
    }

    #[test]
    fn sweep_grid_is_lexicographic() {
        let s = Settings::new().with("k_sweep", "1,2").with("beta2_sweep", "0,10");
        let specs = ablation_specs(&s).unwrap();
        let sweep: Vec<(usize, f64)> = specs
            .iter()
            .filter(|(kind, _)| *kind == "sweep")
            .map(|(_, v)| (v.acot.unwrap().k, v.acot.unwrap().beta2))
            .collect();
        assert_eq!(sweep, [(1, 0.0), (1, 10.0), (2, 0.0), (2, 10.0)]);
    }
}
