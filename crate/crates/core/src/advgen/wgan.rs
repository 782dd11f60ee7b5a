//! Adversarial negative generation: the frozen frame classifier ζ, the
//! WGAN critic/generator losses with the classifier-fooling and
//! perturbation-energy terms, the training loop, negative sampling, and
//! fooling-rate measurement.
//!
//! A negative is built from a positive frame `x` of sequence `X` as
//! `y = ReLU(x + g(z)) / ‖ReLU(x + g(z))‖` with `z ∼ N(X̄, σ²I)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{softmax_cross_entropy, softmin_cross_entropy, Arch, Gradients, MlpParams};
use super::rmsprop::{RmsProp, RmsPropConfig};
use crate::data::{sequence_mean, Dataset, FeatureSequence, RngSeed};
use crate::error::{Error, Result};

/// Below this norm the rectified perturbed sample is treated as degenerate.
const DEGENERATE_NORM: f64 = 1e-12;

/// Negatives for one sequence, `d×m`, columns unit-norm and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSet {
    samples: DMatrix<f64>,
}

impl NegativeSet {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::InvalidInput("negative set is empty".into()));
        }
        for (j, col) in samples.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite() || *v < 0.0) || (col.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "negative {j} is not a unit-norm nonnegative vector"
                )));
            }
        }
        Ok(NegativeSet { samples })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }
}

/// The rectify-and-normalize map γ together with what its gradient needs.
#[derive(Debug, Clone)]
pub struct Rectified {
    pub y: DVector<f64>,
    pre: DVector<f64>,
    norm: f64,
}

pub fn rectify_normalize(u: &DVector<f64>) -> Result<Rectified> {
    let r = u.map(|v| v.max(0.0));
    let norm = r.norm();
    if !(norm > DEGENERATE_NORM) {
        return Err(Error::Numerical(
            "perturbed sample is all zero after ReLU; cannot normalize".into(),
        ));
    }
    Ok(Rectified {
        y: r / norm,
        pre: u.clone(),
        norm,
    })
}

impl Rectified {
    /// Pulls `∂L/∂y` back to `∂L/∂u`: `mask ⊙ (I − yyᵀ)g/‖r‖`.
    pub fn pullback(&self, grad_y: &DVector<f64>) -> DVector<f64> {
        let tangential = grad_y - &self.y * self.y.dot(grad_y);
        let mut out = tangential / self.norm;
        for (o, p) in out.iter_mut().zip(self.pre.iter()) {
            if *p <= 0.0 {
                *o = 0.0;
            }
        }
        out
    }

    pub fn min_abs_preactivation(&self) -> f64 {
        self.pre.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn draw_noise_input(mean: &DVector<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(mean.len(), |i, _| mean[i] + sigma * rng.sample::<f64, _>(StandardNormal))
}

// ---------------------------------------------------------------------------
// Frame classifier ζ

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub iters: usize,
    pub lr: f64,
    /// Scale applied to the random initial weights.
    pub init_scale: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            iters: 500,
            lr: 1e-2,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: MlpParams,
    pub train_accuracy: f64,
}

fn labelled_frames(d: &Dataset) -> Vec<(DVector<f64>, usize)> {
    d.sequences()
        .iter()
        .flat_map(|s| (0..s.len()).map(move |t| (s.frame(t), s.label())))
        .collect()
}

/// Mean softmax cross-entropy of ζ over labelled frames, with gradients.
pub fn classifier_loss_and_grad(clf: &MlpParams, frames: &[(DVector<f64>, usize)]) -> Result<(f64, Gradients)> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames to train on".into()));
    }
    let scale = 1.0 / frames.len() as f64;
    let mut grads = clf.zero_grads();
    let mut loss = 0.0;
    for (x, label) in frames {
        let trace = clf.forward_trace(x)?;
        let (l, g) = softmax_cross_entropy(&trace.output, *label);
        loss += l * scale;
        clf.backward_from_trace(&trace, &g, &mut grads, scale)?;
    }
    Ok((loss, grads))
}

/// Full-batch softmax cross-entropy training of the linear frame classifier
/// with RMSprop. Every frame inherits its sequence label.
pub fn train_classifier(d: &Dataset, cfg: &ClassifierConfig, seed: RngSeed) -> Result<TrainedClassifier> {
    if d.is_empty() || d.total_frames() == 0 {
        return Err(Error::InvalidInput("cannot train a classifier on an empty dataset".into()));
    }
    let frames = labelled_frames(d);
    let mut rng = seed.rng();
    let mut clf = MlpParams::init(Arch::Classifier, d.dim(), d.num_classes(), &mut rng);
    for l in clf.layers_mut() {
        l.weight *= cfg.init_scale;
        l.bias *= cfg.init_scale;
    }
    let mut opt = RmsProp::new(
        &clf,
        RmsPropConfig {
            lr: cfg.lr,
            ..RmsPropConfig::default()
        },
    );
    for _ in 0..cfg.iters {
        let (loss, grads) = classifier_loss_and_grad(&clf, &frames)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("classifier loss became {loss}")));
        }
        opt.step(&mut clf, &grads);
    }
    let train_accuracy = frame_accuracy(&clf, d)?;
    Ok(TrainedClassifier {
        params: clf,
        train_accuracy,
    })
}

pub fn argmax(v: &DVector<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

pub fn argmin(v: &DVector<f64>) -> usize {
    argmax(&(-v))
}

/// Fraction of frames whose top-scoring class is the sequence label.
pub fn frame_accuracy(clf: &MlpParams, d: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in d.sequences() {
        for t in 0..s.len() {
            correct += usize::from(argmax(&clf.forward(&s.frame(t))?) == s.label());
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

// ---------------------------------------------------------------------------
// Negatives

/// `m` adversarial negatives for one sequence; positives are visited
/// cyclically, one fresh `z ∼ N(X̄, σ²I)` per negative.
pub fn make_negatives(
    generator: &MlpParams,
    x: &FeatureSequence,
    m: usize,
    sigma: f64,
    seed: RngSeed,
) -> Result<NegativeSet> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one negative".into()));
    }
    if generator.arch() != Arch::Generator || generator.input_dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "generator {:?} of input dim {} for {}-dim features",
            generator.arch(),
            generator.input_dim(),
            x.dim()
        )));
    }
    let mean = sequence_mean(x).into_inner();
    let mut rng = seed.rng();
    let mut out = DMatrix::zeros(x.dim(), m);
    for j in 0..m {
        let z = draw_noise_input(&mean, sigma, &mut rng);
        let xhat = generator.forward(&z)?;
        let y = rectify_normalize(&(x.frame(j % x.len()) + xhat))?.y;
        out.set_column(j, &y);
    }
    NegativeSet::new(out)
}

/// Data-independent negatives `y = γ(x − z)` with `z ∼ N(0, max(x)²I)`,
/// positives visited cyclically. Degenerate draws are resampled.
pub fn random_negatives(x: &FeatureSequence, m: usize, seed: RngSeed) -> Result<NegativeSet> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one negative".into()));
    }
    let mut rng = seed.rng();
    let mut out = DMatrix::zeros(x.dim(), m);
    for j in 0..m {
        let frame = x.frame(j % x.len());
        let scale = frame.max();
        let normal = Normal::new(0.0, scale).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut attempts = 0;
        let y = loop {
            let z = DVector::from_fn(x.dim(), |_, _| normal.sample(&mut rng));
            match rectify_normalize(&(&frame - z)) {
                Ok(r) => break r.y,
                Err(e) if attempts >= 100 => return Err(e),
                Err(_) => attempts += 1,
            }
        };
        out.set_column(j, &y);
    }
    NegativeSet::new(out)
}

// ---------------------------------------------------------------------------
// WGAN losses

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Standard deviation of the generator input noise around `X̄`.
    pub sigma: f64,
    /// Weight of the classifier-fooling term.
    pub lambda1: f64,
    /// Weight of the perturbation-energy term `E‖x̂‖²`.
    pub lambda2: f64,
    pub lr: f64,
    pub critic_steps: usize,
    pub clip: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    /// Generator iterations.
    pub iters: usize,
    pub batch: usize,
    pub eval_every: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            sigma: 0.01,
            lambda1: 0.1,
            lambda2: 1.0,
            lr: 1e-4,
            critic_steps: 5,
            clip: 0.01,
            rmsprop_decay: 0.99,
            rmsprop_eps: 1e-8,
            iters: 2000,
            batch: 64,
            eval_every: 100,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.sigma, self.lr, self.clip, self.rmsprop_eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0)
            || self.critic_steps == 0
            || self.iters == 0
            || self.batch == 0
            || self.eval_every == 0
            || !self.lambda1.is_finite()
            || !self.lambda2.is_finite()
        {
            return Err(Error::InvalidConfig(format!("invalid GAN configuration {self:?}")));
        }
        Ok(())
    }

    fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            lr: self.lr,
            decay: self.rmsprop_decay,
            eps: self.rmsprop_eps,
        }
    }
}

/// One generator training sample: a positive frame, its label, and the
/// generator input drawn around its sequence mean.
#[derive(Debug, Clone)]
pub struct GanSample {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub label: usize,
}

/// Draws `batch` samples: uniform sequence, uniform frame, fresh noise input.
pub fn sample_batch(
    d: &Dataset,
    means: &[DVector<f64>],
    sigma: f64,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<GanSample> {
    (0..batch)
        .map(|_| {
            let s = rng.random_range(0..d.len());
            let seq = &d.sequences()[s];
            let t = rng.random_range(0..seq.len());
            GanSample {
                x: seq.frame(t),
                z: draw_noise_input(&means[s], sigma, rng),
                label: seq.label(),
            }
        })
        .collect()
}

/// Critic loss `E h(y) − E h(x)` (the negated dual objective) and its gradient.
pub fn critic_loss_and_grad(
    critic: &MlpParams,
    real: &[DVector<f64>],
    fake: &[DVector<f64>],
) -> Result<(f64, Gradients)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::InvalidInput("critic batch is empty".into()));
    }
    let one = DVector::from_element(1, 1.0);
    let mut grads = critic.zero_grads();
    let mut loss = 0.0;
    let wr = 1.0 / real.len() as f64;
    for x in real {
        let trace = critic.forward_trace(x)?;
        loss -= trace.output[0] * wr;
        critic.backward_from_trace(&trace, &one, &mut grads, -wr)?;
    }
    let wf = 1.0 / fake.len() as f64;
    for y in fake {
        let trace = critic.forward_trace(y)?;
        loss += trace.output[0] * wf;
        critic.backward_from_trace(&trace, &one, &mut grads, wf)?;
    }
    Ok((loss, grads))
}

/// Terms of the generator objective, batch means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLossParts {
    pub critic_gap: f64,
    pub fooling: f64,
    pub energy: f64,
    pub total: f64,
    /// Samples skipped because the rectified sample was all zero.
    pub degenerate: usize,
}

/// Generator objective
/// `E h(x) − E h(y) + λ₁·E CE(softmin ζ(y), ℓ) + λ₂·E‖x̂‖²` with parameter
/// gradients. With `include_constant_terms` the θ-independent parts
/// (`E h(x)` and `−λ₁·E CE(softmax ζ(x), ℓ)`) are added to the reported
/// value; the gradient is unaffected either way.
pub fn generator_loss_and_grad(
    generator: &MlpParams,
    critic: &MlpParams,
    classifier: &MlpParams,
    batch: &[GanSample],
    cfg: &GanConfig,
    include_constant_terms: bool,
) -> Result<(GeneratorLossParts, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("generator batch is empty".into()));
    }
    let one = DVector::from_element(1, 1.0);
    let w = 1.0 / batch.len() as f64;
    let mut grads = generator.zero_grads();
    let mut parts = GeneratorLossParts::default();
    let mut throwaway = critic.zero_grads();
    let mut throwaway_clf = classifier.zero_grads();

    for s in batch {
        let gen_trace = generator.forward_trace(&s.z)?;
        let xhat = &gen_trace.output;
        let rect = match rectify_normalize(&(&s.x + xhat)) {
            Ok(r) => r,
            Err(_) => {
                parts.degenerate += 1;
                continue;
            }
        };

        let critic_trace = critic.forward_trace(&rect.y)?;
        parts.critic_gap -= critic_trace.output[0] * w;
        let mut grad_y = critic.backward_from_trace(&critic_trace, &one, &mut throwaway, -w)?;

        let clf_trace = classifier.forward_trace(&rect.y)?;
        let (ce, dlogits) = softmin_cross_entropy(&clf_trace.output, s.label);
        parts.fooling += ce * w;
        grad_y += classifier.backward_from_trace(&clf_trace, &dlogits, &mut throwaway_clf, cfg.lambda1 * w)?;

        parts.energy += xhat.norm_squared() * w;
        let grad_xhat = rect.pullback(&grad_y) + xhat * (2.0 * cfg.lambda2 * w);
        generator.backward_from_trace(&gen_trace, &grad_xhat, &mut grads, 1.0)?;

        if include_constant_terms {
            parts.critic_gap += critic.forward(&s.x)?[0] * w;
            let (ce_pos, _) = softmax_cross_entropy(&classifier.forward(&s.x)?, s.label);
            parts.fooling -= ce_pos * w;
        }
    }
    parts.total = parts.critic_gap + cfg.lambda1 * parts.fooling + cfg.lambda2 * parts.energy;
    if !parts.total.is_finite() {
        return Err(Error::Numerical(format!("generator loss became {parts:?}")));
    }
    Ok((parts, grads))
}

// ---------------------------------------------------------------------------
// Fooling rates and training

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoolingRates {
    /// Fraction of negatives whose top class is not the sequence label.
    pub loose: f64,
    /// Fraction of negatives whose lowest-scoring class is the sequence label.
    pub strict: f64,
    /// Mean `‖x̂‖²` over the evaluated samples.
    pub mean_perturbation_sq: f64,
}

/// Perturbs every frame of `d` once and scores the result with ζ.
pub fn fooling_rates(
    generator: &MlpParams,
    classifier: &MlpParams,
    d: &Dataset,
    sigma: f64,
    seed: RngSeed,
) -> Result<FoolingRates> {
    let mut rng = seed.rng();
    let (mut loose, mut strict, mut energy, mut total) = (0usize, 0usize, 0.0, 0usize);
    for s in d.sequences() {
        let mean = sequence_mean(s).into_inner();
        for t in 0..s.len() {
            let z = draw_noise_input(&mean, sigma, &mut rng);
            let xhat = generator.forward(&z)?;
            energy += xhat.norm_squared();
            let y = rectify_normalize(&(s.frame(t) + xhat))?.y;
            let logits = classifier.forward(&y)?;
            loose += usize::from(argmax(&logits) != s.label());
            strict += usize::from(argmin(&logits) == s.label());
            total += 1;
        }
    }
    let n = total as f64;
    Ok(FoolingRates {
        loose: loose as f64 / n,
        strict: strict as f64 / n,
        mean_perturbation_sq: energy / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHistoryEntry {
    pub iter: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub loose_fooling: f64,
    pub strict_fooling: f64,
    pub mean_perturbation_sq: f64,
    pub max_abs_critic_weight: f64,
}

#[derive(Debug, Clone)]
pub struct GanOutcome {
    pub generator: MlpParams,
    pub critic: MlpParams,
    pub history: Vec<GanHistoryEntry>,
}

/// Alternates `critic_steps` clipped critic updates with one generator
/// update, RMSprop on both, ζ frozen. Fooling rates are evaluated every
/// `eval_every` generator iterations and at the end.
pub fn train_wgan(d: &Dataset, classifier: &MlpParams, cfg: &GanConfig, seed: RngSeed) -> Result<GanOutcome> {
    train_wgan_observed(d, classifier, cfg, seed, &mut |_| {})
}

/// [`train_wgan`] with a hook called after every critic update, for
/// instrumenting the clipping invariant.
pub fn train_wgan_observed(
    d: &Dataset,
    classifier: &MlpParams,
    cfg: &GanConfig,
    seed: RngSeed,
    after_critic_step: &mut dyn FnMut(&MlpParams),
) -> Result<GanOutcome> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::InvalidInput("cannot train a GAN on an empty dataset".into()));
    }
    if classifier.arch() != Arch::Classifier || classifier.input_dim() != d.dim() {
        return Err(Error::DimensionMismatch("classifier does not match the dataset".into()));
    }
    let mut rng = seed.rng();
    let mut generator = MlpParams::generator(d.dim(), &mut rng);
    let mut critic = MlpParams::critic(d.dim(), &mut rng);
    critic.clip(cfg.clip);
    let mut opt_g = RmsProp::new(&generator, cfg.rmsprop());
    let mut opt_c = RmsProp::new(&critic, cfg.rmsprop());
    let means: Vec<DVector<f64>> = d.sequences().iter().map(|s| sequence_mean(s).into_inner()).collect();

    let mut history = Vec::new();
    let mut critic_loss = 0.0;
    for iter in 1..=cfg.iters {
        for _ in 0..cfg.critic_steps {
            let real: Vec<DVector<f64>> = sample_batch(d, &means, cfg.sigma, cfg.batch, &mut rng)
                .into_iter()
                .map(|s| s.x)
                .collect();
            let fake_src = sample_batch(d, &means, cfg.sigma, cfg.batch, &mut rng);
            let mut fake = Vec::with_capacity(fake_src.len());
            for s in &fake_src {
                if let Ok(r) = rectify_normalize(&(&s.x + generator.forward(&s.z)?)) {
                    fake.push(r.y);
                }
            }
            if fake.is_empty() {
                return Err(Error::Numerical(format!("iteration {iter}: every fake sample degenerated")));
            }
            let (loss, grads) = critic_loss_and_grad(&critic, &real, &fake)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("iteration {iter}: critic loss became {loss}")));
            }
            critic_loss = loss;
            opt_c.step(&mut critic, &grads);
            critic.clip(cfg.clip);
            after_critic_step(&critic);
        }

        let batch = sample_batch(d, &means, cfg.sigma, cfg.batch, &mut rng);
        let (parts, grads) = generator_loss_and_grad(&generator, &critic, classifier, &batch, cfg, false)
            .map_err(|e| Error::Numerical(format!("iteration {iter}: {e}")))?;
        opt_g.step(&mut generator, &grads);

        if iter % cfg.eval_every == 0 || iter == cfg.iters {
            let rates = fooling_rates(&generator, classifier, d, cfg.sigma, seed.child(iter as u64))?;
            history.push(GanHistoryEntry {
                iter,
                critic_loss,
                generator_loss: parts.total,
                loose_fooling: rates.loose,
                strict_fooling: rates.strict,
                mean_perturbation_sq: rates.mean_perturbation_sq,
                max_abs_critic_weight: critic.max_abs_param(),
            });
        }
    }
    Ok(GanOutcome {
        generator,
        critic,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticConfig};
    use approx::assert_abs_diff_eq;

    fn small_cfg() -> SyntheticConfig {
        SyntheticConfig {
            num_classes: 3,
            sequences_per_class: 4,
            frames: 6,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn zero_generator_reproduces_positives() {
        let ds = make_synthetic(&small_cfg(), RngSeed(1)).unwrap();
        let g = MlpParams::zeros(Arch::Generator, ds.dim(), 0);
        let seq = &ds.sequences()[0];
        let negs = make_negatives(&g, seq, 2 * seq.len(), 0.01, RngSeed(2)).unwrap();
        assert_eq!(negs.len(), 2 * seq.len());
        for j in 0..negs.len() {
            let diff = (negs.samples().column(j) - seq.features().column(j % seq.len())).amax();
            assert!(diff < 1e-15);
        }
    }

    #[test]
    fn negatives_are_unit_nonnegative_and_replayable() {
        let ds = make_synthetic(&small_cfg(), RngSeed(1)).unwrap();
        let mut rng = RngSeed(3).rng();
        let g = MlpParams::generator(ds.dim(), &mut rng);
        let seq = &ds.sequences()[2];
        let a = make_negatives(&g, seq, 7, 0.01, RngSeed(4)).unwrap();
        let b = make_negatives(&g, seq, 7, 0.01, RngSeed(4)).unwrap();
        assert_eq!(a, b);
        for col in a.samples().column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
            assert!(col.iter().all(|v| *v >= 0.0));
        }
        assert!(make_negatives(&g, seq, 0, 0.01, RngSeed(4)).is_err());
        let r = random_negatives(seq, 5, RngSeed(5)).unwrap();
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn degenerate_perturbation_is_an_error() {
        let u = DVector::from_vec(vec![-1.0, -0.5, 0.0]);
        assert!(matches!(rectify_normalize(&u), Err(Error::Numerical(_))));
    }

    #[test]
    fn rectify_pullback_matches_finite_differences() {
        let u = DVector::from_vec(vec![0.4, -0.3, 0.9, 0.2]);
        let g = DVector::from_vec(vec![0.3, 1.0, -0.7, 0.5]);
        let analytic = rectify_normalize(&u).unwrap().pullback(&g);
        for i in 0..4 {
            let mut up = u.clone();
            up[i] += 1e-6;
            let mut um = u.clone();
            um[i] -= 1e-6;
            let fd = (rectify_normalize(&up).unwrap().y.dot(&g) - rectify_normalize(&um).unwrap().y.dot(&g)) / 2e-6;
            assert_abs_diff_eq!(analytic[i], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn classifier_learns_separable_data() {
        let cfg = SyntheticConfig {
            num_classes: 2,
            snr: 0.9,
            ..small_cfg()
        };
        let ds = make_synthetic(&cfg, RngSeed(6)).unwrap();
        let trained = train_classifier(&ds, &ClassifierConfig::default(), RngSeed(7)).unwrap();
        assert!(trained.train_accuracy >= 0.95, "{}", trained.train_accuracy);

        let one = SyntheticConfig {
            num_classes: 1,
            ..small_cfg()
        };
        let ds1 = make_synthetic(&one, RngSeed(6)).unwrap();
        let t1 = train_classifier(&ds1, &ClassifierConfig::default(), RngSeed(7)).unwrap();
        assert_eq!(t1.train_accuracy, 1.0);
    }

    #[test]
    fn zero_generator_loose_rate_is_classifier_error() {
        let ds = make_synthetic(&small_cfg(), RngSeed(8)).unwrap();
        let clf = train_classifier(&ds, &ClassifierConfig { iters: 50, ..Default::default() }, RngSeed(9)).unwrap();
        let g = MlpParams::zeros(Arch::Generator, ds.dim(), 0);
        let rates = fooling_rates(&g, &clf.params, &ds, 0.01, RngSeed(10)).unwrap();
        assert_abs_diff_eq!(rates.loose, 1.0 - clf.train_accuracy, epsilon = 1e-12);
        assert!((0.0..=1.0).contains(&rates.strict));
        assert_eq!(rates.mean_perturbation_sq, 0.0);
    }

    #[test]
    fn constant_terms_do_not_change_generator_gradient() {
        let ds = make_synthetic(&small_cfg(), RngSeed(11)).unwrap();
        let mut rng = RngSeed(12).rng();
        let g = MlpParams::generator(ds.dim(), &mut rng);
        let c = MlpParams::critic(ds.dim(), &mut rng);
        let clf = MlpParams::init(Arch::Classifier, ds.dim(), ds.num_classes(), &mut rng);
        let means: Vec<_> = ds.sequences().iter().map(|s| sequence_mean(s).into_inner()).collect();
        let batch = sample_batch(&ds, &means, 0.01, 16, &mut rng);
        let cfg = GanConfig::default();
        let (pa, ga) = generator_loss_and_grad(&g, &c, &clf, &batch, &cfg, false).unwrap();
        let (pb, gb) = generator_loss_and_grad(&g, &c, &clf, &batch, &cfg, true).unwrap();
        assert_eq!(ga, gb);
        assert_ne!(pa.total, pb.total);
    }

    #[test]
    fn critic_weights_stay_clipped_every_step() {
        let ds = make_synthetic(&small_cfg(), RngSeed(13)).unwrap();
        let clf = train_classifier(&ds, &ClassifierConfig { iters: 20, ..Default::default() }, RngSeed(1)).unwrap();
        let cfg = GanConfig {
            iters: 10,
            batch: 8,
            eval_every: 5,
            ..GanConfig::default()
        };
        let mut steps = 0;
        let out = train_wgan_observed(&ds, &clf.params, &cfg, RngSeed(2), &mut |critic| {
            assert!(critic.max_abs_param() <= 0.01);
            steps += 1;
        })
        .unwrap();
        assert_eq!(steps, 50);
        assert_eq!(out.history.len(), 2);
        assert!(out.history.iter().all(|h| h.max_abs_critic_weight <= 0.01));
    }
}
