//! Fixed-architecture fully connected networks with hand-written
//! reverse-mode gradients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network shapes used by the adversarial generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// `d→d, ReLU, d→d, ReLU, d→d`
    Generator,
    /// `d→d, ReLU, d→d, ReLU, d→1`
    Critic,
    /// single `d→c` affine map
    Classifier,
}

/// One affine layer `v ↦ Wv + b`. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Layer {
            weight: DMatrix::zeros(out, inp),
            bias: DVector::zeros(out),
        }
    }

    fn zeros_like(&self) -> Self {
        Layer::zeros(self.weight.nrows(), self.weight.ncols())
    }

    fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Per-layer gradients, same layout as [`MlpParams::layers`].
pub type Gradients = Vec<Layer>;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: Arch,
    layers: Vec<Layer>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer.
    pub inputs: Vec<DVector<f64>>,
    /// Pre-activation output of each layer.
    pub pre: Vec<DVector<f64>>,
    pub output: DVector<f64>,
}

impl ForwardTrace {
    /// Smallest `|pre-activation|` over the ReLU-gated layers.
    pub fn min_abs_relu_preactivation(&self) -> f64 {
        let gated = self.pre.len().saturating_sub(1);
        self.pre[..gated]
            .iter()
            .flat_map(|p| p.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn layer_shapes(arch: Arch, dim: usize, out: usize) -> Vec<(usize, usize)> {
    match arch {
        Arch::Generator => vec![(dim, dim), (dim, dim), (dim, dim)],
        Arch::Critic => vec![(dim, dim), (dim, dim), (1, dim)],
        Arch::Classifier => vec![(out, dim)],
    }
}

impl MlpParams {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(arch: Arch, dim: usize, classes: usize, rng: &mut R) -> Self {
        let layers = layer_shapes(arch, dim, classes)
            .into_iter()
            .map(|(out, inp)| {
                let bound = 1.0 / (inp as f64).sqrt();
                Layer {
                    weight: DMatrix::from_fn(out, inp, |_, _| rng.random_range(-bound..=bound)),
                    bias: DVector::from_fn(out, |_, _| rng.random_range(-bound..=bound)),
                }
            })
            .collect();
        MlpParams { arch, layers }
    }

    pub fn zeros(arch: Arch, dim: usize, classes: usize) -> Self {
        let layers = layer_shapes(arch, dim, classes)
            .into_iter()
            .map(|(out, inp)| Layer::zeros(out, inp))
            .collect();
        MlpParams { arch, layers }
    }

    pub fn generator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self::init(Arch::Generator, dim, 0, rng)
    }

    pub fn critic<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self::init(Arch::Critic, dim, 0, rng)
    }

    /// Builds from explicit layers, checking them against the architecture.
    pub fn from_layers(arch: Arch, layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidInput("network has no layers".into()))?;
        let dim = first.weight.ncols();
        let out = layers.last().map(|l| l.weight.nrows()).unwrap_or(0);
        let expected = layer_shapes(arch, dim, out);
        let shapes: Vec<(usize, usize)> = layers.iter().map(|l| l.weight.shape()).collect();
        if shapes != expected || layers.iter().any(|l| l.bias.len() != l.weight.nrows()) {
            return Err(Error::InvalidInput(format!(
                "{arch:?} layers have shapes {shapes:?}, expected {expected:?}"
            )));
        }
        if layers
            .iter()
            .any(|l| l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("network weights must be finite".into()));
        }
        Ok(MlpParams { arch, layers })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weight.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    /// Parameter addressed by a flat index (weights row-major, then bias, per layer).
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        flat_mut(&mut self.layers, &mut index)
    }

    /// Clamps every weight and bias into `[−c, c]`.
    pub fn clip(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight.apply(|w| *w = w.clamp(-c, c));
            l.bias.apply(|b| *b = b.clamp(-c, c));
        }
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    fn check_input(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} expects input of length {}, got {}",
                self.arch,
                self.input_dim(),
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("network input is non-finite".into()));
        }
        Ok(())
    }

    pub fn forward_trace(&self, v: &DVector<f64>) -> Result<ForwardTrace> {
        self.check_input(v)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = v.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = &layer.weight * &h + &layer.bias;
            inputs.push(h);
            h = if i < last { z.map(|x| x.max(0.0)) } else { z.clone() };
            pre.push(z);
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("network output is non-finite".into()));
        }
        Ok(ForwardTrace {
            inputs,
            pre,
            output: h,
        })
    }

    pub fn forward(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.forward_trace(v)?.output)
    }

    /// Reverse-mode gradients of `⟨upstream, f(v)⟩`: parameter gradients and
    /// the gradient with respect to the input. ReLU'(0) is taken as 0.
    pub fn backward(&self, v: &DVector<f64>, upstream: &DVector<f64>) -> Result<(Gradients, DVector<f64>)> {
        let trace = self.forward_trace(v)?;
        let mut grads = self.zero_grads();
        let input_grad = self.backward_from_trace(&trace, upstream, &mut grads, 1.0)?;
        Ok((grads, input_grad))
    }

    /// Accumulates the parameter gradients of `scale·⟨upstream, f(v)⟩` into
    /// `grads` and returns that quantity's input gradient.
    pub fn backward_from_trace(
        &self,
        trace: &ForwardTrace,
        upstream: &DVector<f64>,
        grads: &mut Gradients,
        scale: f64,
    ) -> Result<DVector<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "upstream gradient of length {} for output dim {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut delta = upstream * scale;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                for (d, z) in delta.iter_mut().zip(trace.pre[i].iter()) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            grads[i].weight.ger(1.0, &delta, &trace.inputs[i], 1.0);
            grads[i].bias += &delta;
            delta = self.layers[i].weight.tr_mul(&delta);
        }
        Ok(delta)
    }
}

fn flat_mut<'a>(layers: &'a mut [Layer], index: &mut usize) -> &'a mut f64 {
    for l in layers.iter_mut() {
        if *index < l.weight.len() {
            let (r, c) = (*index / l.weight.ncols(), *index % l.weight.ncols());
            return &mut l.weight[(r, c)];
        }
        *index -= l.weight.len();
        if *index < l.bias.len() {
            return &mut l.bias[*index];
        }
        *index -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Flattens gradients in the [`MlpParams::param_mut`] order.
pub fn flatten(grads: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in grads {
        for r in 0..l.weight.nrows() {
            out.extend(l.weight.row(r).iter());
        }
        out.extend(l.bias.iter());
    }
    out
}

pub fn add_scaled(into: &mut [Layer], from: &[Layer], scale: f64) {
    for (a, b) in into.iter_mut().zip(from) {
        a.weight += &b.weight * scale;
        a.bias += &b.bias * scale;
    }
}

// ---------------------------------------------------------------------------
// JSON form: arch tag plus row-major weights.

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MlpFile {
    arch: Arch,
    layers: Vec<LayerFile>,
}

impl Serialize for MlpParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let file = MlpFile {
            arch: self.arch,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    weight: l.weight.transpose().as_slice().to_vec(),
                    bias: l.bias.as_slice().to_vec(),
                })
                .collect(),
        };
        file.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MlpParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = MlpFile::deserialize(d)?;
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                if l.weight.len() != l.rows * l.cols || l.bias.len() != l.rows {
                    return Err(serde::de::Error::custom("layer array lengths disagree with shape"));
                }
                Ok(Layer {
                    weight: DMatrix::from_row_slice(l.rows, l.cols, &l.weight),
                    bias: DVector::from_vec(l.bias),
                })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        MlpParams::from_layers(file.arch, layers).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Softmax helpers

pub fn softmax(v: &DVector<f64>) -> DVector<f64> {
    let max = v.max();
    let e = v.map(|x| (x - max).exp());
    let s = e.sum();
    e / s
}

/// `−log softmax(logits)_label` and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &DVector<f64>, label: usize) -> (f64, DVector<f64>) {
    let p = softmax(logits);
    let loss = -p[label].max(f64::MIN_POSITIVE).ln();
    let mut grad = p;
    grad[label] -= 1.0;
    (loss, grad)
}

/// `−log softmin(logits)_label = −log softmax(−logits)_label` and its
/// gradient with respect to the logits.
pub fn softmin_cross_entropy(logits: &DVector<f64>, label: usize) -> (f64, DVector<f64>) {
    let (loss, g) = softmax_cross_entropy(&(-logits), label);
    (loss, -g)
}
