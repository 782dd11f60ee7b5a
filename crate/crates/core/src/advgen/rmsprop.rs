use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Layer, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            lr: 1e-4,
            decay: 0.99,
            eps: 1e-8,
        }
    }
}

/// `s ← ρs + (1−ρ)g²; w ← w − lr·g/(√s + eps)` for one scalar.
pub fn rmsprop_update(w: &mut f64, s: &mut f64, g: f64, cfg: &RmsPropConfig) {
    *s = cfg.decay * *s + (1.0 - cfg.decay) * g * g;
    *w -= cfg.lr * g / (s.sqrt() + cfg.eps);
}

/// Per-parameter squared-gradient accumulators for one network.
#[derive(Debug, Clone)]
pub struct RmsProp {
    cfg: RmsPropConfig,
    state: Vec<Layer>,
}

impl RmsProp {
    pub fn new(params: &MlpParams, cfg: RmsPropConfig) -> Self {
        RmsProp {
            cfg,
            state: params.zero_grads(),
        }
    }

    pub fn config(&self) -> &RmsPropConfig {
        &self.cfg
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) {
        for ((layer, acc), g) in params.layers_mut().iter_mut().zip(&mut self.state).zip(grads) {
            for ((w, s), gv) in layer.weight.iter_mut().zip(acc.weight.iter_mut()).zip(g.weight.iter()) {
                rmsprop_update(w, s, *gv, &self.cfg);
            }
            for ((w, s), gv) in layer.bias.iter_mut().zip(acc.bias.iter_mut()).zip(g.bias.iter()) {
                rmsprop_update(w, s, *gv, &self.cfg);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_weight() {
        let (mut w, mut s) = (0.3, 0.0);
        rmsprop_update(&mut w, &mut s, 0.0, &RmsPropConfig::default());
        assert_eq!(w, 0.3);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn first_step_by_hand() {
        let (mut w, mut s) = (0.0, 0.0);
        rmsprop_update(&mut w, &mut s, 1.0, &RmsPropConfig::default());
        assert_abs_diff_eq!(s, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(w, -1e-4 / (0.1 + 1e-8), epsilon = 1e-15);
        assert_abs_diff_eq!(w, -9.999999e-4, epsilon = 1e-10);
    }

    #[test]
    fn repeated_gradient_shrinks_step() {
        let cfg = RmsPropConfig::default();
        let (mut w, mut s) = (0.0, 0.0);
        rmsprop_update(&mut w, &mut s, 1.0, &cfg);
        let first = w;
        rmsprop_update(&mut w, &mut s, 1.0, &cfg);
        let second = w - first;
        assert!(second.abs() < first.abs());
    }
}
