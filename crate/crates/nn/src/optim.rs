//! AmsGrad: Adam whose second-moment denominator never decreases.

use crate::error::{NnError, Result};
use crate::param::Param;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmsGradConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-coordinate optimizer state for one parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            v_max: vec![0.0; n],
        }
    }
}

/// One bias-corrected AmsGrad update of `values` in place. `step` is 1-based.
///
/// ```text
/// m ← β1·m + (1-β1)·g
/// v ← β2·v + (1-β2)·g²
/// v_max ← max(v_max, v)
/// w ← w − lr · (m / (1-β1^t)) / (sqrt(v_max) / sqrt(1-β2^t) + ε)
/// ```
pub fn amsgrad_step(
    values: &mut [f64],
    grads: &[f64],
    state: &mut Moments,
    step: u64,
    cfg: &AmsGradConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2_sqrt = (1.0 - cfg.beta2.powi(step as i32)).sqrt();
    for i in 0..values.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        if state.v[i] > state.v_max[i] {
            state.v_max[i] = state.v[i];
        }
        let denom = state.v_max[i].sqrt() / bc2_sqrt + cfg.eps;
        values[i] -= cfg.lr * (state.m[i] / bc1) / denom;
    }
}

/// Optimizer state over an ordered list of parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AmsGrad {
    pub config: AmsGradConfig,
    pub step: u64,
    pub moments: Vec<Moments>,
}

impl AmsGrad {
    pub fn new<'a>(config: AmsGradConfig, params: impl IntoIterator<Item = &'a Param>) -> Self {
        Self {
            config,
            step: 0,
            moments: params.into_iter().map(|p| Moments::zeros(p.len())).collect(),
        }
    }

    /// Applies one update using each parameter's accumulated gradient.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param>) -> Result<()> {
        self.step += 1;
        let mut count = 0;
        for (p, state) in params.into_iter().zip(self.moments.iter_mut()) {
            if state.m.len() != p.len() {
                return Err(NnError::ParamMismatch {
                    expected: state.m.len(),
                    found: p.len(),
                });
            }
            amsgrad_step(&mut p.value, &p.grad, state, self.step, &self.config);
            count += 1;
        }
        if count != self.moments.len() {
            return Err(NnError::ParamMismatch {
                expected: self.moments.len(),
                found: count,
            });
        }
        Ok(())
    }
}
