//! Adam optimizer with bias-corrected moment estimates.

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("non-finite gradient at parameter index {index}")]
    NonFiniteGradient { index: usize },
    #[error("parameter count {params} does not match optimizer state {state}")]
    SizeMismatch { params: usize, state: usize },
    #[error("parameter tensor {tensor} has no gradient")]
    MissingGradient { tensor: usize },
}

/// Per-parameter first/second moment state; `m` and `v` are indexed by
/// flat parameter offset across all tensors handed to `adam_step`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize, alpha: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            alpha,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One optimizer step over a list of parameter tensors whose `grad` slots
/// are populated. Update: θ ← θ − α·m̂/(√v̂ + ε) with m̂ = m/(1−β₁ᵗ),
/// v̂ = v/(1−β₂ᵗ).
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Tensor]) -> Result<(), AdamError> {
    let total: usize = params.iter().map(|p| p.len()).sum();
    if total != state.m.len() {
        return Err(AdamError::SizeMismatch {
            params: total,
            state: state.m.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let mut offset = 0usize;
    for (ti, p) in params.iter_mut().enumerate() {
        let n = p.len();
        let grad = p
            .grad
            .take()
            .ok_or(AdamError::MissingGradient { tensor: ti })?;
        debug_assert_eq!(grad.len(), n);
        let vals = p.values_mut();
        for i in 0..n {
            let g = grad[i];
            if !g.is_finite() {
                return Err(AdamError::NonFiniteGradient { index: offset + i });
            }
            let m = state.beta1 * state.m[offset + i] + (1.0 - state.beta1) * g;
            let v = state.beta2 * state.v[offset + i] + (1.0 - state.beta2) * g * g;
            state.m[offset + i] = m;
            state.v[offset + i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            vals[i] -= state.alpha * m_hat / (v_hat.sqrt() + state.epsilon);
        }
        offset += n;
    }
    Ok(())
}
