//! ADAM optimizer with bias correction.

use super::tensor::Tensor;
use super::AutodiffError;

/// Per-parameter moment estimates and the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments matching the given parameter shapes, with the usual
    /// defaults beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        Self {
            first_moment: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            second_moment: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One ADAM update over all parameters. With `maximize` set the gradients
/// are negated, turning the update into gradient ascent.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    maximize: bool,
) -> Result<(), AutodiffError> {
    assert_eq!(
        params.len(),
        grads.len(),
        "parameter/gradient count mismatch"
    );
    assert_eq!(
        params.len(),
        state.first_moment.len(),
        "optimizer state does not match parameter count"
    );
    assert!(lr >= 0.0, "learning rate must be non-negative");

    for (index, grad) in grads.iter().enumerate() {
        if !grad.is_finite() {
            return Err(AutodiffError::NonFiniteGradient { param_index: index });
        }
        assert_eq!(
            grad.shape(),
            params[index].shape(),
            "gradient shape mismatch at parameter {index}"
        );
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);

    for (index, grad) in grads.iter().enumerate() {
        let m = state.first_moment[index].data_mut();
        let v = state.second_moment[index].data_mut();
        let p = params[index].data_mut();
        for i in 0..p.len() {
            let g = if maximize {
                -grad.data()[i]
            } else {
                grad.data()[i]
            };
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
