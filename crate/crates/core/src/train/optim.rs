use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndiff::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmsGrad {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AmsGrad {
    fn default() -> Self {
        Self { lr: 0.02, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter moments for AMSGrad without bias correction.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    /// Running element-wise maximum of `v`.
    pub v_hat: Vec<Tensor<T>>,
    pub step: u64,
    pub skipped: u64,
    pub hyper: AmsGrad,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(shapes: &[Vec<usize>], hyper: AmsGrad) -> Self {
        let zeros = || shapes.iter().map(|s| Tensor::zeros(s)).collect::<Vec<_>>();
        Self { m: zeros(), v: zeros(), v_hat: zeros(), step: 0, skipped: 0, hyper }
    }
}

/// One update:
/// `m ← β1 m + (1-β1) g`, `v ← β2 v + (1-β2) g²`, `v̂ ← max(v̂, v)`,
/// `θ ← θ - lr m / (sqrt(v̂) + ε)`.
///
/// A non-finite gradient skips the whole step and returns `false`.
pub fn amsgrad_step<T: Scalar>(
    state: &mut OptimizerState<T>,
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
) -> Result<bool> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "amsgrad_step",
            format!("{} params, {} grads, {} state slots", params.len(), grads.len(), state.m.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::shape("amsgrad_step", format!("slot {i}: {:?} vs {:?}", p.shape(), g.shape())));
        }
    }
    if grads.iter().any(|g| !g.all_finite()) {
        state.skipped += 1;
        log::warn!("non-finite gradient at step {}; update skipped", state.step);
        return Ok(false);
    }
    let h = state.hyper;
    let (b1, b2, lr, eps) = (T::of(h.beta1), T::of(h.beta2), T::of(h.lr), T::of(h.eps));
    let one = T::one();
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        for (mk, &gk) in m.iter_mut().zip(g) {
            *mk = b1 * *mk + (one - b1) * gk;
        }
        let v = state.v[i].data_mut();
        for (vk, &gk) in v.iter_mut().zip(g) {
            *vk = b2 * *vk + (one - b2) * gk * gk;
        }
        let (v, v_hat) = (state.v[i].data(), state.v_hat[i].data_mut());
        for (vh, &vk) in v_hat.iter_mut().zip(v) {
            *vh = vh.max(vk);
        }
        let (m, v_hat) = (state.m[i].data(), state.v_hat[i].data());
        for ((pk, &mk), &vh) in p.data_mut().iter_mut().zip(m).zip(v_hat) {
            *pk = *pk - lr * mk / (vh.sqrt() + eps);
        }
    }
    state.step += 1;
    Ok(true)
}
