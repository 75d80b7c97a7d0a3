use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::nncore::{Param, Scalar};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

/// Bias-corrected Adam update of a single tensor at step `t` (1-based).
pub fn adam_step<T: Scalar>(
    value: &mut [T],
    grad: &[T],
    moments: &mut Moments<T>,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    ensure_dim("adam", "gradient length", value.len(), grad.len())?;
    ensure_dim("adam", "first moment length", value.len(), moments.m.len())?;
    ensure_dim("adam", "second moment length", value.len(), moments.v.len())?;
    if t == 0 {
        return Err(Error::config("t", "Adam steps are counted from 1"));
    }
    let c = |v: f64| T::from_f64_lossy(v);
    let (b1, b2) = (c(cfg.beta1), c(cfg.beta2));
    let one = T::one();
    let correct1 = one - c(cfg.beta1.powi(t as i32));
    let correct2 = one - c(cfg.beta2.powi(t as i32));
    let (lr, eps) = (c(cfg.lr), c(cfg.epsilon));
    for (((w, &g), m), v) in value
        .iter_mut()
        .zip(grad)
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam state for a fixed, ordered list of parameters.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub t: u64,
    moments: Vec<Moments<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, params: &[&mut Param<T>]) -> Self {
        let moments = params
            .iter()
            .map(|p| Moments {
                m: vec![T::zero(); p.len()],
                v: vec![T::zero(); p.len()],
            })
            .collect();
        Self { cfg, t: 0, moments }
    }

    /// Applies one update using the gradients currently stored in `params`.
    pub fn step(&mut self, params: Vec<&mut Param<T>>) -> Result<()> {
        ensure_dim("adam", "parameter tensors", self.moments.len(), params.len())?;
        self.t += 1;
        for (p, m) in params.into_iter().zip(self.moments.iter_mut()) {
            adam_step(&mut p.value, &p.grad, m, self.t, &self.cfg)?;
        }
        Ok(())
    }
}
