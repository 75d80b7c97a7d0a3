//! Efficient channel attention: a `k`-tap convolution across the pooled
//! channel descriptor, squashed by a sigmoid into a per-channel gate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result};
use crate::nncore::{
    global_avg_pool, global_avg_pool_backward, sigmoid_scalar, Param, Parameterized, Scalar, Shape, Tensor,
};

/// How the real-valued kernel estimate is turned into an odd size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelRounding {
    /// Largest odd integer not above the estimate, at least 1.
    #[default]
    FloorOdd,
    /// Truncate, then bump even results up by one (the usual ECA code path).
    NearestOddUp,
}

impl std::str::FromStr for KernelRounding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "floor-odd" => Ok(Self::FloorOdd),
            "nearest-odd-up" => Ok(Self::NearestOddUp),
            other => Err(format!("unknown rounding `{other}` (expected floor-odd or nearest-odd-up)")),
        }
    }
}

/// Hyperparameters shared by every ECA instance in a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcaSettings {
    pub gamma: u32,
    pub b: i32,
    pub rounding: KernelRounding,
}

impl Default for EcaSettings {
    fn default() -> Self {
        Self {
            gamma: 2,
            b: 1,
            rounding: KernelRounding::FloorOdd,
        }
    }
}

impl EcaSettings {
    pub fn build<T: Scalar, R: Rng + ?Sized>(&self, channels: usize, rng: &mut R) -> EcaParams<T> {
        EcaParams::new(channels, self.gamma, self.b, self.rounding, rng)
    }

    pub fn zeroed<T: Scalar>(&self, channels: usize) -> EcaParams<T> {
        EcaParams::zeroed(channels, self.gamma, self.b, self.rounding)
    }
}

/// Adaptive kernel size `|log2(C)/γ + b/γ|` rounded down to an odd number.
pub fn eca_kernel_size(channels: usize, gamma: u32, b: i32) -> usize {
    eca_kernel_size_with(channels, gamma, b, KernelRounding::FloorOdd)
}

pub fn eca_kernel_size_with(channels: usize, gamma: u32, b: i32, rounding: KernelRounding) -> usize {
    let gamma = f64::from(gamma.max(1));
    let t = ((channels.max(1) as f64).log2() / gamma + f64::from(b) / gamma).abs();
    let whole = t.floor() as usize;
    match rounding {
        KernelRounding::FloorOdd => {
            let odd = if whole % 2 == 1 { whole } else { whole.saturating_sub(1) };
            odd.max(1)
        }
        KernelRounding::NearestOddUp => {
            if whole % 2 == 1 {
                whole
            } else {
                whole + 1
            }
        }
    }
}

/// Parameters of one ECA instance. Its whole learnable budget is the `k`
/// kernel taps; the descriptor convolution carries no bias.
#[derive(Clone, Debug, PartialEq)]
pub struct EcaParams<T = f32> {
    pub gamma: u32,
    pub b: i32,
    pub rounding: KernelRounding,
    pub channels: usize,
    pub k: usize,
    pub weight: Param<T>,
    /// Replaces the computed gate with a constant. Used to probe ablations
    /// (e.g. a gate of exactly 1 turns attention into the identity); never
    /// serialised.
    pub gate_override: Option<T>,
}

impl<T: Scalar> EcaParams<T> {
    pub fn new<R: Rng + ?Sized>(channels: usize, gamma: u32, b: i32, rounding: KernelRounding, rng: &mut R) -> Self {
        let k = eca_kernel_size_with(channels, gamma, b, rounding);
        Self {
            gamma,
            b,
            rounding,
            channels,
            k,
            weight: Param::glorot(&[k], k, k, rng),
            gate_override: None,
        }
    }

    /// Zero kernel: every gate is exactly 0.5.
    pub fn zeroed(channels: usize, gamma: u32, b: i32, rounding: KernelRounding) -> Self {
        let k = eca_kernel_size_with(channels, gamma, b, rounding);
        Self {
            gamma,
            b,
            rounding,
            channels,
            k,
            weight: Param::zeros(&[k]),
            gate_override: None,
        }
    }

    pub fn cast<U: Scalar>(&self) -> EcaParams<U> {
        EcaParams {
            gamma: self.gamma,
            b: self.b,
            rounding: self.rounding,
            channels: self.channels,
            k: self.k,
            weight: self.weight.cast(),
            gate_override: self.gate_override.map(|g| U::from_f64_lossy(g.as_f64())),
        }
    }
}

impl<T: Scalar> Parameterized<T> for EcaParams<T> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
    }
}

/// Gate for a `(batch, channels, 1)` channel descriptor.
pub fn eca_gate<T: Scalar>(descriptor: &Tensor<T>, p: &EcaParams<T>) -> Result<Tensor<T>> {
    ensure_dim("eca", "channels", p.channels, descriptor.channels())?;
    ensure_dim("eca", "descriptor time", 1, descriptor.time())?;
    if let Some(g) = p.gate_override {
        return Ok(Tensor::full(descriptor.shape(), g));
    }
    let channels = p.channels;
    let half = p.k / 2;
    let mut gate = Tensor::zeros(descriptor.shape());
    for b in 0..descriptor.batch() {
        let d = descriptor.sample_slice(b);
        for c in 0..channels {
            let mut a = T::zero();
            for (j, &w) in p.weight.value.iter().enumerate() {
                // tap j reads channel c + j - half
                if let Some(src) = (c + j).checked_sub(half).filter(|&s| s < channels) {
                    a = a + w * d[src];
                }
            }
            gate.set(b, c, 0, sigmoid_scalar(a));
        }
    }
    Ok(gate)
}

/// Backward through sigmoid and the channel convolution. Accumulates the
/// kernel gradient and returns the gradient with respect to the descriptor.
pub fn eca_gate_backward<T: Scalar>(
    grad_gate: &Tensor<T>,
    descriptor: &Tensor<T>,
    gate: &Tensor<T>,
    p: &mut EcaParams<T>,
) -> Result<Tensor<T>> {
    grad_gate.ensure_same_shape("eca_gate_backward", descriptor)?;
    gate.ensure_same_shape("eca_gate_backward", descriptor)?;
    let mut grad_desc = Tensor::zeros(descriptor.shape());
    if p.gate_override.is_some() {
        return Ok(grad_desc);
    }
    let channels = p.channels;
    let half = p.k / 2;
    for b in 0..descriptor.batch() {
        for c in 0..channels {
            let g = gate.get(b, c, 0);
            let ga = grad_gate.get(b, c, 0) * g * (T::one() - g);
            for j in 0..p.k {
                if let Some(src) = (c + j).checked_sub(half).filter(|&s| s < channels) {
                    p.weight.grad[j] = p.weight.grad[j] + ga * descriptor.get(b, src, 0);
                    let gd = grad_desc.get(b, src, 0) + ga * p.weight.value[j];
                    grad_desc.set(b, src, 0, gd);
                }
            }
        }
    }
    Ok(grad_desc)
}

/// Values saved by [`eca_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct EcaCache<T> {
    pub input: Tensor<T>,
    pub descriptor: Tensor<T>,
    /// `(batch, channels, 1)`, every entry in `(0, 1)` unless overridden.
    pub gate: Tensor<T>,
}

/// Pool over time, gate, and rescale each channel: `y[b,c,t] = x[b,c,t] · gate[b,c]`.
pub fn eca_forward<T: Scalar>(x: &Tensor<T>, p: &EcaParams<T>) -> Result<(Tensor<T>, EcaCache<T>)> {
    ensure_dim("eca", "channels", p.channels, x.channels())?;
    let descriptor = global_avg_pool(x)?;
    let gate = eca_gate(&descriptor, p)?;
    let mut y = x.clone();
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            let g = gate.get(b, c, 0);
            y.row_mut(b, c).iter_mut().for_each(|v| *v = *v * g);
        }
    }
    Ok((
        y,
        EcaCache {
            input: x.clone(),
            descriptor,
            gate,
        },
    ))
}

pub fn eca_backward<T: Scalar>(grad_out: &Tensor<T>, saved: &EcaCache<T>, p: &mut EcaParams<T>) -> Result<Tensor<T>> {
    let x = &saved.input;
    grad_out.ensure_same_shape("eca_backward", x)?;
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_gate = Tensor::zeros(Shape::new(x.batch(), x.channels(), 1));
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            let g = saved.gate.get(b, c, 0);
            let go = grad_out.row(b, c);
            let xr = x.row(b, c);
            let mut gg = T::zero();
            for (dst, (&gv, &xv)) in grad_x.row_mut(b, c).iter_mut().zip(go.iter().zip(xr)) {
                *dst = gv * g;
                gg = gg + gv * xv;
            }
            grad_gate.set(b, c, 0, gg);
        }
    }
    let grad_desc = eca_gate_backward(&grad_gate, &saved.descriptor, &saved.gate, p)?;
    grad_x.add_assign(&global_avg_pool_backward(&grad_desc, x.shape())?)?;
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_size_examples() {
        assert_eq!(eca_kernel_size(2, 2, 1), 1);
        assert_eq!(eca_kernel_size(64, 2, 1), 3);
        assert_eq!(eca_kernel_size(256, 2, 1), 3);
        assert_eq!(eca_kernel_size(1, 2, 1), 1);
    }

    #[test]
    fn nearest_odd_up_rounding() {
        assert_eq!(eca_kernel_size_with(64, 2, 1, KernelRounding::NearestOddUp), 3);
        assert_eq!(eca_kernel_size_with(256, 2, 1, KernelRounding::NearestOddUp), 5);
        assert_eq!(eca_kernel_size_with(2, 2, 1, KernelRounding::NearestOddUp), 1);
    }

    #[test]
    fn zero_kernel_halves_input() {
        let p = EcaParams::<f32>::zeroed(4, 2, 1, KernelRounding::FloorOdd);
        let x = Tensor::from_vec(Shape::new(2, 4, 3), (0..24).map(|v| v as f32 - 7.0).collect()).unwrap();
        let (y, cache) = eca_forward(&x, &p).unwrap();
        assert!(cache.gate.data().iter().all(|&g| g == 0.5));
        assert_eq!(y, x.scale(0.5));
    }

    #[test]
    fn single_channel_degenerate() {
        let p = EcaParams::<f32>::zeroed(1, 2, 1, KernelRounding::FloorOdd);
        assert_eq!(p.k, 1);
        let x = Tensor::from_vec(Shape::new(1, 1, 4), vec![3.0, -1.0, 8.0, 0.25]).unwrap();
        assert_eq!(eca_forward(&x, &p).unwrap().0, x.scale(0.5));
    }

    #[test]
    fn channel_mismatch() {
        let p = EcaParams::<f32>::zeroed(3, 2, 1, KernelRounding::FloorOdd);
        assert!(eca_forward(&Tensor::zeros(Shape::new(1, 4, 2)), &p).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = EcaParams::<f64>::new(64, 2, 1, KernelRounding::FloorOdd, &mut rng);
        let x = Tensor::from_vec(Shape::new(2, 64, 5), (0..640).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
        let (_, cache) = eca_forward(&x, &p).unwrap();
        let gx = eca_backward(&Tensor::zeros(x.shape()), &cache, &mut p).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(p.weight.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gate_has_vanishing_weight_gradient() {
        let mut p = EcaParams::<f64>::zeroed(8, 2, 1, KernelRounding::FloorOdd);
        p.weight.value.iter_mut().for_each(|w| *w = 1e3);
        let x = Tensor::full(Shape::new(1, 8, 4), 1.0);
        let (_, cache) = eca_forward(&x, &p).unwrap();
        assert!(cache.gate.data().iter().all(|&g| g > 1.0 - 1e-12));
        eca_backward(&Tensor::full(x.shape(), 1.0), &cache, &mut p).unwrap();
        assert!(p.weight.grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn budget_is_k_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for c in [1usize, 16, 64, 300] {
            let p = EcaParams::<f32>::new(c, 2, 1, KernelRounding::FloorOdd, &mut rng);
            assert_eq!(p.param_count(), p.k);
        }
    }
}
