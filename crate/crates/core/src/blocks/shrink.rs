use crate::attention::{eca_gate, eca_gate_backward, EcaParams};
use crate::error::Result;
use crate::nncore::{kink, soft_threshold, soft_threshold_backward, Scalar, Shape, Tensor};

/// Values saved by [`shrink_forward`].
#[derive(Clone, Debug)]
pub struct ShrinkCache<T> {
    pub input: Tensor<T>,
    /// `mean_t |u|` per `(batch, channel)`, shaped `(batch, channels, 1)`.
    pub magnitude: Tensor<T>,
    pub gate: Tensor<T>,
    /// One threshold per `(batch, channel)`.
    pub tau: Vec<T>,
}

fn mean_abs<T: Scalar>(u: &Tensor<T>) -> Tensor<T> {
    let n = T::from_usize(u.time().max(1)).unwrap();
    let mut d = Tensor::zeros(Shape::new(u.batch(), u.channels(), 1));
    for b in 0..u.batch() {
        for c in 0..u.channels() {
            d.set(b, c, 0, u.row(b, c).iter().map(|v| v.abs()).sum::<T>() / n);
        }
    }
    d
}

/// `τ[b,c] = gate[b,c] · mean_t |u[b,c,t]|`, where the gate is ECA applied
/// to the mean-magnitude descriptor.
pub fn dm_thresholds<T: Scalar>(u: &Tensor<T>, attn: &EcaParams<T>) -> Result<Vec<T>> {
    let magnitude = mean_abs(u);
    let gate = eca_gate(&magnitude, attn)?;
    Ok(gate.data().iter().zip(magnitude.data()).map(|(&g, &d)| g * d).collect())
}

/// Channel-wise soft thresholding with ECA-derived thresholds.
pub fn shrink_forward<T: Scalar>(u: &Tensor<T>, attn: &EcaParams<T>) -> Result<(Tensor<T>, ShrinkCache<T>)> {
    if kink::is_recording() {
        kink::record(u.data().iter().map(|&v| u8::from(v > T::zero()) + 2 * u8::from(v < T::zero())));
    }
    let magnitude = mean_abs(u);
    let gate = eca_gate(&magnitude, attn)?;
    let tau: Vec<T> = gate.data().iter().zip(magnitude.data()).map(|(&g, &d)| g * d).collect();
    let v = soft_threshold(u, &tau)?;
    Ok((
        v,
        ShrinkCache {
            input: u.clone(),
            magnitude,
            gate,
            tau,
        },
    ))
}

pub fn shrink_backward<T: Scalar>(grad_out: &Tensor<T>, cache: &ShrinkCache<T>, attn: &mut EcaParams<T>) -> Result<Tensor<T>> {
    let u = &cache.input;
    let (mut grad_u, grad_tau) = soft_threshold_backward(grad_out, u, &cache.tau)?;
    let shape = cache.magnitude.shape();
    let mut grad_gate = Tensor::zeros(shape);
    let mut grad_mag = Tensor::zeros(shape);
    for (i, &gt) in grad_tau.iter().enumerate() {
        grad_gate.data_mut()[i] = gt * cache.magnitude.data()[i];
        grad_mag.data_mut()[i] = gt * cache.gate.data()[i];
    }
    grad_mag.add_assign(&eca_gate_backward(&grad_gate, &cache.magnitude, &cache.gate, attn)?)?;
    let n = T::from_usize(u.time().max(1)).unwrap();
    for b in 0..u.batch() {
        for c in 0..u.channels() {
            let gd = grad_mag.get(b, c, 0) / n;
            let xs = u.row(b, c);
            for (dst, &x) in grad_u.row_mut(b, c).iter_mut().zip(xs) {
                if x > T::zero() {
                    *dst = *dst + gd;
                } else if x < T::zero() {
                    *dst = *dst - gd;
                }
            }
        }
    }
    Ok(grad_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::KernelRounding;

    #[test]
    fn thresholds_of_zero_features_vanish() {
        let attn = EcaParams::<f32>::zeroed(3, 2, 1, KernelRounding::FloorOdd);
        let tau = dm_thresholds(&Tensor::zeros(Shape::new(2, 3, 5)), &attn).unwrap();
        assert_eq!(tau, vec![0.0; 6]);
    }

    #[test]
    fn half_gate_halves_mean_magnitude() {
        let attn = EcaParams::<f32>::zeroed(1, 2, 1, KernelRounding::FloorOdd);
        let u = Tensor::from_vec(Shape::new(1, 1, 4), vec![4.0, -4.0, 2.0, -6.0]).unwrap();
        assert_eq!(dm_thresholds(&u, &attn).unwrap(), vec![2.0]);
    }
}
