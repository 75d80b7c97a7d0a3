use super::kink;
use super::tensor::{Scalar, Tensor};
use crate::error::Result;

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    if kink::is_recording() {
        kink::record(x.data().iter().map(|&v| u8::from(v > T::zero())));
    }
    x.map(|v| v.max(T::zero()))
}

/// Subgradient 0 at the origin.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, saved_input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.zip_map(saved_input, |g, x| if x > T::zero() { g } else { T::zero() })
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_backward<T: Scalar>(grad_out: &Tensor<T>, saved_output: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.zip_map(saved_output, |g, s| g * s * (T::one() - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Shape;

    #[test]
    fn sigmoid_symmetry_point() {
        assert_eq!(sigmoid_scalar(0.0f32), 0.5);
        assert!((sigmoid_scalar(3.0f64) + sigmoid_scalar(-3.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid_scalar(-1000.0f32).is_finite());
        assert_eq!(sigmoid_scalar(1000.0f32), 1.0);
    }

    #[test]
    fn relu_clamps_and_masks_gradient() {
        let x = Tensor::from_vec(Shape::new(1, 1, 4), vec![-1.0f32, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 0.5, 2.0]);
        let g = Tensor::full(x.shape(), 1.0);
        assert_eq!(relu_backward(&g, &x).unwrap().data(), &[0.0, 0.0, 1.0, 1.0]);
    }
}
