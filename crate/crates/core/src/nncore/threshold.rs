use super::kink;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// How a threshold array maps onto a tensor's `(batch, channel)` rows.
fn tau_index<T: Scalar>(x: &Tensor<T>, tau: &[T]) -> Result<impl Fn(usize, usize) -> usize> {
    let channels = x.channels();
    let per_sample = if tau.len() == channels {
        false
    } else if tau.len() == x.batch() * channels {
        true
    } else {
        return Err(Error::shape("soft_threshold", "tau length", channels, tau.len()));
    };
    Ok(move |b: usize, c: usize| if per_sample { b * channels + c } else { c })
}

/// Branch taken for `x` under threshold `tau`: 0 dead zone, 1 above, 2 below.
/// `|x| == tau` falls in the dead zone.
#[inline]
fn branch<T: Scalar>(x: T, tau: T) -> u8 {
    if x > tau {
        1
    } else if x < -tau {
        2
    } else {
        0
    }
}

/// Soft thresholding `y = sign(x) · max(|x| − τ, 0)`.
///
/// `tau` holds one threshold per channel (shared across the batch) or one
/// per `(batch, channel)` pair.
pub fn soft_threshold<T: Scalar>(x: &Tensor<T>, tau: &[T]) -> Result<Tensor<T>> {
    let idx = tau_index(x, tau)?;
    if let Some((i, &v)) = tau.iter().enumerate().find(|(_, v)| v.is_nan() || **v < T::zero()) {
        return Err(Error::NegativeThreshold {
            channel: i % x.channels(),
            value: v.as_f64(),
        });
    }
    let mut y = Tensor::zeros(x.shape());
    let recording = kink::is_recording();
    let mut pattern = Vec::new();
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            let t = tau[idx(b, c)];
            for (dst, &v) in y.row_mut(b, c).iter_mut().zip(x.row(b, c)) {
                let br = branch(v, t);
                *dst = match br {
                    1 => v - t,
                    2 => v + t,
                    _ => T::zero(),
                };
                if recording {
                    pattern.push(br);
                }
            }
        }
    }
    if recording {
        kink::record(pattern.into_iter());
    }
    Ok(y)
}

/// Subgradient of [`soft_threshold`]. Returns `(grad_x, grad_tau)` where
/// `grad_tau` has the same layout as `tau`.
pub fn soft_threshold_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    tau: &[T],
) -> Result<(Tensor<T>, Vec<T>)> {
    grad_out.ensure_same_shape("soft_threshold_backward", saved_input)?;
    let idx = tau_index(saved_input, tau)?;
    let mut grad_x = Tensor::zeros(saved_input.shape());
    let mut grad_tau = vec![T::zero(); tau.len()];
    for b in 0..saved_input.batch() {
        for c in 0..saved_input.channels() {
            let ti = idx(b, c);
            let t = tau[ti];
            let g = grad_out.row(b, c);
            let xs = saved_input.row(b, c);
            let gx = grad_x.row_mut(b, c);
            let mut acc = T::zero();
            for i in 0..xs.len() {
                match branch(xs[i], t) {
                    1 => {
                        gx[i] = g[i];
                        acc = acc - g[i];
                    }
                    2 => {
                        gx[i] = g[i];
                        acc = acc + g[i];
                    }
                    _ => {}
                }
            }
            grad_tau[ti] = grad_tau[ti] + acc;
        }
    }
    Ok((grad_x, grad_tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Shape;

    fn scalar(v: f32) -> Tensor<f32> {
        Tensor::from_vec(Shape::new(1, 1, 1), vec![v]).unwrap()
    }

    #[test]
    fn three_branches() {
        assert_eq!(soft_threshold(&scalar(5.0), &[2.0]).unwrap().data(), &[3.0]);
        assert_eq!(soft_threshold(&scalar(0.5), &[1.0]).unwrap().data(), &[0.0]);
        assert_eq!(soft_threshold(&scalar(-3.0), &[1.0]).unwrap().data(), &[-2.0]);
    }

    #[test]
    fn boundary_is_dead_zone() {
        assert_eq!(soft_threshold(&scalar(1.0), &[1.0]).unwrap().data(), &[0.0]);
        let (gx, gt) = soft_threshold_backward(&scalar(1.0), &scalar(-1.0), &[1.0]).unwrap();
        assert_eq!(gx.data(), &[0.0]);
        assert_eq!(gt, vec![0.0]);
    }

    #[test]
    fn branch_derivatives() {
        let (gx, gt) = soft_threshold_backward(&scalar(1.0), &scalar(5.0), &[2.0]).unwrap();
        assert_eq!((gx.data()[0], gt[0]), (1.0, -1.0));
        let (gx, gt) = soft_threshold_backward(&scalar(1.0), &scalar(0.5), &[1.0]).unwrap();
        assert_eq!((gx.data()[0], gt[0]), (0.0, 0.0));
        let (gx, gt) = soft_threshold_backward(&scalar(1.0), &scalar(-3.0), &[1.0]).unwrap();
        assert_eq!((gx.data()[0], gt[0]), (1.0, 1.0));
    }

    #[test]
    fn negative_tau_rejected() {
        let err = soft_threshold(&scalar(1.0), &[-0.1]).unwrap_err();
        assert!(matches!(err, Error::NegativeThreshold { channel: 0, .. }));
    }

    #[test]
    fn per_sample_thresholds() {
        let x = Tensor::from_vec(Shape::new(2, 1, 2), vec![3.0f32, -3.0, 3.0, -3.0]).unwrap();
        let y = soft_threshold(&x, &[1.0, 2.0]).unwrap();
        assert_eq!(y.data(), &[2.0, -2.0, 1.0, -1.0]);
        assert!(soft_threshold(&x, &[1.0, 2.0, 3.0]).is_err());
    }
}
