use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the batch.
///
/// `logits` is `(batch, classes, 1)`. Returns the loss and
/// `(softmax − one_hot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let batch = logits.batch();
    let classes = logits.channels() * logits.time();
    if labels.len() != batch {
        return Err(Error::shape("softmax_cross_entropy", "labels", batch, labels.len()));
    }
    if batch == 0 {
        return Err(Error::Empty {
            what: "softmax_cross_entropy",
        });
    }
    let mut grad = Tensor::zeros(logits.shape());
    let inv_batch = T::one() / T::from_usize(batch).unwrap();
    let mut total = T::zero();
    for (b, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let row = logits.sample_slice(b);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        // -log softmax[label] = log z - (x_label - max)
        total = total + (z.ln() - (row[label] - max));
        let g = &mut grad.data_mut()[b * classes..(b + 1) * classes];
        for (k, (dst, e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = *e / z;
            let target = if k == label { T::one() } else { T::zero() };
            *dst = (p - target) * inv_batch;
        }
    }
    Ok((total * inv_batch, grad))
}

/// Index of the largest logit per sample; ties go to the lowest index.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    (0..logits.batch())
        .map(|b| {
            let row = logits.sample_slice(b);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Shape;

    fn logits(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(Shape::new(1, v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let (loss, grad) = softmax_cross_entropy(&logits(&[0.0, 0.0]), &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(grad.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let (loss, grad) = softmax_cross_entropy(&logits(&[1000.0, 0.0]), &[0]).unwrap();
        assert!(loss.abs() < 1e-12 && loss >= 0.0);
        assert!(grad.is_finite());
        let (loss32, _) = softmax_cross_entropy(&logits(&[1000.0, 0.0]).cast::<f32>(), &[0]).unwrap();
        assert!(loss32.is_finite() && loss32.abs() < 1e-6);
    }

    #[test]
    fn out_of_range_label() {
        let err = softmax_cross_entropy(&logits(&[0.0, 0.0]), &[2]).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 2, classes: 2 }));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let t = Tensor::from_vec(Shape::new(2, 3, 1), vec![1.0f32, 1.0, 0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_eq!(argmax_rows(&t), vec![0, 1]);
    }
}
