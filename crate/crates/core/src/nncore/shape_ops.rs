use super::param::{LayerParams, Param};
use super::tensor::{Scalar, Shape, Tensor};
use crate::error::{ensure_dim, Error, Result};

/// Mean over time: `(batch, channels, T) -> (batch, channels, 1)`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.time() == 0 {
        return Err(Error::Empty { what: "global_avg_pool" });
    }
    let n = T::from_usize(x.time()).unwrap();
    let mut out = Tensor::zeros(Shape::new(x.batch(), x.channels(), 1));
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            out.set(b, c, 0, x.row(b, c).iter().copied().sum::<T>() / n);
        }
    }
    Ok(out)
}

pub fn global_avg_pool_backward<T: Scalar>(grad_out: &Tensor<T>, input_shape: Shape) -> Result<Tensor<T>> {
    grad_out.ensure_shape(
        "global_avg_pool_backward",
        Shape::new(input_shape.batch, input_shape.channels, 1),
    )?;
    let n = T::from_usize(input_shape.time).unwrap();
    let mut out = Tensor::zeros(input_shape);
    for b in 0..input_shape.batch {
        for c in 0..input_shape.channels {
            let g = grad_out.get(b, c, 0) / n;
            out.row_mut(b, c).iter_mut().for_each(|v| *v = g);
        }
    }
    Ok(out)
}

/// Dense map on the flattened `channels × time` features of each sample.
/// Weight is `(out_features, in_features)`; output is `(batch, out_features, 1)`.
pub fn linear_forward<T: Scalar>(x: &Tensor<T>, p: &LayerParams<T>) -> Result<Tensor<T>> {
    let in_features = x.channels() * x.time();
    let dims = p.weight.dims();
    ensure_dim("linear", "in_features", dims[1], in_features)?;
    let out_features = dims[0];
    let mut out = Tensor::zeros(Shape::new(x.batch(), out_features, 1));
    for b in 0..x.batch() {
        let xs = x.sample_slice(b);
        for o in 0..out_features {
            let w = &p.weight.value[o * in_features..(o + 1) * in_features];
            let dot: T = w.iter().zip(xs).map(|(&a, &b)| a * b).sum();
            let bias = p.bias.as_ref().map_or(T::zero(), |bp| bp.value[o]);
            out.set(b, o, 0, dot + bias);
        }
    }
    Ok(out)
}

pub fn linear_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    p: &mut LayerParams<T>,
) -> Result<Tensor<T>> {
    let in_features = saved_input.channels() * saved_input.time();
    let out_features = p.weight.dims()[0];
    ensure_dim("linear_backward", "in_features", p.weight.dims()[1], in_features)?;
    grad_out.ensure_shape(
        "linear_backward",
        Shape::new(saved_input.batch(), out_features, 1),
    )?;
    let mut grad_in = Tensor::zeros(saved_input.shape());
    for b in 0..saved_input.batch() {
        let xs = saved_input.sample_slice(b);
        let gi_start = b * in_features;
        for o in 0..out_features {
            let g = grad_out.get(b, o, 0);
            if let Some(bias) = p.bias.as_mut() {
                bias.grad[o] = bias.grad[o] + g;
            }
            let row = o * in_features;
            for (i, &xi) in xs.iter().enumerate().take(in_features) {
                p.weight.grad[row + i] = p.weight.grad[row + i] + g * xi;
                let gi = &mut grad_in.data_mut()[gi_start + i];
                *gi = *gi + g * p.weight.value[row + i];
            }
        }
    }
    Ok(grad_in)
}

/// Glorot-initialised dense layer with zero bias.
pub fn linear_params<T: Scalar, R: rand::Rng + ?Sized>(
    in_features: usize,
    out_features: usize,
    rng: &mut R,
) -> LayerParams<T> {
    LayerParams {
        weight: Param::glorot(&[out_features, in_features], in_features, out_features, rng),
        bias: Some(Param::zeros(&[out_features])),
    }
}

/// Splits channels into `s` equal consecutive subsets.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Vec<Tensor<T>>> {
    if s == 0 || !x.channels().is_multiple_of(s) {
        return Err(Error::NotDivisible {
            op: "split_channels",
            channels: x.channels(),
            scales: s,
        });
    }
    let w = x.channels() / s;
    let mut parts: Vec<Tensor<T>> = (0..s)
        .map(|_| Tensor::zeros(Shape::new(x.batch(), w, x.time())))
        .collect();
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            parts[c / w].row_mut(b, c % w).copy_from_slice(x.row(b, c));
        }
    }
    Ok(parts)
}

/// Inverse of [`split_channels`]; subsets may have differing widths.
pub fn concat_channels<T: Scalar>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or(Error::Empty { what: "concat_channels" })?.shape();
    let mut channels = 0;
    for p in parts {
        ensure_dim("concat_channels", "batch", first.batch, p.batch())?;
        ensure_dim("concat_channels", "time", first.time, p.time())?;
        channels += p.channels();
    }
    let mut out = Tensor::zeros(Shape::new(first.batch, channels, first.time));
    for b in 0..first.batch {
        let mut offset = 0;
        for p in parts {
            for c in 0..p.channels() {
                out.row_mut(b, offset + c).copy_from_slice(p.row(b, c));
            }
            offset += p.channels();
        }
    }
    Ok(out)
}
