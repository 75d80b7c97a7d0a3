use rand::Rng;

use super::shrink::{shrink_backward, shrink_forward, ShrinkCache};
use crate::attention::{EcaParams, EcaSettings};
use crate::error::{ensure_dim, Error, Result};
use crate::nncore::{join, relu, relu_backward, Conv1d, ConvSpec, Param, Parameterized, Scalar, Tensor};

/// Decompose → threshold → reconstruct block placed between MSAP groups.
///
/// The decompose convolution (3×1, optionally strided) produces features
/// `u`; each `(sample, channel)` row is soft-thresholded at
/// `gate · mean|u|` with the gate from ECA; the result is added to the
/// shortcut. Without `threshold_attn` the block is a plain residual
/// downsampling transition.
#[derive(Clone, Debug, PartialEq)]
pub struct DmBlock<T = f32> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub decompose: Conv1d<T>,
    pub threshold_attn: Option<EcaParams<T>>,
    /// 1×1 projection, present whenever `(in, stride) != (out, 1)`.
    pub shortcut: Option<Conv1d<T>>,
}

impl<T: Scalar> DmBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        eca: &EcaSettings,
        thresholding: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if !(1..=2).contains(&stride) {
            return Err(Error::config("stride", format!("must be 1 or 2, got {stride}")));
        }
        let decompose = Conv1d::new(ConvSpec::same(in_channels, out_channels, 3).with_stride(stride), true, rng)?;
        let threshold_attn = thresholding.then(|| eca.build(out_channels, rng));
        let shortcut = if in_channels != out_channels || stride != 1 {
            Some(Conv1d::new(
                ConvSpec::same(in_channels, out_channels, 1).with_stride(stride),
                true,
                rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            in_channels,
            out_channels,
            stride,
            decompose,
            threshold_attn,
            shortcut,
        })
    }

    pub fn is_shrinking(&self) -> bool {
        self.threshold_attn.is_some()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DmCache<T>)> {
        dm_forward(x, self)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>, cache: &DmCache<T>) -> Result<Tensor<T>> {
        let x = &cache.input;
        let mut grad_x = match &mut self.shortcut {
            Some(c) => c.backward(grad_out, x)?,
            None => grad_out.clone(),
        };
        let grad_u = match (&mut self.threshold_attn, &cache.shrink) {
            (Some(attn), Some(sc)) => shrink_backward(grad_out, sc, attn)?,
            _ => grad_out.clone(),
        };
        let grad_pre = relu_backward(&grad_u, &cache.decompose_pre)?;
        grad_x.add_assign(&self.decompose.backward(&grad_pre, x)?)?;
        Ok(grad_x)
    }

    pub fn cast<U: Scalar>(&self) -> DmBlock<U> {
        DmBlock {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            stride: self.stride,
            decompose: self.decompose.cast(),
            threshold_attn: self.threshold_attn.as_ref().map(EcaParams::cast),
            shortcut: self.shortcut.as_ref().map(Conv1d::cast),
        }
    }
}

impl<T: Scalar> Parameterized<T> for DmBlock<T> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        self.decompose.collect_params(&join(prefix, "decompose"), out);
        if let Some(a) = &self.threshold_attn {
            a.collect_params(&join(prefix, "threshold_attn"), out);
        }
        if let Some(c) = &self.shortcut {
            c.collect_params(&join(prefix, "shortcut"), out);
        }
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.decompose.collect_params_mut(out);
        if let Some(a) = &mut self.threshold_attn {
            a.collect_params_mut(out);
        }
        if let Some(c) = &mut self.shortcut {
            c.collect_params_mut(out);
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmCache<T> {
    pub input: Tensor<T>,
    pub decompose_pre: Tensor<T>,
    /// Decomposed features `u` (after ReLU).
    pub features: Tensor<T>,
    pub shrink: Option<ShrinkCache<T>>,
}

pub fn dm_forward<T: Scalar>(x: &Tensor<T>, p: &DmBlock<T>) -> Result<(Tensor<T>, DmCache<T>)> {
    ensure_dim("dm", "in_channels", p.in_channels, x.channels())?;
    let decompose_pre = p.decompose.forward(x)?;
    let u = relu(&decompose_pre);
    let (v, shrink) = match &p.threshold_attn {
        Some(attn) => {
            let (v, c) = shrink_forward(&u, attn)?;
            (v, Some(c))
        }
        None => (u.clone(), None),
    };
    let out = match &p.shortcut {
        Some(c) => v.add(&c.forward(x)?)?,
        None => v.add(x)?,
    };
    Ok((
        out,
        DmCache {
            input: x.clone(),
            decompose_pre,
            features: u,
            shrink,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{LayerParams, Shape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_decompose_reduces_to_shortcut() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut block = DmBlock::<f32>::new(4, 8, 2, &EcaSettings::default(), true, &mut rng).unwrap();
        block.decompose.params.weight.value.iter_mut().for_each(|w| *w = 0.0);
        let x = Tensor::from_vec(Shape::new(2, 4, 9), (0..72).map(|v| (v as f32 * 0.7).cos()).collect()).unwrap();
        let (y, cache) = block.forward(&x).unwrap();
        assert!(cache.shrink.as_ref().unwrap().tau.iter().all(|&t| t == 0.0));
        let shortcut = block.shortcut.as_ref().unwrap().forward(&x).unwrap();
        assert_eq!(y, shortcut);
        assert_eq!(y.shape(), Shape::new(2, 8, 5));
    }

    #[test]
    fn hand_evaluated_threshold() {
        // single channel, decompose = identity tap, gate forced to 0.5 by zero ECA weights
        let eca = EcaSettings::default();
        let block = DmBlock::<f32> {
            in_channels: 1,
            out_channels: 1,
            stride: 1,
            decompose: Conv1d {
                spec: ConvSpec::same(1, 1, 3),
                params: LayerParams {
                    weight: Param::from_values(&[1, 1, 3], vec![0.0, 1.0, 0.0]),
                    bias: None,
                },
            },
            threshold_attn: Some(eca.zeroed(1)),
            shortcut: None,
        };
        let u = Tensor::from_vec(Shape::new(1, 1, 2), vec![2.0, 2.0]).unwrap();
        let (y, cache) = block.forward(&u).unwrap();
        assert_eq!(cache.shrink.as_ref().unwrap().tau, vec![1.0]);
        // v = [1, 1], plus identity shortcut
        assert_eq!(y.data(), &[3.0, 3.0]);

        // signed features straight through the shrinkage unit
        let u = Tensor::from_vec(Shape::new(1, 1, 2), vec![2.0f32, -2.0]).unwrap();
        let (v, c) = shrink_forward(&u, block.threshold_attn.as_ref().unwrap()).unwrap();
        assert_eq!(c.tau, vec![1.0]);
        assert_eq!(v.data(), &[1.0, -1.0]);
    }

    #[test]
    fn bad_stride() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(DmBlock::<f32>::new(2, 2, 3, &EcaSettings::default(), true, &mut rng).is_err());
    }
}
