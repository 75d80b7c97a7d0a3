use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{LayerParams, Param};
use super::tensor::{Scalar, Shape, Tensor};
use crate::error::{ensure_dim, Error, Result};

/// Geometry of a 1D convolution over the time axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    /// Stride-1 convolution with same-padding (`kernel / 2`).
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::config("kernel", format!("must be odd, got {}", self.kernel)));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("channels", "must be at least 1"));
        }
        Ok(())
    }

    /// `floor((T + 2·padding − kernel) / stride) + 1`, or `None` when the
    /// padded input is shorter than the kernel.
    pub fn output_len(&self, time: usize) -> Option<usize> {
        let padded = time + 2 * self.padding;
        (padded >= self.kernel).then(|| (padded - self.kernel) / self.stride + 1)
    }

    pub fn weight_dims(&self) -> [usize; 3] {
        [self.out_channels, self.in_channels, self.kernel]
    }

    /// Output positions `to` whose tap `k` reads a real (unpadded) input sample.
    #[inline]
    fn valid_range(&self, k: usize, time: usize, out_len: usize) -> std::ops::Range<usize> {
        // input index = to * stride + k - padding must lie in [0, time)
        let lo = if self.padding > k {
            (self.padding - k).div_ceil(self.stride)
        } else {
            0
        };
        let hi = if time + self.padding > k {
            ((time - 1 + self.padding - k) / self.stride + 1).min(out_len)
        } else {
            0
        };
        lo..hi.max(lo)
    }
}

fn check_params<T: Scalar>(op: &'static str, p: &LayerParams<T>, spec: &ConvSpec) -> Result<()> {
    let [o, i, k] = spec.weight_dims();
    ensure_dim(op, "weight length", o * i * k, p.weight.len())?;
    if let Some(b) = &p.bias {
        ensure_dim(op, "bias length", o, b.len())?;
    }
    Ok(())
}

/// Cross-correlation with zero padding: no kernel flip.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, p: &LayerParams<T>, spec: &ConvSpec) -> Result<Tensor<T>> {
    ensure_dim("conv1d", "in_channels", spec.in_channels, x.channels())?;
    check_params("conv1d", p, spec)?;
    let time = x.time();
    let out_len = spec
        .output_len(time)
        .ok_or_else(|| Error::shape("conv1d", "time", spec.kernel, time + 2 * spec.padding))?;
    let mut out = Tensor::zeros(Shape::new(x.batch(), spec.out_channels, out_len));
    let w = &p.weight.value;
    let kernel = spec.kernel;
    for b in 0..x.batch() {
        for oc in 0..spec.out_channels {
            let bias = p.bias.as_ref().map_or(T::zero(), |bp| bp.value[oc]);
            let row = out.row_mut(b, oc);
            row.iter_mut().for_each(|v| *v = bias);
            for ic in 0..spec.in_channels {
                let xr = x.row(b, ic);
                for k in 0..kernel {
                    let wv = w[(oc * spec.in_channels + ic) * kernel + k];
                    let range = spec.valid_range(k, time, out_len);
                    if range.is_empty() {
                        continue;
                    }
                    if spec.stride == 1 {
                        let shift = range.start + k - spec.padding;
                        let src = &xr[shift..shift + range.len()];
                        for (o, &xv) in row[range].iter_mut().zip(src) {
                            *o = *o + wv * xv;
                        }
                    } else {
                        for to in range {
                            let ti = to * spec.stride + k - spec.padding;
                            row[to] = row[to] + wv * xr[ti];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Returns the gradient with respect to the input and accumulates weight
/// and bias gradients into `p`.
pub fn conv1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    p: &mut LayerParams<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    ensure_dim("conv1d_backward", "in_channels", spec.in_channels, saved_input.channels())?;
    check_params("conv1d_backward", p, spec)?;
    let time = saved_input.time();
    let out_len = spec
        .output_len(time)
        .ok_or_else(|| Error::shape("conv1d_backward", "time", spec.kernel, time + 2 * spec.padding))?;
    grad_out.ensure_shape(
        "conv1d_backward",
        Shape::new(saved_input.batch(), spec.out_channels, out_len),
    )?;

    let kernel = spec.kernel;
    let mut grad_in = Tensor::zeros(saved_input.shape());
    let LayerParams { weight, bias } = p;
    for b in 0..saved_input.batch() {
        for oc in 0..spec.out_channels {
            let g = grad_out.row(b, oc);
            if let Some(bias) = bias.as_mut() {
                bias.grad[oc] = bias.grad[oc] + g.iter().copied().sum::<T>();
            }
            for ic in 0..spec.in_channels {
                let xr = saved_input.row(b, ic);
                let base = (oc * spec.in_channels + ic) * kernel;
                for k in 0..kernel {
                    let range = spec.valid_range(k, time, out_len);
                    if range.is_empty() {
                        continue;
                    }
                    let wv = weight.value[base + k];
                    let mut gw = T::zero();
                    if spec.stride == 1 {
                        let shift = range.start + k - spec.padding;
                        let len = range.len();
                        let gslice = &g[range];
                        for (&gv, &xv) in gslice.iter().zip(&xr[shift..shift + len]) {
                            gw = gw + gv * xv;
                        }
                        let gi = &mut grad_in.row_mut(b, ic)[shift..shift + len];
                        for (dst, &gv) in gi.iter_mut().zip(gslice) {
                            *dst = *dst + wv * gv;
                        }
                    } else {
                        let gi = grad_in.row_mut(b, ic);
                        for to in range {
                            let ti = to * spec.stride + k - spec.padding;
                            gw = gw + g[to] * xr[ti];
                            gi[ti] = gi[ti] + wv * g[to];
                        }
                    }
                    weight.grad[base + k] = weight.grad[base + k] + gw;
                }
            }
        }
    }
    Ok(grad_in)
}

/// A convolution layer: geometry plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<T = f32> {
    pub spec: ConvSpec,
    pub params: LayerParams<T>,
}

impl<T: Scalar> Conv1d<T> {
    /// Glorot-initialised weights, zero bias.
    pub fn new<R: Rng + ?Sized>(spec: ConvSpec, with_bias: bool, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.in_channels * spec.kernel;
        let fan_out = spec.out_channels * spec.kernel;
        Ok(Self {
            spec,
            params: LayerParams {
                weight: Param::glorot(&spec.weight_dims(), fan_in, fan_out, rng),
                bias: with_bias.then(|| Param::zeros(&[spec.out_channels])),
            },
        })
    }

    /// 1×1 (or k×1) convolution whose weight is the identity on channels at
    /// the centre tap. Mostly useful in tests and hand-evaluated examples.
    pub fn identity(channels: usize, kernel: usize) -> Self {
        let spec = ConvSpec::same(channels, channels, kernel);
        let mut w = Param::zeros(&spec.weight_dims());
        for c in 0..channels {
            w.value[(c * channels + c) * kernel + kernel / 2] = T::one();
        }
        Self {
            spec,
            params: LayerParams {
                weight: w,
                bias: Some(Param::zeros(&[channels])),
            },
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv1d_forward(x, &self.params, &self.spec)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>, saved_input: &Tensor<T>) -> Result<Tensor<T>> {
        conv1d_backward(grad_out, saved_input, &mut self.params, &self.spec)
    }

    pub fn cast<U: Scalar>(&self) -> Conv1d<U> {
        Conv1d {
            spec: self.spec,
            params: self.params.cast(),
        }
    }
}

impl<T: Scalar> super::param::Parameterized<T> for Conv1d<T> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        self.params.visit(prefix, out);
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.params.visit_mut(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weight: Vec<f32>, bias: f32) -> LayerParams<f32> {
        let k = weight.len();
        LayerParams {
            weight: Param::from_values(&[1, 1, k], weight),
            bias: Some(Param::from_values(&[1], vec![bias])),
        }
    }

    fn series(v: &[f32]) -> Tensor<f32> {
        Tensor::from_vec(Shape::new(1, 1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let y = conv1d_forward(&series(&[1.0, 2.0, 3.0]), &single(vec![1.0], 0.0), &ConvSpec::same(1, 1, 1)).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn box_kernel_same_padding() {
        let y = conv1d_forward(
            &series(&[1.0, 2.0, 3.0]),
            &single(vec![1.0, 1.0, 1.0], 0.0),
            &ConvSpec::same(1, 1, 3),
        )
        .unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn strided_pointwise() {
        let spec = ConvSpec::same(1, 1, 1).with_stride(2);
        let y = conv1d_forward(&series(&[1.0, 2.0, 3.0, 4.0]), &single(vec![2.0], 1.0), &spec).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn output_len_formula() {
        let spec = ConvSpec::same(1, 1, 3).with_stride(2);
        assert_eq!(spec.output_len(90), Some(45));
        assert_eq!(spec.output_len(45), Some(23));
        assert_eq!(ConvSpec::same(1, 1, 5).with_padding(0).output_len(3), None);
    }

    #[test]
    fn channel_mismatch_names_dimension() {
        let err = conv1d_forward(&series(&[1.0]), &single(vec![1.0], 0.0), &ConvSpec::same(2, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("in_channels"), "{err}");
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvSpec::same(1, 1, 2).validate().is_err());
    }

    #[test]
    fn identity_backward_passes_gradient_through() {
        let mut p = single(vec![1.0], 0.0);
        let g = series(&[0.5, -1.0, 2.0]);
        let gi = conv1d_backward(&g, &series(&[1.0, 2.0, 3.0]), &mut p, &ConvSpec::same(1, 1, 1)).unwrap();
        assert_eq!(gi, g);
    }

    #[test]
    fn bias_gradient_sums_over_batch_and_time() {
        let spec = ConvSpec::same(2, 3, 3);
        let mut rng = rand::rng();
        let mut conv = Conv1d::<f64>::new(spec, true, &mut rng).unwrap();
        let x = Tensor::from_vec(Shape::new(2, 2, 5), (0..20).map(|v| v as f64 * 0.1).collect()).unwrap();
        let g = Tensor::from_vec(Shape::new(2, 3, 5), (0..30).map(|v| (v as f64).sin()).collect()).unwrap();
        conv.backward(&g, &x).unwrap();
        let bias = conv.params.bias.as_ref().unwrap();
        for oc in 0..3 {
            let expected: f64 = (0..2).map(|b| g.row(b, oc).iter().sum::<f64>()).sum();
            assert!((bias.grad[oc] - expected).abs() < 1e-12);
        }
    }
}
