use rand::Rng;
use serde::{Deserialize, Serialize};

use super::shrink::{shrink_backward, shrink_forward, ShrinkCache};
use crate::attention::{eca_backward, eca_forward, EcaCache, EcaParams, EcaSettings};
use crate::error::{ensure_dim, Error, Result};
use crate::nncore::{
    concat_channels, join, relu, relu_backward, split_channels, Conv1d, ConvSpec, Param, Parameterized, Scalar,
    Tensor,
};

/// How scale branches are wired together.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsapMode {
    /// Independent branches: `y_i = K_i(x_i)`.
    Base,
    /// Chained branches without attention.
    Connected,
    /// Chained branches, each gated by its own ECA.
    #[default]
    Purified,
}

impl std::str::FromStr for MsapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Self::Base),
            "connected" => Ok(Self::Connected),
            "purified" => Ok(Self::Purified),
            other => Err(format!("unknown MSAP mode `{other}` (expected base, connected or purified)")),
        }
    }
}

/// Which previous-scale tensor joins the chained sum at scale `i > 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleFeed {
    /// `K_i(x_i) + K_{i−1}(x_{i−1}) + y_{i−1}`
    #[default]
    Output,
    /// `K_i(x_i) + K_{i−1}(x_{i−1}) + x_{i−1}`
    Input,
}

impl std::str::FromStr for ScaleFeed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "output" => Ok(Self::Output),
            "input" => Ok(Self::Input),
            other => Err(format!("unknown scale feed `{other}` (expected output or input)")),
        }
    }
}

/// Skip path around a block.
#[derive(Clone, Debug, PartialEq)]
pub enum Residual<T = f32> {
    None,
    Identity,
    Projection(Conv1d<T>),
}

impl<T: Scalar> Residual<T> {
    fn cast<U: Scalar>(&self) -> Residual<U> {
        match self {
            Residual::None => Residual::None,
            Residual::Identity => Residual::Identity,
            Residual::Projection(c) => Residual::Projection(c.cast()),
        }
    }
}

/// One multi-scale attention purification block.
///
/// `fuse_in` (1×1) maps the input to `scales · width` channels, which are
/// split into `scales` subsets. Subset 1 passes through untouched; each
/// later subset has its own 3×1 convolution and, when purifying, its own ECA.
#[derive(Clone, Debug, PartialEq)]
pub struct MsapBlock<T = f32> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub scales: usize,
    pub width: usize,
    pub mode: MsapMode,
    pub feed: ScaleFeed,
    pub fuse_in: Conv1d<T>,
    pub scale_convs: Vec<Conv1d<T>>,
    pub scale_attn: Vec<EcaParams<T>>,
    pub fuse_out: Conv1d<T>,
    pub residual: Residual<T>,
    /// In-block shrinkage after `fuse_out` (the plain-DRSN ablation).
    pub shrink: Option<EcaParams<T>>,
}

impl<T: Scalar> MsapBlock<T> {
    /// Builds a block with randomly initialised weights. ECA instances are
    /// only created when `mode` is [`MsapMode::Purified`].
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        scales: usize,
        width: usize,
        mode: MsapMode,
        feed: ScaleFeed,
        eca: &EcaSettings,
        with_shrink: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if scales < 2 {
            return Err(Error::config("scales", format!("must be at least 2, got {scales}")));
        }
        if width == 0 {
            return Err(Error::config("width", "must be at least 1"));
        }
        let inner = scales * width;
        let fuse_in = Conv1d::new(ConvSpec::same(in_channels, inner, 1), true, rng)?;
        let scale_convs = (1..scales)
            .map(|_| Conv1d::new(ConvSpec::same(width, width, 3), true, rng))
            .collect::<Result<Vec<_>>>()?;
        let scale_attn = if mode == MsapMode::Purified {
            (1..scales).map(|_| eca.build(width, rng)).collect()
        } else {
            Vec::new()
        };
        let fuse_out = Conv1d::new(ConvSpec::same(inner, out_channels, 1), true, rng)?;
        let shrink = with_shrink.then(|| eca.build(out_channels, rng));
        let residual = if in_channels == out_channels {
            Residual::Identity
        } else {
            Residual::Projection(Conv1d::new(ConvSpec::same(in_channels, out_channels, 1), true, rng)?)
        };
        Ok(Self {
            in_channels,
            out_channels,
            scales,
            width,
            mode,
            feed,
            fuse_in,
            scale_convs,
            scale_attn,
            fuse_out,
            residual,
            shrink,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, MsapCache<T>)> {
        msap_forward(x, self, self.mode)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>, cache: &MsapCache<T>) -> Result<Tensor<T>> {
        let mode = cache.mode;
        msap_backward(grad_out, cache, self, mode)
    }

    pub fn eca_count(&self) -> usize {
        self.scale_attn.len() + usize::from(self.shrink.is_some())
    }

    pub fn cast<U: Scalar>(&self) -> MsapBlock<U> {
        MsapBlock {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            scales: self.scales,
            width: self.width,
            mode: self.mode,
            feed: self.feed,
            fuse_in: self.fuse_in.cast(),
            scale_convs: self.scale_convs.iter().map(Conv1d::cast).collect(),
            scale_attn: self.scale_attn.iter().map(EcaParams::cast).collect(),
            fuse_out: self.fuse_out.cast(),
            residual: self.residual.cast(),
            shrink: self.shrink.as_ref().map(EcaParams::cast),
        }
    }
}

impl<T: Scalar> Parameterized<T> for MsapBlock<T> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        self.fuse_in.collect_params(&join(prefix, "fuse_in"), out);
        for (i, c) in self.scale_convs.iter().enumerate() {
            c.collect_params(&join(prefix, &format!("scale_conv{}", i + 2)), out);
        }
        for (i, a) in self.scale_attn.iter().enumerate() {
            a.collect_params(&join(prefix, &format!("scale_attn{}", i + 2)), out);
        }
        self.fuse_out.collect_params(&join(prefix, "fuse_out"), out);
        if let Residual::Projection(c) = &self.residual {
            c.collect_params(&join(prefix, "residual"), out);
        }
        if let Some(s) = &self.shrink {
            s.collect_params(&join(prefix, "shrink"), out);
        }
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.fuse_in.collect_params_mut(out);
        for c in &mut self.scale_convs {
            c.collect_params_mut(out);
        }
        for a in &mut self.scale_attn {
            a.collect_params_mut(out);
        }
        self.fuse_out.collect_params_mut(out);
        if let Residual::Projection(c) = &mut self.residual {
            c.collect_params_mut(out);
        }
        if let Some(s) = &mut self.shrink {
            s.collect_params_mut(out);
        }
    }
}

/// Intermediates of one MSAP forward pass. Per-scale vectors are indexed
/// from 0, so entry `i` belongs to scale `i + 1`; scale 1 has no kernel
/// output and no attention input.
#[derive(Clone, Debug)]
pub struct MsapCache<T> {
    pub mode: MsapMode,
    pub input: Tensor<T>,
    pub fuse_in_pre: Tensor<T>,
    /// `x_i`
    pub subsets: Vec<Tensor<T>>,
    pub conv_pre: Vec<Option<Tensor<T>>>,
    /// `K_i(x_i)`
    pub kernel_out: Vec<Option<Tensor<T>>>,
    /// The tensor handed to `A_i` (or used directly as `y_i` without attention).
    pub attn_in: Vec<Option<Tensor<T>>>,
    pub attn_cache: Vec<Option<EcaCache<T>>>,
    /// `y_i`
    pub outputs: Vec<Tensor<T>>,
    pub concat: Tensor<T>,
    pub fused: Tensor<T>,
    pub shrink_cache: Option<ShrinkCache<T>>,
}

/// Runs the block in `mode`, which may differ from the block's own mode as
/// long as the required attention parameters exist.
pub fn msap_forward<T: Scalar>(x: &Tensor<T>, p: &MsapBlock<T>, mode: MsapMode) -> Result<(Tensor<T>, MsapCache<T>)> {
    ensure_dim("msap", "in_channels", p.in_channels, x.channels())?;
    let s = p.scales;
    if mode == MsapMode::Purified && p.scale_attn.len() != s - 1 {
        return Err(Error::config(
            "variant",
            format!(
                "purified mode needs {} scale attention modules, block has {}",
                s - 1,
                p.scale_attn.len()
            ),
        ));
    }
    let fuse_in_pre = p.fuse_in.forward(x)?;
    ensure_dim("msap", "fuse_in channels (s·w)", s * p.width, fuse_in_pre.channels())?;
    let u = relu(&fuse_in_pre);
    let subsets = split_channels(&u, s)?;

    let mut conv_pre = vec![None; s];
    let mut kernel_out: Vec<Option<Tensor<T>>> = vec![None; s];
    let mut attn_in = vec![None; s];
    let mut attn_cache = vec![None; s];
    let mut outputs = Vec::with_capacity(s);
    outputs.push(subsets[0].clone());

    for i in 1..s {
        let pre = p.scale_convs[i - 1].forward(&subsets[i])?;
        let k = relu(&pre);
        let sum = if mode == MsapMode::Base || i == 1 {
            k.clone()
        } else {
            let prev_k = kernel_out[i - 1].as_ref().expect("scale i-1 computed");
            let carried = match p.feed {
                ScaleFeed::Output => &outputs[i - 1],
                ScaleFeed::Input => &subsets[i - 1],
            };
            k.add(prev_k)?.add(carried)?
        };
        let y = if mode == MsapMode::Purified {
            let (y, cache) = eca_forward(&sum, &p.scale_attn[i - 1])?;
            attn_cache[i] = Some(cache);
            y
        } else {
            sum.clone()
        };
        conv_pre[i] = Some(pre);
        kernel_out[i] = Some(k);
        attn_in[i] = Some(sum);
        outputs.push(y);
    }

    let concat = concat_channels(&outputs)?;
    let fused = p.fuse_out.forward(&concat)?;
    let (main, shrink_cache) = match &p.shrink {
        Some(attn) => {
            let (v, c) = shrink_forward(&fused, attn)?;
            (v, Some(c))
        }
        None => (fused.clone(), None),
    };
    let out = match &p.residual {
        Residual::None => main,
        Residual::Identity => main.add(x)?,
        Residual::Projection(c) => main.add(&c.forward(x)?)?,
    };
    Ok((
        out,
        MsapCache {
            mode,
            input: x.clone(),
            fuse_in_pre,
            subsets,
            conv_pre,
            kernel_out,
            attn_in,
            attn_cache,
            outputs,
            concat,
            fused,
            shrink_cache,
        },
    ))
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: &Tensor<T>) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(g),
        None => {
            *slot = Some(g.clone());
            Ok(())
        }
    }
}

pub(crate) fn msap_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &MsapCache<T>,
    p: &mut MsapBlock<T>,
    mode: MsapMode,
) -> Result<Tensor<T>> {
    let s = p.scales;
    let x = &cache.input;
    let mut grad_x = match &mut p.residual {
        Residual::None => Tensor::zeros(x.shape()),
        Residual::Identity => grad_out.clone(),
        Residual::Projection(c) => c.backward(grad_out, x)?,
    };
    let grad_fused = match (&mut p.shrink, &cache.shrink_cache) {
        (Some(attn), Some(sc)) => shrink_backward(grad_out, sc, attn)?,
        _ => grad_out.clone(),
    };
    let grad_concat = p.fuse_out.backward(&grad_fused, &cache.concat)?;
    let mut grad_y = split_channels(&grad_concat, s)?;
    let mut grad_k: Vec<Option<Tensor<T>>> = vec![None; s];
    let mut grad_subsets: Vec<Tensor<T>> = cache.subsets.iter().map(|t| Tensor::zeros(t.shape())).collect();

    for i in (1..s).rev() {
        let grad_sum = if mode == MsapMode::Purified {
            let ac = cache.attn_cache[i].as_ref().expect("purified forward caches attention");
            eca_backward(&grad_y[i], ac, &mut p.scale_attn[i - 1])?
        } else {
            grad_y[i].clone()
        };
        accumulate(&mut grad_k[i], &grad_sum)?;
        if mode != MsapMode::Base && i >= 2 {
            accumulate(&mut grad_k[i - 1], &grad_sum)?;
            match p.feed {
                ScaleFeed::Output => grad_y[i - 1].add_assign(&grad_sum)?,
                ScaleFeed::Input => grad_subsets[i - 1].add_assign(&grad_sum)?,
            }
        }
        let gk = grad_k[i].take().expect("set above");
        let pre = cache.conv_pre[i].as_ref().expect("scale conv cached");
        let grad_pre = relu_backward(&gk, pre)?;
        let g = p.scale_convs[i - 1].backward(&grad_pre, &cache.subsets[i])?;
        grad_subsets[i].add_assign(&g)?;
    }
    grad_subsets[0].add_assign(&grad_y[0])?;

    let grad_u = concat_channels(&grad_subsets)?;
    let grad_pre = relu_backward(&grad_u, &cache.fuse_in_pre)?;
    grad_x.add_assign(&p.fuse_in.backward(&grad_pre, x)?)?;
    Ok(grad_x)
}
