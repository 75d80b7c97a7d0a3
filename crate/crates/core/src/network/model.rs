use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Denoise, ModelConfig};
use crate::blocks::{DmBlock, DmCache, MsapBlock, MsapCache};
use crate::error::{ensure_dim, Result};
use crate::nncore::{
    global_avg_pool, global_avg_pool_backward, join, linear_backward, linear_forward, linear_params, relu,
    relu_backward, Conv1d, ConvSpec, LayerParams, Param, Parameterized, Scalar, Shape, Tensor,
};

/// A full MSAP-DM network: stem, MSAP groups joined by transition blocks,
/// an optional closing DM block, global average pooling and a linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f32> {
    pub config: ModelConfig,
    pub stem: Conv1d<T>,
    /// `groups[g]` holds that group's MSAP blocks.
    pub groups: Vec<Vec<MsapBlock<T>>>,
    /// Block between group `g` and `g + 1` (doubles channels, stride 2).
    pub transitions: Vec<DmBlock<T>>,
    pub final_dm: Option<DmBlock<T>>,
    pub classifier: LayerParams<T>,
}

enum Stage<T> {
    Msap(MsapCache<T>),
    Dm(DmCache<T>),
}

/// Saved activations of a training forward pass.
pub struct ModelCache<T> {
    input: Tensor<T>,
    stem_pre: Tensor<T>,
    stages: Vec<Stage<T>>,
    features: Tensor<T>,
    pooled: Tensor<T>,
}

impl<T: Scalar> Model<T> {
    /// Deterministic architecture; weights are drawn from `config.seed`.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let eca = config.eca();
        let mode = config.variant.msap;
        let denoise = config.variant.denoise;

        let c0 = config.group_channels(0);
        let stem = Conv1d::new(ConvSpec::same(config.in_channels, c0, 3), true, &mut rng)?;
        let mut groups = Vec::with_capacity(config.groups);
        let mut transitions = Vec::new();
        for g in 0..config.groups {
            let c = config.group_channels(g);
            let blocks = (0..config.blocks_per_group)
                .map(|_| {
                    MsapBlock::new(
                        c,
                        c,
                        config.scales,
                        config.group_width(g),
                        mode,
                        config.scale_feed,
                        &eca,
                        denoise == Denoise::Drsn,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(blocks);
            if g + 1 < config.groups {
                transitions.push(DmBlock::new(
                    c,
                    config.group_channels(g + 1),
                    2,
                    &eca,
                    denoise == Denoise::DrsnM,
                    &mut rng,
                )?);
            }
        }
        let c_last = config.group_channels(config.groups - 1);
        let final_dm = if denoise == Denoise::DrsnM {
            Some(DmBlock::new(c_last, c_last, 1, &eca, true, &mut rng)?)
        } else {
            None
        };
        let classifier = linear_params(c_last, config.num_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            stem,
            groups,
            transitions,
            final_dm,
            classifier,
        })
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        ensure_dim("model", "input channels", self.config.in_channels, x.channels())?;
        ensure_dim("model", "window length", self.config.window_len, x.time())
    }

    /// Logits `(batch, num_classes, 1)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_train(x)?.0)
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ModelCache<T>)> {
        self.check_input(x)?;
        let stem_pre = self.stem.forward(x)?;
        let mut h = relu(&stem_pre);
        let mut stages = Vec::new();
        for (g, blocks) in self.groups.iter().enumerate() {
            for block in blocks {
                let (out, cache) = block.forward(&h)?;
                stages.push(Stage::Msap(cache));
                h = out;
            }
            let next = self.transitions.get(g).or(if g + 1 == self.groups.len() {
                self.final_dm.as_ref()
            } else {
                None
            });
            if let Some(dm) = next {
                let (out, cache) = dm.forward(&h)?;
                stages.push(Stage::Dm(cache));
                h = out;
            }
        }
        let pooled = global_avg_pool(&h)?;
        let logits = linear_forward(&pooled, &self.classifier)?;
        Ok((
            logits,
            ModelCache {
                input: x.clone(),
                stem_pre,
                stages,
                features: h,
                pooled,
            },
        ))
    }

    /// Accumulates parameter gradients; returns the gradient with respect to the input.
    pub fn backward(&mut self, grad_logits: &Tensor<T>, cache: &ModelCache<T>) -> Result<Tensor<T>> {
        let grad_pooled = linear_backward(grad_logits, &cache.pooled, &mut self.classifier)?;
        let mut g = global_avg_pool_backward(&grad_pooled, cache.features.shape())?;
        let mut stages = cache.stages.iter().rev();
        for gi in (0..self.groups.len()).rev() {
            let dm = if gi + 1 == self.groups.len() {
                self.final_dm.as_mut()
            } else {
                self.transitions.get_mut(gi)
            };
            if let Some(dm) = dm {
                match stages.next() {
                    Some(Stage::Dm(c)) => g = dm.backward(&g, c)?,
                    _ => unreachable!("cache stages mirror the forward order"),
                }
            }
            for block in self.groups[gi].iter_mut().rev() {
                match stages.next() {
                    Some(Stage::Msap(c)) => g = block.backward(&g, c)?,
                    _ => unreachable!("cache stages mirror the forward order"),
                }
            }
        }
        let grad_pre = relu_backward(&g, &cache.stem_pre)?;
        self.stem.backward(&grad_pre, &cache.input)
    }

    pub fn msap_blocks(&self) -> impl Iterator<Item = &MsapBlock<T>> {
        self.groups.iter().flatten()
    }

    pub fn dm_blocks(&self) -> impl Iterator<Item = &DmBlock<T>> {
        self.transitions.iter().chain(self.final_dm.as_ref())
    }

    /// Number of ECA instances anywhere in the network.
    pub fn eca_count(&self) -> usize {
        self.msap_blocks().map(MsapBlock::eca_count).sum::<usize>()
            + self.dm_blocks().filter(|d| d.is_shrinking()).count()
    }

    /// Number of thresholding (DM) blocks; plain transitions do not count.
    pub fn dm_count(&self) -> usize {
        self.dm_blocks().filter(|d| d.is_shrinking()).count()
    }

    /// Shape of the tensor produced just before pooling, for a batch of one.
    pub fn feature_shape(&self) -> Shape {
        let mut t = self.config.window_len;
        for dm in &self.transitions {
            t = dm.decompose.spec.output_len(t).unwrap_or(0);
        }
        Shape::new(1, self.config.group_channels(self.config.groups - 1), t)
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            stem: self.stem.cast(),
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().map(MsapBlock::cast).collect())
                .collect(),
            transitions: self.transitions.iter().map(DmBlock::cast).collect(),
            final_dm: self.final_dm.as_ref().map(DmBlock::cast),
            classifier: self.classifier.cast(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Model<T> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        self.stem.collect_params(&join(prefix, "stem"), out);
        for (g, blocks) in self.groups.iter().enumerate() {
            for (b, block) in blocks.iter().enumerate() {
                block.collect_params(&join(prefix, &format!("group{g}.block{b}")), out);
            }
            if let Some(t) = self.transitions.get(g) {
                t.collect_params(&join(prefix, &format!("transition{g}")), out);
            }
        }
        if let Some(d) = &self.final_dm {
            d.collect_params(&join(prefix, "final_dm"), out);
        }
        self.classifier.visit(&join(prefix, "classifier"), out);
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.stem.collect_params_mut(out);
        let mut transitions = self.transitions.iter_mut();
        for blocks in &mut self.groups {
            for block in blocks {
                block.collect_params_mut(out);
            }
            if let Some(t) = transitions.next() {
                t.collect_params_mut(out);
            }
        }
        if let Some(d) = &mut self.final_dm {
            d.collect_params_mut(out);
        }
        self.classifier.visit_mut(out);
    }
}
