//! [`GradCheck`] adapters for every layer kind, and the standard check grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gradcheck::{gradient_check, zeroed, GradCheck, GradCheckConfig, GradCheckReport};
use crate::attention::{eca_backward, eca_forward, EcaParams, EcaSettings};
use crate::blocks::{shrink_backward, shrink_forward, DmBlock, MsapBlock, MsapMode, ScaleFeed};
use crate::error::Result;
use crate::network::{Denoise, Model, ModelConfig, Variant};
use crate::nncore::{
    concat_channels, global_avg_pool, global_avg_pool_backward, linear_backward, linear_forward, linear_params,
    relu, relu_backward, sigmoid, sigmoid_backward, soft_threshold, soft_threshold_backward, softmax_cross_entropy,
    split_channels, Conv1d, ConvSpec, LayerParams, Param, Parameterized, Shape, Tensor,
};

impl GradCheck for Conv1d<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Conv1d::forward(self, x)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(self);
        Conv1d::backward(self, grad_out, x)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.params_mut()
    }
}

/// Dense layer adapter.
pub struct LinearLayer(pub LayerParams<f64>);

impl GradCheck for LinearLayer {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        linear_forward(x, &self.0)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.0.zero_grad();
        linear_backward(grad_out, x, &mut self.0)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        let mut out = Vec::new();
        self.0.visit_mut(&mut out);
        out
    }
}

type Fwd = fn(&Tensor<f64>) -> Result<Tensor<f64>>;
type Bwd = fn(&Tensor<f64>, &Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>;

/// Parameter-free function given by its forward and `(x, y, grad_out) -> grad_x` backward.
pub struct Stateless {
    pub forward: Fwd,
    pub backward: Bwd,
}

impl GradCheck for Stateless {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        (self.forward)(x)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        let y = (self.forward)(x)?;
        (self.backward)(x, &y, grad_out)
    }
}

pub fn relu_component() -> Stateless {
    Stateless {
        forward: |x| Ok(relu(x)),
        backward: |x, _, g| relu_backward(g, x),
    }
}

pub fn sigmoid_component() -> Stateless {
    Stateless {
        forward: |x| Ok(sigmoid(x)),
        backward: |_, y, g| sigmoid_backward(g, y),
    }
}

pub fn pool_component() -> Stateless {
    Stateless {
        forward: global_avg_pool,
        backward: |x, _, g| global_avg_pool_backward(g, x.shape()),
    }
}

/// Splits into two subsets, swaps them, and concatenates.
pub fn split_concat_component() -> Stateless {
    Stateless {
        forward: |x| {
            let mut parts = split_channels(x, 2)?;
            parts.reverse();
            concat_channels(&parts)
        },
        backward: |_, _, g| {
            let mut parts = split_channels(g, 2)?;
            parts.reverse();
            concat_channels(&parts)
        },
    }
}

/// Soft threshold with a learnable per-channel τ.
pub struct SoftThresholdLayer {
    pub tau: Param<f64>,
}

impl GradCheck for SoftThresholdLayer {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        soft_threshold(x, &self.tau.value)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (gx, gt) = soft_threshold_backward(grad_out, x, &self.tau.value)?;
        self.tau.grad = gt;
        Ok(gx)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        vec![&mut self.tau]
    }
}

/// Mean cross-entropy of `(batch, classes, 1)` logits, emitted as a `(1, 1, 1)` tensor.
pub struct CrossEntropy {
    pub labels: Vec<usize>,
}

impl GradCheck for CrossEntropy {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (loss, _) = softmax_cross_entropy(x, &self.labels)?;
        Tensor::from_vec(Shape::new(1, 1, 1), vec![loss])
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (_, grad) = softmax_cross_entropy(x, &self.labels)?;
        Ok(grad.scale(grad_out.data()[0]))
    }
}

impl GradCheck for EcaParams<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(eca_forward(x, self)?.0)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(self);
        let (_, cache) = eca_forward(x, self)?;
        eca_backward(grad_out, &cache, self)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.params_mut()
    }
}

/// The ECA-thresholded shrinkage unit on its own.
pub struct ShrinkUnit(pub EcaParams<f64>);

impl GradCheck for ShrinkUnit {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(shrink_forward(x, &self.0)?.0)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(&mut self.0);
        let (_, cache) = shrink_forward(x, &self.0)?;
        shrink_backward(grad_out, &cache, &mut self.0)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.0.params_mut()
    }
}

impl GradCheck for MsapBlock<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(MsapBlock::forward(self, x)?.0)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(self);
        let (_, cache) = MsapBlock::forward(self, x)?;
        MsapBlock::backward(self, grad_out, &cache)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.params_mut()
    }
}

impl GradCheck for DmBlock<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(DmBlock::forward(self, x)?.0)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(self);
        let (_, cache) = DmBlock::forward(self, x)?;
        DmBlock::backward(self, grad_out, &cache)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.params_mut()
    }
}

impl GradCheck for Model<f64> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        Model::forward(self, x)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        zeroed(self);
        let (_, cache) = self.forward_train(x)?;
        Model::backward(self, grad_out, &cache)
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        self.params_mut()
    }
}

/// Uniform `[-1, 1)` tensor.
pub fn random_tensor<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Tensor<f64> {
    let data = (0..shape.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub report: GradCheckReport,
}

/// Tiny end-to-end model used by the network-level check.
pub fn tiny_model_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        in_channels: 3,
        num_classes: 4,
        window_len: 16,
        scales: 2,
        width: 2,
        groups: 1,
        variant,
        seed: 17,
        ..Default::default()
    }
}

/// Runs the check on every layer kind, both blocks in all modes, and tiny
/// end-to-end models.
pub fn run_suite(cfg: &GradCheckConfig) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let eca = EcaSettings::default();
    let mut out = Vec::new();
    let mut run = |name: String, c: &mut dyn GradCheck, x: Tensor<f64>| -> Result<()> {
        let report = gradient_check(c, &x, cfg)?;
        out.push(SuiteEntry { name, report });
        Ok(())
    };

    for (k, stride, pad) in [(1, 1, 0), (3, 1, 1), (3, 2, 1), (5, 1, 2), (5, 2, 0)] {
        let spec = ConvSpec {
            in_channels: 3,
            out_channels: 4,
            kernel: k,
            stride,
            padding: pad,
        };
        let mut conv = Conv1d::<f64>::new(spec, true, &mut rng)?;
        let x = random_tensor(Shape::new(2, 3, 11), &mut rng);
        run(format!("conv1d k={k} stride={stride} pad={pad}"), &mut conv, x)?;
    }

    let mut lin = LinearLayer(linear_params(6, 5, &mut rng));
    run("linear".into(), &mut lin, random_tensor(Shape::new(3, 6, 1), &mut rng))?;
    run("relu".into(), &mut relu_component(), random_tensor(Shape::new(2, 3, 20), &mut rng))?;
    run("sigmoid".into(), &mut sigmoid_component(), random_tensor(Shape::new(2, 3, 20), &mut rng).scale(3.0))?;
    run("global_avg_pool".into(), &mut pool_component(), random_tensor(Shape::new(2, 3, 9), &mut rng))?;
    run("split/concat".into(), &mut split_concat_component(), random_tensor(Shape::new(2, 4, 5), &mut rng))?;

    let tau = (0..3).map(|_| rng.random_range(0.2..0.6)).collect();
    let mut st = SoftThresholdLayer {
        tau: Param::from_values(&[3], tau),
    };
    run("soft_threshold".into(), &mut st, random_tensor(Shape::new(2, 3, 30), &mut rng))?;

    let labels = (0..4).map(|_| rng.random_range(0..5)).collect();
    run(
        "softmax_cross_entropy".into(),
        &mut CrossEntropy { labels },
        random_tensor(Shape::new(4, 5, 1), &mut rng).scale(3.0),
    )?;

    for c in [1usize, 8, 64] {
        let mut p: EcaParams<f64> = eca.build(c, &mut rng);
        let x = random_tensor(Shape::new(2, c, 7), &mut rng);
        run(format!("eca C={c} k={}", p.k), &mut p, x)?;
    }
    let mut unit = ShrinkUnit(eca.build(8, &mut rng));
    run("shrinkage unit".into(), &mut unit, random_tensor(Shape::new(2, 8, 12), &mut rng))?;

    for mode in [MsapMode::Base, MsapMode::Connected, MsapMode::Purified] {
        for feed in [ScaleFeed::Output, ScaleFeed::Input] {
            if mode == MsapMode::Base && feed == ScaleFeed::Input {
                continue;
            }
            let mut block = MsapBlock::<f64>::new(6, 8, 4, 2, mode, feed, &eca, false, &mut rng)?;
            let x = random_tensor(Shape::new(2, 6, 10), &mut rng);
            run(format!("msap {mode:?} feed={feed:?} s=4"), &mut block, x)?;
        }
    }
    let mut block = MsapBlock::<f64>::new(8, 8, 2, 4, MsapMode::Purified, ScaleFeed::Output, &eca, true, &mut rng)?;
    run(
        "msap purified + in-block shrinkage".into(),
        &mut block,
        random_tensor(Shape::new(2, 8, 10), &mut rng),
    )?;

    for (cin, cout, stride, thr) in [(4, 8, 2, true), (8, 8, 1, true), (4, 8, 2, false)] {
        let mut dm = DmBlock::<f64>::new(cin, cout, stride, &eca, thr, &mut rng)?;
        let x = random_tensor(Shape::new(2, cin, 11), &mut rng);
        run(
            format!("dm {cin}->{cout} stride={stride} thresholding={thr}"),
            &mut dm,
            x,
        )?;
    }

    for (label, variant) in Variant::ABLATION {
        let mcfg = tiny_model_config(variant);
        let mut model = Model::<f32>::build(&mcfg)?.cast::<f64>();
        let x = random_tensor(Shape::new(2, mcfg.in_channels, mcfg.window_len), &mut rng);
        run(format!("tiny model [{label}]"), &mut model, x)?;
    }
    let mcfg = ModelConfig {
        groups: 2,
        variant: Variant::new(MsapMode::Purified, Denoise::DrsnM),
        ..tiny_model_config(Variant::default())
    };
    let mut model = Model::<f32>::build(&mcfg)?.cast::<f64>();
    let x = random_tensor(Shape::new(2, 3, 16), &mut rng);
    run("tiny model groups=2 [DRSN-M]".into(), &mut model, x)?;
    Ok(out)
}
