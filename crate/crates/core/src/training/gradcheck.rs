//! Central-difference gradient checking in `f64`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::nncore::kink::KinkRecording;
use crate::nncore::{Param, Parameterized, Tensor};

/// A differentiable component seen by the checker.
pub trait GradCheck {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>>;

    /// Zeroes parameter gradients, back-propagates `grad_out` from input
    /// `x`, and returns the input gradient.
    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>>;

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Coordinates sampled from the input and, separately, from the parameters.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            samples: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±ε perturbation crossed a ReLU or soft-threshold kink.
    pub skipped: usize,
    pub worst: String,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Loss is `Σ r ⊙ f(x)` with a fixed random projection `r`; the sampled
/// analytic derivatives are compared with `(L(θ+ε) − L(θ−ε)) / 2ε`.
/// Coordinates whose perturbed forward passes take a different branch of any
/// piecewise-linear function than the unperturbed pass are skipped.
pub fn gradient_check<C: GradCheck + ?Sized>(
    component: &mut C,
    input: &Tensor<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let recording = KinkRecording::start();
    let y0 = component.forward(input)?;
    let base_pattern = recording.take();
    let proj_data = (0..y0.data().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let proj = Tensor::from_vec(y0.shape(), proj_data)?;

    let grad_x = component.backward(input, &proj)?;
    let param_grads: Vec<Vec<f64>> = component.params().iter().map(|p| p.grad.clone()).collect();

    let mut report = GradCheckReport::default();
    let eps = cfg.epsilon;

    let probe = |report: &mut GradCheckReport,
                     label: String,
                     analytic: f64,
                     eval: &mut dyn FnMut(f64) -> Result<(f64, Vec<u8>)>|
     -> Result<()> {
        let (plus, pat_plus) = eval(eps)?;
        let (minus, pat_minus) = eval(-eps)?;
        if pat_plus != base_pattern || pat_minus != base_pattern {
            report.skipped += 1;
            return Ok(());
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic, numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = format!("{label}: analytic {analytic:.6e}, numeric {numeric:.6e}");
        }
        Ok(())
    };

    let n_in = input.data().len();
    for i in sample(&mut rng, n_in, cfg.samples.min(n_in)) {
        let mut x = input.clone();
        let orig = x.data()[i];
        let mut eval = |d: f64| -> Result<(f64, Vec<u8>)> {
            x.data_mut()[i] = orig + d;
            let y = component.forward(&x)?;
            Ok((dot(&proj, &y), recording.take()))
        };
        probe(&mut report, format!("input[{i}]"), grad_x.data()[i], &mut eval)?;
    }

    let sizes: Vec<usize> = param_grads.iter().map(Vec::len).collect();
    if !sizes.is_empty() {
        let per_tensor = (cfg.samples / sizes.len()).max(2);
        for (pi, &size) in sizes.iter().enumerate() {
            for j in sample(&mut rng, size, per_tensor.min(size)) {
                let analytic = param_grads[pi][j];
                let orig = component.params()[pi].value[j];
                let mut eval = |d: f64| -> Result<(f64, Vec<u8>)> {
                    component.params()[pi].value[j] = orig + d;
                    let y = component.forward(input);
                    component.params()[pi].value[j] = orig;
                    Ok((dot(&proj, &y?), recording.take()))
                };
                probe(&mut report, format!("param{pi}[{j}]"), analytic, &mut eval)?;
            }
        }
    }
    Ok(report)
}

/// Wraps a component and doubles its input gradient. Used to confirm the
/// checker notices a broken backward pass.
pub struct Corrupted<C>(pub C);

impl<C: GradCheck> GradCheck for Corrupted<C> {
    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.0.forward(x)
    }

    fn backward(&mut self, x: &Tensor<f64>, grad_out: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(self.0.backward(x, grad_out)?.scale(2.0))
    }

    fn params(&mut self) -> Vec<&mut Param<f64>> {
        Vec::new()
    }
}

/// Helper for components implementing [`Parameterized`].
pub(crate) fn zeroed<P: Parameterized<f64>>(p: &mut P) {
    p.zero_grad();
}
