use rand::Rng;

use super::tensor::Scalar;

/// A learnable array together with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    dims: Vec<usize>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self {
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
            dims: dims.to_vec(),
        }
    }

    pub fn from_values(dims: &[usize], value: Vec<T>) -> Self {
        assert_eq!(
            dims.iter().product::<usize>(),
            value.len(),
            "parameter dims {dims:?} do not match {} values",
            value.len()
        );
        Self {
            grad: vec![T::zero(); value.len()],
            value,
            dims: dims.to_vec(),
        }
    }

    /// Glorot-uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = dims.iter().product();
        let value = (0..n)
            .map(|_| T::from_f64_lossy(rng.random_range(-limit..=limit)))
            .collect();
        Self::from_values(dims, value)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
            grad: self.grad.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
            dims: self.dims.clone(),
        }
    }
}

/// Weights and optional per-output-channel bias of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T = f32> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        if let Some(b) = &mut self.bias {
            b.zero_grad();
        }
    }

    pub fn count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Param::len)
    }

    pub fn cast<U: Scalar>(&self) -> LayerParams<U> {
        LayerParams {
            weight: self.weight.cast(),
            bias: self.bias.as_ref().map(Param::cast),
        }
    }

    pub(crate) fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        if let Some(b) = &self.bias {
            out.push((format!("{prefix}.bias"), b));
        }
    }

    pub(crate) fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
    }
}

/// Anything owning learnable parameters. `named_params` and `params_mut`
/// must enumerate parameters in the same order.
pub trait Parameterized<T: Scalar> {
    fn collect_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>);
    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>);

    fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        self.collect_params("", &mut out);
        for (name, _) in &mut out {
            if let Some(stripped) = name.strip_prefix('.') {
                *name = stripped.to_string();
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        self.collect_params_mut(&mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_grad_clears_every_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = LayerParams::<f32> {
            weight: Param::glorot(&[2, 3, 3], 9, 6, &mut rng),
            bias: Some(Param::zeros(&[2])),
        };
        p.weight.grad.iter_mut().for_each(|g| *g = 1.5);
        p.bias.as_mut().unwrap().grad[1] = -2.0;
        p.zero_grad();
        assert!(p.weight.grad.iter().all(|&g| g == 0.0));
        assert!(p.bias.unwrap().grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn glorot_respects_limit_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Param<f64> = Param::glorot(&[4, 5], 5, 4, &mut rng);
        let limit = (6.0f64 / 9.0).sqrt();
        assert_eq!(p.len(), 20);
        assert_eq!(p.grad.len(), p.value.len());
        assert!(p.value.iter().all(|v| v.abs() <= limit));
    }
}
