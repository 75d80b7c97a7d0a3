use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::WindowedDataset;
use crate::error::{Error, Result};

/// Parameters of the synthetic activity generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub channels: usize,
    pub window_len: usize,
    pub rate_hz: f64,
    pub n_per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 6,
            channels: 3,
            window_len: 90,
            rate_hz: 20.0,
            n_per_class: 200,
            noise_std: 0.5,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("n_classes", "needs at least 2 classes"));
        }
        if self.channels == 0 {
            return Err(Error::config("channels", "must be at least 1"));
        }
        if self.window_len == 0 {
            return Err(Error::config("window_len", "must be at least 1"));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::config("rate_hz", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be non-negative"));
        }
        Ok(())
    }

    /// Frequency (Hz) and amplitude of the two sinusoids that make up
    /// `class` on `channel`.
    pub fn signature(&self, class: usize, channel: usize) -> [(f64, f64); 2] {
        let nyquist = self.rate_hz / 2.0;
        let pos = class as f64 / (self.n_classes - 1) as f64;
        let spread = channel as f64 / (self.channels.max(2) - 1) as f64;
        let primary = nyquist * (0.06 + 0.36 * pos) * (1.0 + 0.3 * spread);
        let secondary = (primary * 1.7).min(0.9 * nyquist);
        let a1 = 1.0 + 0.25 * ((class + channel) % 3) as f64;
        let a2 = 0.25 + 0.15 * ((2 * class + channel) % 4) as f64;
        [(primary, a1), (secondary, a2)]
    }

    /// One window for `(class, index)`, channel-major. Each window draws
    /// from its own random stream, so it does not depend on how many other
    /// windows are generated.
    pub fn window(&self, class: usize, index: usize) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((class as u64) << 32) | index as u64);
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite noise std");
        let mut out = Vec::with_capacity(self.channels * self.window_len);
        for ch in 0..self.channels {
            let comps: Vec<(f64, f64, f64)> = self
                .signature(class, ch)
                .iter()
                .map(|&(f, a)| {
                    let f = f * rng.random_range(0.97..1.03);
                    let a = a * rng.random_range(0.9..1.1);
                    (f, a, rng.random_range(0.0..TAU))
                })
                .collect();
            for t in 0..self.window_len {
                let time = t as f64 / self.rate_hz;
                let clean: f64 = comps.iter().map(|&(f, a, phi)| a * (TAU * f * time + phi).sin()).sum();
                let eps = if self.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                out.push((clean + eps) as f32);
            }
        }
        out
    }
}

/// Generates `n_per_class` windows per class, grouped by class.
pub fn synth_generate(spec: &SynthSpec) -> Result<WindowedDataset> {
    spec.validate()?;
    let mut data = Vec::with_capacity(spec.n_classes * spec.n_per_class * spec.channels * spec.window_len);
    let mut labels = Vec::with_capacity(spec.n_classes * spec.n_per_class);
    for class in 0..spec.n_classes {
        for i in 0..spec.n_per_class {
            data.extend(spec.window(class, i));
            labels.push(class);
        }
    }
    let names = (0..spec.n_classes).map(|c| format!("class_{c}")).collect();
    WindowedDataset::new(spec.channels, spec.window_len, spec.rate_hz, data, labels, names)
}
