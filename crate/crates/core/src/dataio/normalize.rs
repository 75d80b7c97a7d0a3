use serde::{Deserialize, Serialize};

use super::dataset::{Split, WindowedDataset};
use crate::error::{ensure_dim, Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel z-score statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits mean and (population) standard deviation per channel over every
    /// sample of the train windows only.
    pub fn fit(dataset: &WindowedDataset) -> Result<Self> {
        let train = dataset.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        let (c, t) = (dataset.channels, dataset.window_len);
        let mut sum = vec![0.0f64; c];
        for &i in &train {
            for (ch, row) in dataset.window(i).chunks_exact(t).enumerate() {
                sum[ch] += row.iter().map(|&v| v as f64).sum::<f64>();
            }
        }
        let count = (train.len() * t) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let mut sq = vec![0.0f64; c];
        for &i in &train {
            for (ch, row) in dataset.window(i).chunks_exact(t).enumerate() {
                sq[ch] += row.iter().map(|&v| (v as f64 - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        let std = sq.iter().map(|s| (s / count).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    /// Normalises every window (all splits) in place with these statistics.
    pub fn apply(&self, dataset: &mut WindowedDataset) -> Result<()> {
        ensure_dim("normalizer", "channels", dataset.channels, self.mean.len())?;
        let t = dataset.window_len;
        for i in 0..dataset.len() {
            for (ch, row) in dataset.window_mut(i).chunks_exact_mut(t).enumerate() {
                let (m, s) = (self.mean[ch], self.std[ch]);
                for v in row {
                    *v = ((*v as f64 - m) / s) as f32;
                }
            }
        }
        dataset.normalizer = Some(self.clone());
        Ok(())
    }
}

/// How a raw dataset was turned into model input; stored with trained
/// models so evaluation can reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub split: super::SplitSpec,
    pub normalizer: Normalizer,
}

/// Splits, fits the normaliser on train and applies it to everything.
pub fn prepare(dataset: WindowedDataset, spec: &super::SplitSpec) -> Result<(WindowedDataset, Preprocessing)> {
    if dataset.normalizer.is_some() {
        return Err(Error::config("dataset", "is already normalised"));
    }
    let mut ds = super::split(dataset, spec)?;
    let normalizer = Normalizer::fit(&ds)?;
    normalizer.apply(&mut ds)?;
    Ok((
        ds,
        Preprocessing {
            split: *spec,
            normalizer,
        },
    ))
}

/// Replays a stored preprocessing on a raw dataset.
pub fn reapply(dataset: WindowedDataset, pre: &Preprocessing) -> Result<WindowedDataset> {
    let mut ds = super::split(dataset, &pre.split)?;
    pre.normalizer.apply(&mut ds)?;
    Ok(ds)
}
