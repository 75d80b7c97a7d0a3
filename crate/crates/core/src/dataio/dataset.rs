use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::container::{self, Record};
use crate::error::{ensure_dim, Error, Result};
use crate::nncore::{Shape, Tensor};

/// Which partition a window belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, val or test)")),
        }
    }
}

/// Fixed-length labelled windows stored as one `(n, channels, window_len)` block.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub channels: usize,
    pub window_len: usize,
    pub rate_hz: f64,
    data: Vec<f32>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// One tag per window once [`super::split`] has run.
    pub splits: Option<Vec<Split>>,
    /// Per-channel statistics, set once the data has been normalised.
    pub normalizer: Option<super::Normalizer>,
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    channels: usize,
    window_len: usize,
    rate_hz: f64,
    class_names: Vec<String>,
    labels: Vec<usize>,
}

impl WindowedDataset {
    pub fn new(
        channels: usize,
        window_len: usize,
        rate_hz: f64,
        data: Vec<f32>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        ensure_dim("dataset", "window data length", labels.len() * channels * window_len, data.len())?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: class_names.len(),
            });
        }
        if rate_hz.is_nan() || rate_hz <= 0.0 {
            return Err(Error::config("rate_hz", "must be positive"));
        }
        Ok(Self {
            channels,
            window_len,
            rate_hz,
            data,
            labels,
            class_names,
            splits: None,
            normalizer: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Duration of one window in seconds.
    pub fn window_seconds(&self) -> f64 {
        self.window_len as f64 / self.rate_hz
    }

    /// Window `i`, channel-major (`channels × window_len`).
    pub fn window(&self, i: usize) -> &[f32] {
        let n = self.channels * self.window_len;
        &self.data[i * n..(i + 1) * n]
    }

    pub(crate) fn window_mut(&mut self, i: usize) -> &mut [f32] {
        let n = self.channels * self.window_len;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    /// Stacks the given windows into a `(indices.len(), channels, window_len)` tensor.
    pub fn batch(&self, indices: &[usize]) -> Tensor<f32> {
        let mut data = Vec::with_capacity(indices.len() * self.channels * self.window_len);
        for &i in indices {
            data.extend_from_slice(self.window(i));
        }
        Tensor::from_vec(Shape::new(indices.len(), self.channels, self.window_len), data)
            .expect("windows have uniform size")
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Indices tagged with `split`, in ascending order. An unsplit dataset
    /// has no members in any split.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        match &self.splits {
            Some(tags) => tags
                .iter()
                .enumerate()
                .filter(|(_, &t)| t == split)
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Per-class window counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Serialises the raw windows and labels (splits and normalisation are
    /// not stored; they are recomputed from a split spec).
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = Map::new();
        header.insert("kind".into(), Value::from("dataset"));
        header.insert(
            "dataset".into(),
            serde_json::to_value(DatasetHeader {
                channels: self.channels,
                window_len: self.window_len,
                rate_hz: self.rate_hz,
                class_names: self.class_names.clone(),
                labels: self.labels.clone(),
            })?,
        );
        container::encode(
            header,
            &[Record {
                name: "windows".into(),
                shape: vec![self.len(), self.channels, self.window_len],
                values: &self.data,
            }],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = container::decode(bytes)?;
        c.require_kind("dataset")?;
        let h: DatasetHeader = c.header_field("dataset")?;
        let (shape, data) = c.take("windows")?;
        let expected = vec![h.labels.len(), h.channels, h.window_len];
        if shape != expected {
            return Err(Error::ManifestShape {
                name: "windows".into(),
                shape,
                expected: expected.iter().product(),
                actual: data.len(),
            });
        }
        Self::new(h.channels, h.window_len, h.rate_hz, data, h.labels, h.class_names)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
