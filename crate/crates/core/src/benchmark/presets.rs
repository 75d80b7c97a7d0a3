use serde::Serialize;

use crate::dataio::SplitSpec;
use crate::network::ModelConfig;

/// Recording shape and published hyperparameters of a public HAR dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub sensors: usize,
    pub rate_hz: f64,
    pub subjects: usize,
    pub classes: usize,
    pub window_len: usize,
    pub split_ratios: [u32; 3],
    pub batch_size: usize,
    pub width: usize,
    pub scales: usize,
    pub lr: f64,
}

pub const PRESETS: [DatasetPreset; 4] = [
    DatasetPreset {
        name: "PAMAP2",
        sensors: 40,
        rate_hz: 33.0,
        subjects: 9,
        classes: 12,
        window_len: 171,
        split_ratios: [8, 1, 1],
        batch_size: 128,
        width: 10,
        scales: 4,
        lr: 0.001,
    },
    DatasetPreset {
        name: "WISDM",
        sensors: 3,
        rate_hz: 20.0,
        subjects: 29,
        classes: 6,
        window_len: 90,
        split_ratios: [7, 2, 1],
        batch_size: 512,
        width: 8,
        scales: 4,
        lr: 0.001,
    },
    DatasetPreset {
        name: "OPPORTUNITY",
        sensors: 72,
        rate_hz: 30.0,
        subjects: 12,
        classes: 18,
        window_len: 113,
        split_ratios: [7, 2, 1],
        batch_size: 256,
        width: 4,
        scales: 12,
        lr: 0.001,
    },
    DatasetPreset {
        name: "UCI-HAR",
        sensors: 9,
        rate_hz: 50.0,
        subjects: 30,
        classes: 6,
        window_len: 128,
        split_ratios: [8, 1, 1],
        batch_size: 512,
        width: 8,
        scales: 8,
        lr: 0.001,
    },
];

impl DatasetPreset {
    /// Case-insensitive lookup; accepts a few common short names.
    pub fn find(name: &str) -> Option<&'static DatasetPreset> {
        let key = name.to_ascii_uppercase().replace(['_', ' '], "-");
        let key = match key.as_str() {
            "PAMAP" => "PAMAP2",
            "OPPO" | "OPPORT" => "OPPORTUNITY",
            "UCI" | "UCIHAR" => "UCI-HAR",
            other => other,
        };
        PRESETS.iter().find(|p| p.name == key)
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_len as f64 / self.rate_hz
    }

    pub fn budget_ms(&self) -> f64 {
        super::budget_ms(self.window_seconds())
    }

    pub fn split(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            ratios: self.split_ratios,
            seed,
        }
    }

    /// Default model for this dataset shape.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            in_channels: self.sensors,
            num_classes: self.classes,
            window_len: self.window_len,
            scales: self.scales,
            width: self.width,
            ..ModelConfig::default()
        }
    }
}
