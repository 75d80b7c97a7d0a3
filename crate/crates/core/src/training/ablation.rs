use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fit::{evaluate, fit, TrainConfig};
use crate::dataio::{prepare, Split, SplitSpec, WindowedDataset};
use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::network::{Model, ModelConfig, Variant};

/// Everything an ablation run shares across its variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    /// Base model; `variant` and `seed` are overridden per cell.
    pub model: ModelConfig,
    /// `seed` is overridden per cell.
    pub train: TrainConfig,
    pub split_ratios: [u32; 3],
    pub seeds: Vec<u64>,
}

/// Test metrics of one variant trained with one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub seed: u64,
    pub best_epoch: usize,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub variant: Variant,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub cells: Vec<AblationCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Number of seeds on which row `a` scores at least row `b` in test accuracy.
    pub fn seeds_at_least(&self, a: &str, b: &str) -> Option<usize> {
        let (a, b) = (self.row(a)?, self.row(b)?);
        Some(
            a.cells
                .iter()
                .zip(&b.cells)
                .filter(|(x, y)| x.metrics.accuracy >= y.metrics.accuracy)
                .count(),
        )
    }

    /// Aligned text table with mean metrics (percent) per variant.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<24} {:<22} {:>9} {:>9} {:>9}\n",
            "method", "variant", "acc", "f1_m", "f1_w"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<24} {:<22} {:>9.2} {:>9.2} {:>9.2}",
                r.name,
                r.variant.to_string(),
                100.0 * r.accuracy,
                100.0 * r.f1_macro,
                100.0 * r.f1_weighted
            );
        }
        out
    }
}

/// Trains every row of [`Variant::ABLATION`] once per seed on the same
/// split and reports test metrics. `on_cell` is called after each training run.
pub fn run_ablation(
    raw: &WindowedDataset,
    settings: &AblationSettings,
    mut on_cell: impl FnMut(&str, &AblationCell),
) -> Result<AblationReport> {
    if settings.seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut cells: Vec<Vec<AblationCell>> = vec![Vec::new(); Variant::ABLATION.len()];
    for &seed in &settings.seeds {
        let (ds, _) = prepare(raw.clone(), &SplitSpec::new(settings.split_ratios, seed)?)?;
        for (row, (name, variant)) in Variant::ABLATION.iter().enumerate() {
            let cfg = ModelConfig {
                variant: *variant,
                seed,
                ..settings.model.clone()
            };
            let train = TrainConfig {
                seed,
                ..settings.train.clone()
            };
            let outcome = fit(Model::build(&cfg)?, &ds, &train)?;
            let cell = AblationCell {
                seed,
                best_epoch: outcome.best_epoch,
                metrics: evaluate(&outcome.model, &ds, Split::Test, train.batch_size)?,
            };
            on_cell(name, &cell);
            cells[row].push(cell);
        }
    }
    let mean = |cs: &[AblationCell], f: fn(&MetricsReport) -> f64| {
        cs.iter().map(|c| f(&c.metrics)).sum::<f64>() / cs.len() as f64
    };
    let rows = Variant::ABLATION
        .iter()
        .zip(cells)
        .map(|((name, variant), cs)| AblationRow {
            name: (*name).to_owned(),
            variant: *variant,
            accuracy: mean(&cs, |m| m.accuracy),
            f1_macro: mean(&cs, |m| m.f1_macro),
            f1_weighted: mean(&cs, |m| m.f1_weighted),
            cells: cs,
        })
        .collect();
    Ok(AblationReport {
        seeds: settings.seeds.clone(),
        rows,
    })
}
