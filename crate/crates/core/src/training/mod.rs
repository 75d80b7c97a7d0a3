//! Optimisation, the training loop, and finite-difference gradient checks.

mod ablation;
mod adam;
pub mod components;
mod fit;
mod gradcheck;

pub use ablation::{run_ablation, AblationCell, AblationReport, AblationRow, AblationSettings};
pub use adam::{adam_step, Adam, AdamConfig, Moments};
pub use components::{run_suite, SuiteEntry};
pub use fit::{evaluate, fit, fit_with, mean_loss, predict, EpochRecord, FitOutcome, TrainConfig};
pub use gradcheck::{gradient_check, relative_error, Corrupted, GradCheck, GradCheckConfig, GradCheckReport};
