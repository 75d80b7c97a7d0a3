//! Sensor data ingestion, windowing, splitting, normalisation and the
//! synthetic activity generator.

mod csv_load;
mod dataset;
mod normalize;
mod split;
mod synth;
mod window;

pub use csv_load::{label_vocabulary, load_csv, load_csv_subjects, CsvSchema};
pub use dataset::{Split, WindowedDataset};
pub use normalize::{prepare, reapply, Normalizer, Preprocessing, STD_FLOOR};
pub use split::{split, SplitSpec};
pub use synth::{synth_generate, SynthSpec};
pub use window::{sliding_window, sliding_window_many, window_count, SensorSeries};
