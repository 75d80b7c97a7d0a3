use super::dataset::WindowedDataset;
use crate::error::{Error, Result};

/// A continuous multichannel recording with one activity label per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSeries {
    pub channels: usize,
    pub rate_hz: f64,
    /// Row-major `time × channels`.
    pub samples: Vec<f32>,
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
    pub subject: Option<String>,
}

impl SensorSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.labels.len() * self.channels {
            return Err(Error::shape(
                "sensor series",
                "samples",
                self.labels.len() * self.channels,
                self.samples.len(),
            ));
        }
        if self.rate_hz.is_nan() || self.rate_hz <= 0.0 {
            return Err(Error::config("rate_hz", "must be positive"));
        }
        Ok(())
    }
}

/// Number of windows: `floor((len − window_len) / step) + 1`.
pub fn window_count(len: usize, window_len: usize, step: usize) -> usize {
    if window_len == 0 || step == 0 || window_len > len {
        0
    } else {
        (len - window_len) / step + 1
    }
}

/// Majority label of a window; ties go to the label at the centre sample
/// when it is among the tied labels, otherwise to the lowest tied id.
pub(crate) fn window_label(labels: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes.max(1)];
    for &l in labels {
        counts[l] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    let centre = labels[labels.len() / 2];
    if counts[centre] == best {
        centre
    } else {
        counts.iter().position(|&c| c == best).unwrap_or(0)
    }
}

/// Cuts `series` into windows starting at `0, step, 2·step, …`; the
/// trailing remainder is dropped.
pub fn sliding_window(series: &SensorSeries, window_len: usize, step: usize) -> Result<WindowedDataset> {
    series.validate()?;
    if step == 0 {
        return Err(Error::config("step", "must be at least 1"));
    }
    if window_len == 0 || window_len > series.len() {
        return Err(Error::config(
            "window_len",
            format!("must be between 1 and the series length {}, got {window_len}", series.len()),
        ));
    }
    let count = window_count(series.len(), window_len, step);
    let c = series.channels;
    let mut data = Vec::with_capacity(count * c * window_len);
    let mut labels = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * step;
        // transpose time-major samples into channel-major rows
        for ch in 0..c {
            data.extend((start..start + window_len).map(|t| series.samples[t * c + ch]));
        }
        labels.push(window_label(
            &series.labels[start..start + window_len],
            series.label_names.len(),
        ));
    }
    WindowedDataset::new(c, window_len, series.rate_hz, data, labels, series.label_names.clone())
}

/// Windows several recordings independently (no window crosses a
/// recording boundary) and concatenates the results.
pub fn sliding_window_many(series: &[SensorSeries], window_len: usize, step: usize) -> Result<WindowedDataset> {
    let first = series.first().ok_or(Error::Empty {
        what: "sliding_window_many",
    })?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for s in series {
        if s.len() < window_len {
            continue;
        }
        let ds = sliding_window(s, window_len, step)?;
        data.extend_from_slice(ds.raw());
        labels.extend_from_slice(&ds.labels);
    }
    WindowedDataset::new(
        first.channels,
        window_len,
        first.rate_hz,
        data,
        labels,
        first.label_names.clone(),
    )
}
