//! Deployment latency harness: burst throughput, single-window stream
//! stability, the real-time budget verdict and a complexity summary.

mod presets;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use presets::{DatasetPreset, PRESETS};

use crate::error::{ensure_dim, Error, Result};
use crate::network::{param_count, Model};
use crate::nncore::{Shape, Tensor};

/// Untimed runs before every measurement.
pub const WARMUP_RUNS: usize = 10;
/// Share of the window duration a single inference may take.
pub const BUDGET_FRACTION: f64 = 0.05;

/// Real-time budget for one window: 5% of its duration, in milliseconds.
pub fn budget_ms(window_seconds: f64) -> f64 {
    BUDGET_FRACTION * window_seconds * 1000.0
}

/// Anything that maps a `(batch, channels, window_len)` tensor to outputs.
pub trait Inference {
    /// `(channels, window_len)` the model accepts.
    fn input_shape(&self) -> (usize, usize);
    fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>>;
    fn param_count(&self) -> usize;
}

impl Inference for Model<f32> {
    fn input_shape(&self) -> (usize, usize) {
        (self.config.in_channels, self.config.window_len)
    }

    fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward(x)
    }

    fn param_count(&self) -> usize {
        param_count(self)
    }
}

/// Zero-layer model that returns its input.
#[derive(Clone, Copy, Debug)]
pub struct Passthrough {
    pub channels: usize,
    pub window_len: usize,
}

impl Inference for Passthrough {
    fn input_shape(&self) -> (usize, usize) {
        (self.channels, self.window_len)
    }

    fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(x.clone())
    }

    fn param_count(&self) -> usize {
        0
    }
}

/// Wraps a model and sleeps for `delay` on every call.
#[derive(Clone, Debug)]
pub struct Delayed<M> {
    pub inner: M,
    pub delay: Duration,
}

impl<M: Inference> Inference for Delayed<M> {
    fn input_shape(&self) -> (usize, usize) {
        self.inner.input_shape()
    }

    fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        std::thread::sleep(self.delay);
        self.inner.infer(x)
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Burst,
    Stream,
}

impl std::str::FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "burst" => Ok(BenchMode::Burst),
            "stream" => Ok(BenchMode::Stream),
            other => Err(format!("unknown mode `{other}` (expected burst or stream)")),
        }
    }
}

/// Timing summary of one benchmark run. All times are milliseconds from a
/// monotonic clock and exclude warm-up runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub mode: BenchMode,
    pub n: usize,
    pub batched: bool,
    pub total_ms: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub min_ms: f64,
    pub param_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub peak_memory_bytes: Option<u64>,
    pub window_seconds: f64,
    pub budget_ms: f64,
    /// `p95_ms ≤ budget_ms`.
    pub deployable: bool,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn report(
    mode: BenchMode,
    batched: bool,
    mut times: Vec<f64>,
    total_ms: f64,
    model: &dyn Inference,
    window_seconds: f64,
) -> LatencyReport {
    times.sort_by(|a, b| a.total_cmp(b));
    let n = times.len();
    let budget = budget_ms(window_seconds);
    let p95 = percentile(&times, 95.0);
    LatencyReport {
        mode,
        n,
        batched,
        total_ms,
        mean_ms: total_ms / n as f64,
        p50_ms: percentile(&times, 50.0),
        p95_ms: p95,
        max_ms: times[n - 1],
        min_ms: times[0],
        param_count: model.param_count(),
        peak_memory_bytes: peak_memory_bytes(),
        window_seconds,
        budget_ms: budget,
        deployable: p95 <= budget,
    }
}

fn check_windows(model: &dyn Inference, windows: &Tensor<f32>) -> Result<()> {
    let (c, t) = model.input_shape();
    ensure_dim("benchmark", "input channels", c, windows.channels())?;
    ensure_dim("benchmark", "window length", t, windows.time())?;
    if windows.batch() == 0 {
        return Err(Error::Empty { what: "benchmark input" });
    }
    Ok(())
}

fn check_seconds(window_seconds: f64) -> Result<()> {
    if window_seconds > 0.0 && window_seconds.is_finite() {
        Ok(())
    } else {
        Err(Error::config("window_seconds", "must be positive"))
    }
}

fn time_call(model: &dyn Inference, x: &Tensor<f32>) -> Result<f64> {
    let start = Instant::now();
    let out = model.infer(x)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(out);
    Ok(ms)
}

/// Runs `n` consecutive single-window inferences, cycling through the
/// windows of `windows`. With `batched` the `n` windows go through as one
/// tensor instead and every per-window figure is the batch mean.
pub fn burst_test(
    model: &dyn Inference,
    windows: &Tensor<f32>,
    n: usize,
    window_seconds: f64,
    batched: bool,
) -> Result<LatencyReport> {
    check_windows(model, windows)?;
    check_seconds(window_seconds)?;
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let available = windows.batch();
    let single = |i: usize| windows.sample(i % available);
    for i in 0..WARMUP_RUNS {
        std::hint::black_box(model.infer(&single(i))?);
    }
    if batched {
        let batch = Tensor::stack(&(0..n).map(single).collect::<Vec<_>>())?;
        let total = time_call(model, &batch)?;
        return Ok(report(BenchMode::Burst, true, vec![total / n as f64; n], total, model, window_seconds));
    }
    let inputs: Vec<_> = (0..n).map(single).collect();
    let mut times = Vec::with_capacity(n);
    let start = Instant::now();
    for x in &inputs {
        times.push(time_call(model, x)?);
    }
    let total = start.elapsed().as_secs_f64() * 1e3;
    Ok(report(BenchMode::Burst, false, times, total, model, window_seconds))
}

/// `repeats` independent inferences of one window; deployable when the
/// 95th percentile fits the budget.
pub fn stream_test(
    model: &dyn Inference,
    window: &Tensor<f32>,
    window_seconds: f64,
    repeats: usize,
) -> Result<LatencyReport> {
    stream_test_with_warmup(model, window, window_seconds, repeats, WARMUP_RUNS)
}

/// [`stream_test`] with an explicit number of untimed warm-up runs.
pub fn stream_test_with_warmup(
    model: &dyn Inference,
    window: &Tensor<f32>,
    window_seconds: f64,
    repeats: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    check_windows(model, window)?;
    check_seconds(window_seconds)?;
    if repeats == 0 {
        return Err(Error::config("repeats", "must be at least 1"));
    }
    let x = window.sample(0);
    for _ in 0..warmup {
        std::hint::black_box(model.infer(&x)?);
    }
    let times = (0..repeats).map(|_| time_call(model, &x)).collect::<Result<Vec<_>>>()?;
    let total = times.iter().sum();
    Ok(report(BenchMode::Stream, false, times, total, model, window_seconds))
}

/// Standard-normal windows of the model's input shape.
pub fn random_windows(model: &dyn Inference, n: usize, seed: u64) -> Tensor<f32> {
    let (c, t) = model.input_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * c * t).map(|_| StandardNormal.sample(&mut rng)).collect();
    Tensor::from_vec(Shape::new(n, c, t), data).expect("sized to shape")
}

/// One row of the complexity table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub dataset: String,
    /// Wall time of a 100-window burst.
    pub time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub memory_bytes: Option<u64>,
    pub params: usize,
}

/// Burst-times `model` on `windows` and pairs the result with its
/// parameter count and the process's peak memory.
pub fn complexity_report(
    model: &dyn Inference,
    dataset: &str,
    windows: &Tensor<f32>,
    window_seconds: f64,
) -> Result<ComplexityRow> {
    let burst = burst_test(model, windows, 100, window_seconds, false)?;
    Ok(ComplexityRow {
        dataset: dataset.to_owned(),
        time_ms: burst.total_ms,
        memory_bytes: burst.peak_memory_bytes,
        params: model.param_count(),
    })
}

/// Aligned text rendering; absent memory readings print as `n/a`.
pub fn complexity_table(rows: &[ComplexityRow]) -> String {
    let mut out = format!("{:<12} {:>12} {:>14} {:>12}\n", "dataset", "time_ms", "memory_mib", "params");
    for r in rows {
        let mem = r
            .memory_bytes
            .map(|b| format!("{:.2}", b as f64 / (1024.0 * 1024.0)))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(out, "{:<12} {:>12.3} {:>14} {:>12}", r.dataset, r.time_ms, mem, r.params);
    }
    out
}

/// Aligned text rendering of a latency report.
pub fn latency_table(r: &LatencyReport) -> String {
    let mode = match r.mode {
        BenchMode::Burst if r.batched => "burst (batched)",
        BenchMode::Burst => "burst",
        BenchMode::Stream => "stream",
    };
    let mut out = String::new();
    let _ = writeln!(out, "mode            {mode}");
    let _ = writeln!(out, "n               {}", r.n);
    for (k, v) in [
        ("total_ms", r.total_ms),
        ("mean_ms", r.mean_ms),
        ("p50_ms", r.p50_ms),
        ("p95_ms", r.p95_ms),
        ("max_ms", r.max_ms),
        ("budget_ms", r.budget_ms),
    ] {
        let _ = writeln!(out, "{k:<15} {v:.3}");
    }
    let _ = writeln!(out, "params          {}", r.param_count);
    if let Some(b) = r.peak_memory_bytes {
        let _ = writeln!(out, "peak_memory     {b} bytes");
    }
    let _ = writeln!(out, "deployable      {}", r.deployable);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets() {
        assert_eq!(budget_ms(4.5), 225.0);
        assert!((budget_ms(128.0 / 50.0) - 128.0).abs() < 1e-9);
        assert_eq!(DatasetPreset::find("wisdm").unwrap().budget_ms(), 225.0);
        assert!(DatasetPreset::find("uci").is_some());
        assert!(DatasetPreset::find("nope").is_none());
    }

    #[test]
    fn percentiles_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 95.0), 95.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[3.0], 95.0), 3.0);
    }

    #[test]
    fn shape_mismatch() {
        let m = Passthrough { channels: 3, window_len: 8 };
        let wrong = Tensor::zeros(Shape::new(1, 2, 8));
        assert!(burst_test(&m, &wrong, 10, 1.0, false).is_err());
        let right = Tensor::zeros(Shape::new(1, 3, 8));
        assert!(stream_test(&m, &right, 0.0, 10).is_err());
    }

    #[test]
    fn memory_field_omitted_when_absent() {
        let row = ComplexityRow {
            dataset: "x".into(),
            time_ms: 1.0,
            memory_bytes: None,
            params: 3,
        };
        let v = serde_json::to_value(&row).unwrap();
        assert!(v.get("memory_bytes").is_none());
        assert!(complexity_table(&[row]).contains("n/a"));
    }
}
