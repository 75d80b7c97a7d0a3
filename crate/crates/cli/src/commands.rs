use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use msapdm::benchmark::{
    self, burst_test, complexity_report, complexity_table, latency_table, random_windows, stream_test, BenchMode,
    DatasetPreset, PRESETS,
};
use msapdm::dataio::{
    load_csv_subjects, prepare, reapply, sliding_window_many, synth_generate, CsvSchema, Preprocessing, SplitSpec,
    SynthSpec, WindowedDataset,
};
use msapdm::network::{load_checkpoint, load_weights, save_checkpoint, Model, ModelConfig};
use msapdm::training::{evaluate, fit_with, run_ablation, run_suite, AblationSettings, GradCheckConfig, TrainConfig};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::settings::{set, ConfigFile};

pub fn run(cli: &Cli, m: &mut RunManifest) -> CliResult {
    match &cli.command {
        Command::Synth(a) => synth(a, m),
        Command::Window(a) => window(a, m),
        Command::Train(a) => train(a, m),
        Command::Eval(a) => eval(a, m),
        Command::Bench(a) => bench(a, m),
        Command::Gradcheck(a) => gradcheck(a, m),
        Command::Ablate(a) => ablate(a, m),
        Command::Complexity(a) => complexity(a, m),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T, m: &mut RunManifest) -> CliResult {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    m.artifact(path);
    Ok(())
}

fn load_dataset(path: &Path, m: &mut RunManifest) -> CliResult<WindowedDataset> {
    m.input(path);
    WindowedDataset::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn synth(a: &SynthArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = Some(a.out.clone());
    let file = ConfigFile::load(a.config.as_deref())?;
    let mut spec = SynthSpec::default();
    set(&mut spec.n_classes, &a.classes);
    set(&mut spec.channels, &a.channels);
    set(&mut spec.window_len, &a.window);
    set(&mut spec.rate_hz, &a.rate);
    set(&mut spec.n_per_class, &a.per_class);
    set(&mut spec.noise_std, &a.noise);
    set(&mut spec.seed, &a.seed);
    let spec = file.apply("synth", spec)?;
    spec.validate()?;
    m.seed = Some(spec.seed);
    m.config = json!({ "synth": spec });
    let ds = synth_generate(&spec)?;
    ds.save(&a.out)?;
    m.artifact(&a.out);
    println!("{}", json!({ "windows": ds.len(), "classes": ds.num_classes(), "out": a.out }));
    Ok(())
}

fn window(a: &WindowArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = Some(a.out.clone());
    let step = a.step.unwrap_or((a.window / 2).max(1));
    let schema = CsvSchema {
        label: a.label.clone(),
        channels: a.channels.clone(),
        subject: a.subject.clone(),
        rate_hz: a.rate,
    };
    m.config = json!({ "schema": schema, "window_len": a.window, "step": step });
    if a.window == 0 || step == 0 {
        return Err(CliError::Usage("--window and --step must be at least 1".into()));
    }
    if a.rate.is_nan() || a.rate <= 0.0 {
        return Err(CliError::Usage("--rate must be positive".into()));
    }
    m.input(&a.csv);
    let series = load_csv_subjects(&a.csv, &schema).map_err(|e| CliError::Data(e.to_string()))?;
    let ds = sliding_window_many(&series, a.window, step).map_err(|e| CliError::Data(e.to_string()))?;
    if ds.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no recording is at least {} samples long",
            a.csv.display(),
            a.window
        )));
    }
    ds.save(&a.out)?;
    m.artifact(&a.out);
    println!(
        "{}",
        json!({ "windows": ds.len(), "classes": ds.class_names, "subjects": series.len(), "out": a.out })
    );
    Ok(())
}

fn apply_model_flags(cfg: &mut ModelConfig, a: &ModelArgs) {
    set(&mut cfg.variant, &a.variant);
    set(&mut cfg.scales, &a.scales);
    set(&mut cfg.width, &a.width);
    set(&mut cfg.groups, &a.groups);
    set(&mut cfg.blocks_per_group, &a.blocks_per_group);
    set(&mut cfg.scale_feed, &a.scale_feed);
    set(&mut cfg.eca_rounding, &a.eca_rounding);
}

fn apply_fit_flags(cfg: &mut TrainConfig, a: &FitArgs) {
    set(&mut cfg.epochs, &a.epochs);
    set(&mut cfg.lr, &a.lr);
    set(&mut cfg.batch_size, &a.batch_size);
    if a.patience.is_some() {
        cfg.patience = a.patience;
    }
}

/// Model, training and split settings for `raw`: defaults, then flags,
/// then the config file. Input shape and class count always come from the data.
fn resolve(
    raw: &WindowedDataset,
    seed: u64,
    model: &ModelArgs,
    fit: &FitArgs,
    file: &ConfigFile,
) -> CliResult<(ModelConfig, TrainConfig, SplitSpec)> {
    let mut model_cfg = ModelConfig {
        seed,
        ..ModelConfig::default()
    };
    apply_model_flags(&mut model_cfg, model);
    let mut model_cfg = file.apply("model", model_cfg)?;
    model_cfg.in_channels = raw.channels;
    model_cfg.num_classes = raw.num_classes();
    model_cfg.window_len = raw.window_len;
    model_cfg.validate()?;

    let mut train_cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    apply_fit_flags(&mut train_cfg, fit);
    let train_cfg = file.apply("train", train_cfg)?;
    train_cfg.validate()?;

    let mut split = SplitSpec { ratios: [8, 1, 1], seed };
    set(&mut split.ratios, &fit.split);
    let split = file.apply("split", split)?;
    split.validate()?;
    Ok((model_cfg, train_cfg, split))
}

fn train(a: &TrainArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = Some(a.out.clone());
    let file = ConfigFile::load(a.config.as_deref())?;
    let raw = load_dataset(&a.data, m)?;
    let seed = a.seed.unwrap_or(0);
    let (model_cfg, train_cfg, split) = resolve(&raw, seed, &a.model, &a.fit, &file)?;
    m.seed = Some(seed);
    m.config = json!({ "model": model_cfg, "train": train_cfg, "split": split });

    let (ds, pre) = prepare(raw, &split)?;
    let model = Model::build(&model_cfg)?;
    let mut history = String::new();
    let outcome = fit_with(model, &ds, &train_cfg, |r| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  val_acc {:.4}  {:.0} ms",
            r.epoch, r.train_loss, r.val_accuracy, r.wall_ms
        );
        let _ = writeln!(history, "{}", serde_json::to_string(r).expect("plain record"));
    })?;
    save_checkpoint(&outcome.model, Some(&serde_json::to_value(&pre)?), &a.out)?;
    m.artifact(&a.out);
    let history_path = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".history.jsonl"));
    std::fs::write(&history_path, history)?;
    m.artifact(&history_path);
    let best_val = outcome
        .history
        .iter()
        .find(|r| r.epoch == outcome.best_epoch)
        .map(|r| r.val_accuracy);
    println!(
        "{}",
        json!({ "best_epoch": outcome.best_epoch, "val_accuracy": best_val, "model": a.out, "history": history_path })
    );
    Ok(())
}

fn eval(a: &EvalArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = a.out.clone();
    m.config = json!({ "split": a.split, "batch_size": a.batch_size });
    if a.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".into()));
    }
    m.input(&a.model);
    let (model, pre) = load_checkpoint(&a.model).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let raw = load_dataset(&a.data, m)?;
    let pre: Preprocessing = match pre {
        Some(v) => serde_json::from_value(v)?,
        None => {
            return Err(CliError::Data(format!(
                "{}: checkpoint carries no preprocessing record",
                a.model.display()
            )))
        }
    };
    let ds = reapply(raw, &pre)?;
    let metrics = evaluate(&model, &ds, a.split, a.batch_size)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    if let Some(out) = &a.out {
        write_json(out, &metrics, m)?;
    }
    Ok(())
}

fn lookup_preset(name: &str) -> CliResult<&'static DatasetPreset> {
    DatasetPreset::find(name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Usage(format!("unknown preset `{name}` (expected one of {})", names.join(", ")))
    })
}

fn bench(a: &BenchArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = a.out.clone();
    m.seed = Some(a.seed);
    let (model, preset_seconds) = match (&a.model, &a.preset) {
        (Some(path), _) => {
            m.input(path);
            let model = load_weights(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (model, None)
        }
        (None, Some(name)) => {
            let p = lookup_preset(name)?;
            let cfg = ModelConfig {
                seed: a.seed,
                ..p.model_config()
            };
            (Model::build(&cfg)?, Some(p.window_seconds()))
        }
        (None, None) => (
            Model::build(&ModelConfig {
                seed: a.seed,
                ..ModelConfig::default()
            })?,
            Some(4.5),
        ),
    };
    let secs = a
        .window_seconds
        .or(preset_seconds)
        .ok_or_else(|| CliError::Usage("--window-seconds is required with --model".into()))?;
    if !(secs > 0.0 && secs.is_finite()) {
        return Err(CliError::Usage("--window-seconds must be positive".into()));
    }
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if a.batched && a.mode != BenchMode::Burst {
        return Err(CliError::Usage("--batched only applies to --mode burst".into()));
    }
    m.config = json!({
        "mode": a.mode, "n": a.n, "batched": a.batched, "window_seconds": secs,
        "preset": a.preset, "model": model.config,
    });
    let windows = random_windows(&model, a.n.min(100), a.seed);
    let report = match a.mode {
        BenchMode::Burst => burst_test(&model, &windows, a.n, secs, a.batched)?,
        BenchMode::Stream => stream_test(&model, &windows, secs, a.n)?,
    };
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Table => print!("{}", latency_table(&report)),
    }
    if let Some(out) = &a.out {
        write_json(out, &report, m)?;
    }
    if report.deployable {
        Ok(())
    } else {
        Err(CliError::Gate(format!(
            "not deployable: p95 {:.3} ms exceeds the {:.2} ms budget",
            report.p95_ms, report.budget_ms
        )))
    }
}

fn gradcheck(a: &GradcheckArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = a.out.clone();
    m.seed = Some(a.seed);
    m.config = json!({ "tolerance": a.tolerance, "epsilon": a.epsilon, "samples": a.samples });
    if !(a.epsilon > 0.0 && a.tolerance > 0.0) || a.samples == 0 {
        return Err(CliError::Usage("--epsilon, --tolerance and --samples must be positive".into()));
    }
    let entries = run_suite(&GradCheckConfig {
        epsilon: a.epsilon,
        samples: a.samples,
        seed: a.seed,
    })?;
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| !e.report.passes(a.tolerance))
        .map(|e| e.name.as_str())
        .collect();
    match a.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "tolerance": a.tolerance, "passed": failed.is_empty(), "entries": entries }))?
        ),
        Format::Table => {
            for e in &entries {
                let verdict = if e.report.passes(a.tolerance) { "PASS" } else { "FAIL" };
                println!(
                    "{verdict}  {:<48} max_rel {:.3e}  checked {:>4}  skipped {:>3}",
                    e.name, e.report.max_rel_error, e.report.checked, e.report.skipped
                );
            }
        }
    }
    if let Some(out) = &a.out {
        write_json(out, &json!({ "tolerance": a.tolerance, "passed": failed.is_empty(), "entries": entries }), m)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gate(format!("gradient check failed for: {}", failed.join(", "))))
    }
}

fn ablate(a: &AblateArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = a.out.clone();
    let file = ConfigFile::load(a.config.as_deref())?;
    let raw = load_dataset(&a.data, m)?;
    let (model_cfg, train_cfg, split) = resolve(&raw, 0, &a.model, &a.fit, &file)?;
    let mut settings = AblationSettings {
        model: model_cfg,
        train: train_cfg,
        split_ratios: split.ratios,
        seeds: vec![0],
    };
    if let Some(seeds) = &a.seeds {
        settings.seeds = seeds.clone();
    }
    let settings = file.apply("ablation", settings)?;
    if settings.seeds.is_empty() {
        return Err(CliError::Usage("--seeds needs at least one seed".into()));
    }
    m.seed = settings.seeds.first().copied();
    m.config = serde_json::to_value(&settings)?;
    let report = run_ablation(&raw, &settings, |name, cell| {
        eprintln!(
            "{name:<24} seed {:>4}  test_acc {:.4}  best_epoch {}",
            cell.seed, cell.metrics.accuracy, cell.best_epoch
        );
    })?;
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Table => print!("{}", report.table()),
    }
    if let Some(out) = &a.out {
        write_json(out, &report, m)?;
    }
    Ok(())
}

fn complexity(a: &ComplexityArgs, m: &mut RunManifest) -> CliResult {
    m.anchor = a.out.clone();
    m.seed = Some(a.seed);
    let presets: Vec<&DatasetPreset> = match &a.presets {
        Some(names) => names.iter().map(|n| lookup_preset(n)).collect::<CliResult<_>>()?,
        None => PRESETS.iter().collect(),
    };
    let mut configs = Vec::new();
    let mut rows = Vec::new();
    for p in presets {
        let mut cfg = ModelConfig {
            seed: a.seed,
            ..p.model_config()
        };
        set(&mut cfg.groups, &a.groups);
        cfg.validate()?;
        let model = Model::build(&cfg)?;
        let windows = random_windows(&model, 100, a.seed);
        rows.push(complexity_report(&model, p.name, &windows, p.window_seconds())?);
        configs.push(json!({ "dataset": p.name, "model": cfg, "budget_ms": benchmark::budget_ms(p.window_seconds()) }));
    }
    m.config = json!({ "rows": configs });
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
        Format::Table => print!("{}", complexity_table(&rows)),
    }
    if let Some(out) = &a.out {
        write_json(out, &rows, m)?;
    }
    Ok(())
}
