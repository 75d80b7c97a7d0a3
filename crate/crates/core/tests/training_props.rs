use msapdm::dataio::{split, Split, SplitSpec, WindowedDataset};
use msapdm::network::{Model, ModelConfig};
use msapdm::nncore::{Parameterized, Shape, Tensor};
use msapdm::training::components::{random_tensor, relu_component, LinearLayer};
use msapdm::training::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn separable(n_per_class: usize) -> WindowedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (c, t) = (2, 16);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n_per_class {
        let class = i % 2;
        let sign = if class == 0 { 1.0 } else { -1.0 };
        for _ in 0..c * t {
            data.push(sign + rng.random_range(-0.3..0.3));
        }
        labels.push(class);
    }
    let ds = WindowedDataset::new(c, t, 16.0, data, labels, vec!["up".into(), "down".into()]).unwrap();
    split(ds, &SplitSpec::new([6, 2, 2], 4).unwrap()).unwrap()
}

fn tiny_model(ds: &WindowedDataset) -> Model<f32> {
    Model::build(&ModelConfig {
        in_channels: ds.channels,
        num_classes: ds.num_classes(),
        window_len: ds.window_len,
        scales: 2,
        width: 2,
        groups: 1,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
}

fn values(m: &Model<f32>) -> Vec<(String, Vec<f32>)> {
    m.named_params().into_iter().map(|(n, p)| (n, p.value.clone())).collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let ds = separable(20);
    let model = tiny_model(&ds);
    let before = values(&model);
    let cfg = TrainConfig { lr: 0.0, epochs: 3, batch_size: 8, ..Default::default() };
    let out = fit(model, &ds, &cfg).unwrap();
    assert_eq!(values(&out.model), before);
    assert_eq!(out.history.len(), 3);
    let first = out.history[0].train_loss;
    assert!(out.history.iter().all(|r| (r.train_loss - first).abs() < 1e-6));
}

#[test]
fn loss_decreases_on_separable_data() {
    let ds = separable(40);
    let cfg = TrainConfig { lr: 0.01, epochs: 5, batch_size: 8, ..Default::default() };
    let out = fit(tiny_model(&ds), &ds, &cfg).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    assert_eq!(evaluate(&out.model, &ds, Split::Test, 16).unwrap().accuracy, 1.0);
}

#[test]
fn training_replays_bit_for_bit() {
    let ds = separable(20);
    let cfg = TrainConfig { lr: 0.005, epochs: 4, batch_size: 6, seed: 12, ..Default::default() };
    let a = fit(tiny_model(&ds), &ds, &cfg).unwrap();
    let b = fit(tiny_model(&ds), &ds, &cfg).unwrap();
    assert_eq!(values(&a.model), values(&b.model));
    assert_eq!(a.best_epoch, b.best_epoch);
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!((x.epoch, x.train_loss, x.val_accuracy), (y.epoch, y.train_loss, y.val_accuracy));
    }
    let c = fit(tiny_model(&ds), &ds, &TrainConfig { seed: 13, ..cfg }).unwrap();
    assert_ne!(values(&a.model), values(&c.model));
}

#[test]
fn best_epoch_has_the_highest_validation_accuracy() {
    let ds = separable(20);
    let cfg = TrainConfig { lr: 0.02, epochs: 6, batch_size: 4, ..Default::default() };
    let out = fit(tiny_model(&ds), &ds, &cfg).unwrap();
    let best = out.history.iter().map(|r| r.val_accuracy).fold(f64::NEG_INFINITY, f64::max);
    let first_best = out.history.iter().find(|r| r.val_accuracy == best).unwrap().epoch;
    assert_eq!(out.best_epoch, first_best);
    let val = ds.indices(Split::Val);
    let preds = predict(&out.model, &ds, &val, 5).unwrap();
    let hits = preds.iter().zip(&val).filter(|(p, &i)| **p == ds.labels[i]).count();
    assert_eq!(hits as f64 / val.len() as f64, best);
}

#[test]
fn frozen_loss_matches_independent_cross_entropy() {
    let ds = separable(15);
    let model = tiny_model(&ds);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let got = mean_loss(&model, &ds, &idx, 7).unwrap();
    let mut total = 0.0f64;
    for &i in &idx {
        let x = Tensor::from_vec(Shape::new(1, ds.channels, ds.window_len), ds.window(i).to_vec()).unwrap();
        let logits: Vec<f64> = model.forward(&x).unwrap().data().iter().map(|&v| v as f64).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - logits[ds.labels[i]];
    }
    let want = total / idx.len() as f64;
    assert!((got - want).abs() <= 1e-5 * want.max(1.0), "{got} vs {want}");
}

#[test]
fn degenerate_runs() {
    let ds = separable(10);
    let model = tiny_model(&ds);
    let before = values(&model);
    let out = fit(model.clone(), &ds, &TrainConfig { epochs: 0, ..Default::default() }).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, 0);
    assert_eq!(values(&out.model), before);

    let mut no_val = ds.clone();
    no_val.splits = Some(no_val.splits.unwrap().into_iter().map(|s| if s == Split::Val { Split::Test } else { s }).collect());
    assert!(matches!(fit(model.clone(), &no_val, &TrainConfig::default()), Err(msapdm::Error::EmptySplit("val"))));

    for bad in [
        TrainConfig { lr: -1.0, ..Default::default() },
        TrainConfig { lr: f64::NAN, ..Default::default() },
        TrainConfig { batch_size: 0, ..Default::default() },
    ] {
        assert!(matches!(fit(model.clone(), &ds, &bad), Err(msapdm::Error::InvalidConfig { .. })));
    }
}

#[test]
fn patience_stops_early() {
    let ds = separable(20);
    let cfg = TrainConfig { lr: 0.0, epochs: 10, patience: Some(2), ..Default::default() };
    let out = fit(tiny_model(&ds), &ds, &cfg).unwrap();
    assert_eq!(out.history.len(), 3);
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let cfg = AdamConfig { lr: 0.01, ..Default::default() };
    let mut moments = Moments { m: vec![0.0; 3], v: vec![0.0; 3] };
    let mut value = vec![1.0f64, -2.0, 0.5];
    adam_step(&mut value, &[0.3, -4.0, 1e-3], &mut moments, 1, &cfg).unwrap();
    let want = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)];
    for (v, w) in value.iter().zip(want) {
        assert!((v - w).abs() < 1e-9, "{v} vs {w}");
    }
}

#[test]
fn adam_matches_scalar_recurrence() {
    let cfg = AdamConfig::default();
    let mut moments = Moments { m: vec![0.0], v: vec![0.0] };
    let mut value = vec![0.0f64];
    let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
    for t in 1..=50u64 {
        let g = (t as f64 * 0.37).sin();
        adam_step(&mut value, &[g], &mut moments, t, &cfg).unwrap();
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(t as i32));
        let vh = v / (1.0 - 0.999f64.powi(t as i32));
        theta -= 0.001 * mh / (vh.sqrt() + 1e-8);
        assert!((value[0] - theta).abs() < 1e-12);
    }
}

#[test]
fn checker_accepts_linear_and_rejects_corrupted() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = GradCheckConfig::default();
    let mut lin = LinearLayer(msapdm::nncore::linear_params(6, 5, &mut rng));
    let x = random_tensor(Shape::new(3, 6, 1), &mut rng);
    let good = gradient_check(&mut lin, &x, &cfg).unwrap();
    assert!(good.max_rel_error < 1e-6, "{good:?}");
    assert!(good.checked > 0);

    let mut bad = Corrupted(relu_component());
    let x = random_tensor(Shape::new(2, 3, 20), &mut rng);
    let report = gradient_check(&mut bad, &x, &cfg).unwrap();
    // doubling the gradient gives |2g - g| / |2g| = 0.5 wherever g != 0
    assert!((0.45..=0.55).contains(&report.max_rel_error), "{report:?}");
    assert!(!report.passes(1e-4));
}
