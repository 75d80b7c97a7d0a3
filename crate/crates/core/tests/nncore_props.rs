use msapdm::nncore::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_conv(x: &Tensor<f32>, w: &[f32], bias: &[f32], spec: &ConvSpec) -> Vec<f32> {
    let (b, cin, t) = (x.batch(), x.channels(), x.time());
    let (cout, k) = (spec.out_channels, spec.kernel);
    let t_out = (t + 2 * spec.padding - k) / spec.stride + 1;
    let mut out = vec![0.0f32; b * cout * t_out];
    for bi in 0..b {
        for o in 0..cout {
            for to in 0..t_out {
                let mut acc = bias[o] as f64;
                for i in 0..cin {
                    for j in 0..k {
                        let pos = (to * spec.stride + j) as isize - spec.padding as isize;
                        if pos >= 0 && (pos as usize) < t {
                            acc += w[(o * cin + i) * k + j] as f64 * x.get(bi, i, pos as usize) as f64;
                        }
                    }
                }
                out[(bi * cout + o) * t_out + to] = acc as f32;
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conv_matches_naive_reference(
        seed in any::<u64>(),
        batch in 1usize..3,
        cin in 1usize..4,
        cout in 1usize..4,
        kernel in prop::sample::select(vec![1usize, 3, 5]),
        stride in 1usize..3,
        padding in 0usize..3,
        extra in 0usize..12,
    ) {
        let t = kernel + extra;
        let spec = ConvSpec { in_channels: cin, out_channels: cout, kernel, stride, padding };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = Conv1d::<f32>::new(spec, true, &mut rng).unwrap();
        let bias: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut params = conv.params.clone();
        params.bias.as_mut().unwrap().value = bias.clone();
        let x = Tensor::from_vec(
            Shape::new(batch, cin, t),
            (0..batch * cin * t).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        ).unwrap();
        let y = conv1d_forward(&x, &params, &spec).unwrap();
        let expected = naive_conv(&x, &params.weight.value, &bias, &spec);
        prop_assert_eq!(y.time(), spec.output_len(t).unwrap());
        for (a, b) in y.data().iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-5, "{} vs {}", a, b);
        }
    }

    #[test]
    fn soft_threshold_is_non_expansive(values in prop::collection::vec(-50.0f32..50.0, 1..64), tau in 0.0f32..10.0) {
        let n = values.len();
        let x = Tensor::from_vec(Shape::new(1, 1, n), values).unwrap();
        let y = soft_threshold(&x, &[tau]).unwrap();
        for (&xi, &yi) in x.data().iter().zip(y.data()) {
            prop_assert!(yi.abs() <= xi.abs());
            prop_assert!(yi == 0.0 || yi.signum() == xi.signum());
            if xi.abs() <= tau {
                prop_assert_eq!(yi, 0.0);
            } else {
                prop_assert!((yi.abs() - (xi.abs() - tau)).abs() <= 1e-5 * xi.abs().max(1.0));
            }
        }
    }

    #[test]
    fn split_then_concat_is_identity(seed in any::<u64>(), s in 1usize..6, w in 1usize..4, t in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_vec(
            Shape::new(2, s * w, t),
            (0..2 * s * w * t).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        ).unwrap();
        let parts = split_channels(&x, s).unwrap();
        prop_assert_eq!(parts.len(), s);
        let back = concat_channels(&parts).unwrap();
        prop_assert_eq!(back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn cross_entropy_is_nonnegative_with_zero_sum_rows(
        logits in prop::collection::vec(-30.0f32..30.0, 12),
        labels in prop::collection::vec(0usize..4, 3),
    ) {
        let x = Tensor::from_vec(Shape::new(3, 4, 1), logits).unwrap();
        let (loss, grad) = softmax_cross_entropy(&x, &labels).unwrap();
        prop_assert!(loss >= 0.0 && loss.is_finite());
        for b in 0..3 {
            let row: f32 = grad.sample_slice(b).iter().sum();
            prop_assert!(row.abs() <= 1e-6);
        }
    }

    #[test]
    fn layers_stay_finite(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_vec(Shape::new(2, 4, 7), (0..56).map(|_| rng.random_range(-1e3f32..1e3)).collect()).unwrap();
        prop_assert!(relu(&x).is_finite());
        prop_assert!(sigmoid(&x).is_finite());
        prop_assert!(global_avg_pool(&x).unwrap().is_finite());
        let conv = Conv1d::<f32>::new(ConvSpec::same(4, 3, 3), true, &mut rng).unwrap();
        let y = conv.forward(&x).unwrap();
        prop_assert!(y.is_finite());
        let mut conv = conv;
        prop_assert!(conv.backward(&y, &x).unwrap().is_finite());
    }
}

#[test]
fn soft_threshold_on_ten_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let xs: Vec<f32> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let taus: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let x = Tensor::from_vec(Shape::new(n, 1, 1), xs.clone()).unwrap();
    let y = soft_threshold(&x, &taus).unwrap();
    for ((&xi, &ti), &yi) in xs.iter().zip(&taus).zip(y.data()) {
        assert!(yi.abs() <= xi.abs());
        assert!(yi == 0.0 || yi.signum() == xi.signum());
        assert_eq!(xi.abs() <= ti, yi == 0.0, "dead zone at x={xi} tau={ti}");
    }
}

#[test]
fn zero_grad_after_backward_clears_buffers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut conv = Conv1d::<f32>::new(ConvSpec::same(2, 2, 3), true, &mut rng).unwrap();
    let x = Tensor::full(Shape::new(1, 2, 5), 1.0f32);
    let y = conv.forward(&x).unwrap();
    conv.backward(&y, &x).unwrap();
    assert!(conv.params.weight.grad.iter().any(|&g| g != 0.0));
    conv.zero_grad();
    for (_, p) in conv.named_params() {
        assert_eq!(p.grad.len(), p.value.len());
        assert!(p.grad.iter().all(|&g| g == 0.0));
    }
}
