use combnet::comb::{
    build_fir_kernel, fir_comb_dense, iir_comb, interp_comb_wholekernel, scale_to_f0, sparse_comb, ScalingConfig,
};
use combnet::data::{generate_split, DatasetSpec, Split};
use combnet::layer::{
    comb_layer_forward, init_params, BankHyperparams, CombBankParams, EnvelopeConfig, FeatureMap, Mode,
};
use combnet::nn::{Conv1dLayer, Matrix};
use combnet::AudioSignal;
use proptest::prelude::*;

const ALPHA: f64 = 0.9;

fn signal(len: usize) -> impl Strategy<Value = Vec<f32>> {
    proptest::collection::vec(-1.0f32..1.0, len)
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn all_paths(x: &[f32], delay: f64, echoes: usize) -> Vec<Vec<f32>> {
    let k = delay.round() as usize;
    vec![
        iir_comb(x, k, ALPHA).unwrap(),
        fir_comb_dense(x, &build_fir_kernel(k, ALPHA, echoes).unwrap()),
        interp_comb_wholekernel(x, delay, ALPHA, echoes).unwrap(),
        sparse_comb(x, delay, ALPHA, echoes).unwrap(),
    ]
}

/// Weight that puts a channel exactly on `f0` (up to round-off).
fn w_for(f0: f64, s: &ScalingConfig) -> f64 {
    let sigma = (f0 / s.f_min).ln() / (s.f_max / s.f_min).ln();
    (sigma / (1.0 - sigma)).ln()
}

fn hyper() -> BankHyperparams {
    BankHyperparams::default()
}

fn bank(w: Vec<f64>) -> CombBankParams {
    CombBankParams::new(w, hyper()).unwrap()
}

fn audio(x: Vec<f32>) -> AudioSignal {
    AudioSignal::new(x, 16_000).unwrap()
}

fn env() -> EnvelopeConfig {
    EnvelopeConfig::new(256, 128).unwrap()
}

fn forward(x: &AudioSignal, p: &CombBankParams, mode: Mode) -> FeatureMap {
    comb_layer_forward(x, p, &env(), mode).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_path_is_linear(
        x1 in signal(2048),
        x2 in signal(2048),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        k in 2usize..120,
        frac in 0.0f64..1.0,
    ) {
        let delay = k as f64 + frac;
        let mix: Vec<f32> = x1.iter().zip(&x2).map(|(&u, &v)| (a * f64::from(u) + b * f64::from(v)) as f32).collect();
        let (p1, p2, pm) = (all_paths(&x1, delay, 10), all_paths(&x2, delay, 10), all_paths(&mix, delay, 10));
        for i in 0..4 {
            let combined: Vec<f32> = p1[i].iter().zip(&p2[i]).map(|(&u, &v)| (a * f64::from(u) + b * f64::from(v)) as f32).collect();
            prop_assert!(max_abs_diff(&pm[i], &combined) <= 1e-5, "path {i}");
        }
    }

    #[test]
    fn integer_delay_paths_agree(x in signal(3000), k in 1usize..150, echoes in 1usize..12) {
        let p = all_paths(&x, k as f64, echoes);
        prop_assert!(max_abs_diff(&p[1], &p[2]) <= 1e-6);
        prop_assert!(max_abs_diff(&p[1], &p[3]) <= 1e-6);
        let exact = ((echoes + 1) * k).min(x.len());
        for fir in &p[1..] {
            prop_assert!(max_abs_diff(&p[0][..exact], &fir[..exact]) <= 1e-5);
        }
    }

    #[test]
    fn truncation_error_is_bounded(x in signal(4000), k in 1usize..60, echoes in 0usize..12, scale in 0.1f32..3.0) {
        let x: Vec<f32> = x.iter().map(|v| v * scale).collect();
        let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
        let bound = ALPHA.powi(echoes as i32 + 1) / (1.0 - ALPHA) * peak;
        let iir = iir_comb(&x, k, ALPHA).unwrap();
        let fir = fir_comb_dense(&x, &build_fir_kernel(k, ALPHA, echoes).unwrap());
        prop_assert!(f64::from(max_abs_diff(&iir, &fir)) <= bound + 1e-5);
    }

    #[test]
    fn constant_input_nearly_attains_the_bound(k in 1usize..20) {
        // A constant input reaches the bound from below as n grows.
        let x = vec![1.0f32; 400 * k];
        let iir = iir_comb(&x, k, ALPHA).unwrap();
        let fir = fir_comb_dense(&x, &build_fir_kernel(k, ALPHA, 10).unwrap());
        let bound = ALPHA.powi(11) / (1.0 - ALPHA);
        let d = f64::from(max_abs_diff(&iir, &fir));
        prop_assert!(d <= bound + 1e-5 && d >= 0.99 * bound);
    }

    #[test]
    fn scaling_is_monotone_and_interior(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let s = ScalingConfig::new(200.0, 500.0).unwrap();
        let (fa, fb) = (scale_to_f0(a, &s), scale_to_f0(b, &s));
        prop_assert!(fa > 200.0 && fa < 500.0);
        if a < b && (b - a) > 1e-9 && a.abs() < 25.0 && b.abs() < 25.0 {
            prop_assert!(fa < fb);
        }
        if a <= b {
            prop_assert!(fa <= fb);
        }
    }

    #[test]
    fn layer_is_permutation_equivariant(x in signal(2048), w in proptest::collection::vec(-2.0f64..2.0, 2..6), rot in 0usize..6) {
        let m = w.len();
        let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let x = audio(x);
        for mode in [Mode::Training, Mode::Inference] {
            let a = forward(&x, &bank(w.clone()), mode);
            let b = forward(&x, &bank(pw.clone()), mode);
            for (row, &src) in perm.iter().enumerate() {
                prop_assert_eq!(b.row(row), a.row(src));
            }
        }
    }

    #[test]
    fn layer_is_positively_homogeneous(x in signal(2048), w in proptest::collection::vec(-2.0f64..2.0, 1..4), c in 0.01f32..20.0) {
        let p = bank(w);
        let scaled = audio(x.iter().map(|v| v * c).collect());
        let x = audio(x);
        for mode in [Mode::Training, Mode::Inference] {
            let a = forward(&x, &p, mode);
            let b = forward(&scaled, &p, mode);
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u * c - v).abs() <= 1e-5 * (1.0 + v.abs()), "{} vs {}", u * c, v);
            }
        }
    }

    #[test]
    fn perturbing_one_weight_changes_only_its_row(x in signal(2048), w in proptest::collection::vec(-2.0f64..2.0, 2..5), pick in 0usize..5, dw in 0.01f64..0.5) {
        let m = pick % w.len();
        let mut w2 = w.clone();
        w2[m] += dw;
        let x = audio(x);
        let a = forward(&x, &bank(w), Mode::Training);
        let b = forward(&x, &bank(w2), Mode::Training);
        for r in 0..a.channels() {
            if r != m {
                prop_assert_eq!(a.row(r), b.row(r));
            }
        }
    }

    #[test]
    fn modes_agree_for_integer_delays(x in signal(4096), ks in proptest::collection::vec(33usize..79, 1..4)) {
        let s = hyper().scaling;
        let w: Vec<f64> = ks.iter().map(|&k| w_for(16_000.0 / k as f64, &s)).collect();
        let p = bank(w);
        let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
        let bound = ALPHA.powi(11) / (1.0 - ALPHA) * peak;
        let x = audio(x);
        let train = forward(&x, &p, Mode::Training);
        let infer = forward(&x, &p, Mode::Inference);
        prop_assert!(f64::from(max_abs_diff(train.values(), infer.values())) <= bound + 1e-5);
    }

    #[test]
    fn causal_conv_with_comb_kernel_reproduces_dense_fir(x in signal(1500), k in 1usize..40, echoes in 0usize..8) {
        let kernel = build_fir_kernel(k, ALPHA, echoes).unwrap();
        let dense = kernel.to_dense();
        let len = dense.len();
        let reversed: Vec<f64> = dense.iter().rev().copied().collect();
        let layer = Conv1dLayer::<f64> {
            kernels: reversed,
            bias: vec![0.0],
            c_out: 1,
            c_in: 1,
            len,
            stride: 1,
            padding: (len - 1, 0),
        };
        let input = Matrix::from_vec(1, x.len(), x.iter().map(|&v| f64::from(v)).collect());
        let conv = layer.forward(&input).unwrap();
        let fir = fir_comb_dense(&x, &kernel);
        for (c, f) in conv.data().iter().zip(&fir) {
            let tol = 2.0 * f32::EPSILON * (1.0 + f.abs());
            prop_assert!((*c as f32 - f).abs() <= tol, "{} vs {}", c, f);
        }
    }
}

#[test]
fn parameter_count_equals_channel_count() {
    for m in [1usize, 7, 32, 80] {
        assert_eq!(init_params(m, hyper().scaling, 0).unwrap().trainable_count(), m);
    }
    assert!(init_params(0, hyper().scaling, 0).is_err());
}

#[test]
fn initial_f0_median_is_near_geometric_mean() {
    let mut f0 = init_params(1000, hyper().scaling, 2024).unwrap().f0s();
    f0.sort_by(f64::total_cmp);
    let median = 0.5 * (f0[499] + f0[500]);
    assert!((290.0..=345.0).contains(&median), "median {median}");
    assert!(f0.iter().all(|&f| f > 200.0 && f < 500.0));
}

#[test]
fn generated_labels_are_monophonic() {
    let spec = DatasetSpec {
        train: 50,
        valid: 1,
        test: 1,
        ..DatasetSpec::default()
    };
    for clip in generate_split(&spec, Split::Train).unwrap() {
        for row in clip.labels.binary() {
            assert!(row.iter().filter(|&&b| b).count() <= 1);
        }
    }
}
