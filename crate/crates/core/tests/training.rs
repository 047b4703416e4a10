mod common;

use combnet::data::{generate_split, DatasetSpec, Split};
use combnet::experiments::{train_model, ModelSpec, Schedule};
use combnet::layer::{comb_layer_backward, comb_layer_forward, BankHyperparams, CombBankParams, EnvelopeConfig, Mode};
use combnet::nn::TrainConfig;
use combnet::AudioSignal;
use common::{f0_from_w, fractional_margin, pooled_sum, sparse_comb_f64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WINDOW: usize = 256;
const STRIDE: usize = 128;

/// Draws bank weights whose echo positions stay at least `margin` away from
/// integers, and a noise signal with no near-ties inside any pooling window.
fn well_conditioned(rng: &mut ChaCha8Rng, channels: usize, margin: f64) -> (Vec<f64>, Vec<f32>) {
    let h = BankHyperparams::default();
    let fs = f64::from(h.sample_rate);
    let delay = |w: f64| fs / f0_from_w(w, h.scaling.f_min, h.scaling.f_max);
    let w: Vec<f64> = (0..channels)
        .map(|_| loop {
            let w = rng.gen_range(-2.0..2.0);
            if fractional_margin(delay(w), h.echo_count) >= margin {
                break w;
            }
        })
        .collect();
    loop {
        let x: Vec<f32> = (0..4096).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        let clear = w.iter().all(|&wm| {
            let y = sparse_comb_f64(&x64, delay(wm), h.alpha, h.echo_count);
            pooled_sum(&y, WINDOW, STRIDE).1 > 1e-4
        });
        if clear {
            return (w, x);
        }
    }
}

#[test]
fn layer_gradient_matches_finite_differences() {
    let h = BankHyperparams::default();
    let fs = f64::from(h.sample_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let env = EnvelopeConfig::new(WINDOW, STRIDE).unwrap();
    for _ in 0..5 {
        let (w, x) = well_conditioned(&mut rng, 3, 0.05);
        let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        let params = CombBankParams::new(w.clone(), h).unwrap();
        let signal = AudioSignal::new(x, h.sample_rate).unwrap();
        let (features, saved) = comb_layer_forward(&signal, &params, &env, Mode::Training).unwrap();
        let grads = comb_layer_backward(&vec![1.0; features.values().len()], &saved).unwrap();
        let loss = |wm: f64| {
            let delay = fs / f0_from_w(wm, h.scaling.f_min, h.scaling.f_max);
            pooled_sum(&sparse_comb_f64(&x64, delay, h.alpha, h.echo_count), WINDOW, STRIDE).0
        };
        for (m, &wm) in w.iter().enumerate() {
            let step = 1e-6;
            let fd = (loss(wm + step) - loss(wm - step)) / (2.0 * step);
            let rel = (grads.d_w[m] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-2, "channel {m}: analytic {} fd {fd}", grads.d_w[m]);
        }
    }
}

#[test]
fn smoothed_loss_falls_over_the_first_200_steps() {
    let data = DatasetSpec {
        train: 40,
        valid: 4,
        test: 1,
        ..DatasetSpec::default()
    };
    let train = generate_split(&data, Split::Train).unwrap();
    let valid = generate_split(&data, Split::Valid).unwrap();
    let cfg = TrainConfig {
        lr: 1e-2,
        max_steps: 200,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let schedule = Schedule {
        crop_samples: 8192,
        eval_interval_steps: 200,
        ..Schedule::default()
    };
    let out = train_model(&ModelSpec::comb(8), &train, &valid, &cfg, &schedule).unwrap();
    assert_eq!(out.losses.len(), 200);
    let ma: Vec<f64> = out.losses.windows(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    assert!(ma.last().unwrap() < ma.first().unwrap(), "{:?}", (ma.first(), ma.last()));
    let mid = ma[ma.len() / 2];
    assert!(*ma.last().unwrap() < mid && mid < ma[0]);
}
