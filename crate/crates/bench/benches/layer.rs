use std::hint::black_box;

use combnet::layer::{comb_layer_backward, comb_layer_forward, BankHyperparams, CombBankParams, EnvelopeConfig, Mode};
use combnet_bench::test_signal;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn forward(c: &mut Criterion) {
    let x = test_signal(32_768, 16_000);
    let env = EnvelopeConfig::default();
    let mut g = c.benchmark_group("comb_layer");
    g.throughput(Throughput::Elements(x.len() as u64));
    for channels in [8usize, 32, 80] {
        let params = CombBankParams::init(channels, BankHyperparams::default(), 0).unwrap();
        g.bench_with_input(BenchmarkId::new("forward_inference", channels), &params, |b, p| {
            b.iter(|| comb_layer_forward(black_box(&x), p, &env, Mode::Inference).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("forward_training", channels), &params, |b, p| {
            b.iter(|| comb_layer_forward(black_box(&x), p, &env, Mode::Training).unwrap())
        });
        let (fm, saved) = comb_layer_forward(&x, &params, &env, Mode::Training).unwrap();
        let upstream = vec![1.0f32; fm.values().len()];
        g.bench_with_input(BenchmarkId::new("backward", channels), &saved, |b, s| {
            b.iter(|| comb_layer_backward(black_box(&upstream), s).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, forward);
criterion_main!(benches);
