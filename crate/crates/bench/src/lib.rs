//! Shared inputs for the benchmarks.

use combnet::AudioSignal;

/// Deterministic noise-like test signal from a linear congruential generator.
pub fn test_signal(len: usize, sample_rate: u32) -> AudioSignal {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let x = (0..len)
        .map(|_| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            ((state >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
        })
        .collect();
    AudioSignal::new(x, sample_rate).expect("finite samples")
}
