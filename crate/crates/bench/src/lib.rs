//! Shared fixtures for the pipeline benchmarks.

use hcfqkd_core::cow::{alice_generate, AliceRecord, OperatingPoint};
use hcfqkd_core::harness::{Backend, ScenarioConfig};
use hcfqkd_core::FrameSpec;

/// The default analytic sweep config.
pub fn sweep_config() -> ScenarioConfig {
    ScenarioConfig { backend: Backend::Analytic, ..ScenarioConfig::default() }
}

/// A Monte-Carlo config over `frames` frames.
pub fn montecarlo_config(frames: u64) -> ScenarioConfig {
    ScenarioConfig { backend: Backend::Montecarlo { frames, seed: 7 }, ..ScenarioConfig::default() }
}

/// Alice's record plus an operating point at the default 8 dBm noise level.
pub fn link_fixture(frames: u64) -> (AliceRecord, OperatingPoint) {
    let alice = alice_generate(frames, FrameSpec::default(), 0.1, 0.1, 11).expect("valid frame spec");
    let op = OperatingPoint { noise_flux: 5e4, ..OperatingPoint::default() };
    (alice, op)
}

/// Pseudo-random bit vector of length `n`.
pub fn bits(n: usize, seed: u64) -> Vec<u8> {
    let mut x = seed | 1;
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x & 1) as u8
        })
        .collect()
}
