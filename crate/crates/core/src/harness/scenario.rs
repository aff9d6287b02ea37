use rayon::prelude::*;
use serde::Serialize;

use super::config::{Backend, PointConfig, ScenarioConfig};
use crate::classical::ber;
use crate::cow::{alice_generate, bob_receive, expected_rates, frame_sync};
use crate::distill::{estimate, privacy_amplify, secure_key_rate_with, sift, ParamEstimate};
use crate::error::{Error, Result};
use crate::link::NoiseBudget;

/// One evaluated operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub channel_count: usize,
    /// Requested aggregated classical power at the span input, dBm.
    pub aggregated_classical_dbm: f64,
    pub a_tx_db: f64,
    pub quantum_loss_db: f64,
    pub noise: NoiseBudget,
    pub r_sift: f64,
    pub qber: f64,
    pub visibility: f64,
    pub secret_fraction: f64,
    pub skr: f64,
    pub backend: &'static str,
    pub seed: Option<u64>,
    pub sifted_bits: Option<u64>,
    pub secure_bits: Option<u64>,
    /// BER of each lit classical channel, in grid order.
    pub channel_ber: Vec<f64>,
}

/// splitmix64 finaliser over `seed ^ tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates the configured point. Identical to the single row a one-point
/// sweep would produce.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    evaluate_point(config, config.point, 0)
}

/// Evaluates every (channel count, power) pair of the sweep, ordered by
/// channel count then power, both ascending.
pub fn run_sweep(config: &ScenarioConfig) -> Result<Vec<ScenarioResult>> {
    config.validate()?;
    let points = sweep_points(config);
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluate_point(config, *p, i as u64))
        .collect()
}

pub fn sweep_points(config: &ScenarioConfig) -> Vec<PointConfig> {
    let mut counts = config.sweep.channel_counts.clone();
    counts.sort_unstable();
    let mut powers = config.sweep.powers_dbm.clone();
    powers.sort_by(f64::total_cmp);
    counts
        .iter()
        .flat_map(|&n| powers.iter().map(move |&p| PointConfig { aggregate_dbm: p, channel_count: n }))
        .collect()
}

/// Evaluates a single point; `index` decorrelates Monte-Carlo seeds across a sweep.
pub fn evaluate_point(config: &ScenarioConfig, point: PointConfig, index: u64) -> Result<ScenarioResult> {
    let wrap = |e: Error| Error::Scenario {
        context: format!("{} channels at {} dBm", point.channel_count, point.aggregate_dbm),
        source: Box::new(e),
    };
    evaluate_inner(config, point, index).map_err(wrap)
}

fn evaluate_inner(config: &ScenarioConfig, point: PointConfig, index: u64) -> Result<ScenarioResult> {
    let plan = config.channel_plan(point.channel_count)?;
    let chain = config.link_chain(&plan, point.aggregate_dbm)?;
    let path = chain.evaluate_quantum_path(&plan)?;
    let op = config.operating_point(path.loss_db, path.noise.total_flux);
    op.validate()?;
    let spec = config.frame_spec();
    let strategy = config.distillation.strategy.get();
    let s = config.distillation.sample_fraction;
    let f_ec = config.distillation.f_ec;

    let rx = config.receiver_model()?;
    let channel_ber = plan
        .classical()
        .enumerate()
        .map(|(i, ch)| {
            let rop = match config.receiver.rop_dbm {
                Some(r) => r,
                None => chain.evaluate_classical_path(&plan, ch)?,
            };
            ber(rop, &rx, rx.offset(i))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut result = ScenarioResult {
        channel_count: point.channel_count,
        aggregated_classical_dbm: point.aggregate_dbm,
        a_tx_db: chain.a_tx_db,
        quantum_loss_db: path.loss_db,
        noise: path.noise,
        r_sift: 0.0,
        qber: 0.0,
        visibility: 0.0,
        secret_fraction: 0.0,
        skr: 0.0,
        backend: config.backend.tag(),
        seed: None,
        sifted_bits: None,
        secure_bits: None,
        channel_ber,
    };

    match config.backend {
        Backend::Analytic => {
            let rates = expected_rates(&op, &spec)?;
            let est = ParamEstimate::analytic(rates.qber, rates.visibility);
            result.r_sift = rates.r_sift;
            result.qber = rates.qber;
            result.visibility = rates.visibility;
            result.secret_fraction = strategy.fraction(est.qber_est, est.visibility_est, f_ec)?;
            result.skr = secure_key_rate_with(strategy, rates.r_sift, &est, s, f_ec)?;
        }
        Backend::Montecarlo { frames, seed } => {
            let point_seed = derive_seed(seed, index);
            let alice = alice_generate(frames, spec, op.mu, op.decoy_fraction, derive_seed(point_seed, 1))?;
            let report = bob_receive(&alice, &op, derive_seed(point_seed, 2))?;
            let aligned = frame_sync(report, &alice)?;
            let sifted = sift(&alice, &aligned)?;
            let duration = frames as f64 / spec.frame_rate_hz;
            let r_sift = sifted.alice.len() as f64 / duration;
            let est = estimate(
                &sifted.alice,
                &sifted.bob,
                &sifted.monitor,
                s,
                config.distillation.min_sifted_bits,
                derive_seed(point_seed, 3),
            )?;
            let f = strategy.fraction(est.estimate.qber_est, est.estimate.visibility_est, f_ec)?;
            let out_len = (f * est.alice.len() as f64).floor() as usize;
            let key = privacy_amplify(&est.alice.bits, out_len, derive_seed(point_seed, 4))?;
            result.r_sift = r_sift;
            result.qber = est.estimate.qber_est;
            result.visibility = est.estimate.visibility_est;
            result.secret_fraction = f;
            result.skr = secure_key_rate_with(strategy, r_sift, &est.estimate, s, f_ec)?;
            result.seed = Some(point_seed);
            result.sifted_bits = Some(sifted.alice.len() as u64);
            result.secure_bits = Some(key.len() as u64);
        }
    }
    Ok(result)
}
