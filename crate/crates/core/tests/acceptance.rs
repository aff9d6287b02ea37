//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use hcfqkd_core::classical::{ber, ln_ber, sensitivity};
use hcfqkd_core::cow::{alice_generate, bob_receive, expected_rates, frame_sync, measure_rates, OperatingPoint};
use hcfqkd_core::detection::SpadParams;
use hcfqkd_core::distill::{aes_budget_default, estimate, hamming_distance, sift, ToeplitzMatrix};
use hcfqkd_core::harness::{
    aes_note, calibrate, emit_csv, evaluate_point, run_scenario, run_sweep, write_meta, Anchor, Backend,
    CalibrationTarget, PointConfig, ScenarioConfig,
};
use hcfqkd_core::{FiberKind, FrameSpec};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&configs().join(name)).unwrap()
}

fn anchor_target() -> CalibrationTarget {
    CalibrationTarget {
        anchors: vec![Anchor { aggregate_dbm: 8.0, channel_count: 17, qber: 0.012 }],
        fit_spr_scale: false,
    }
}

fn report(n: u32, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} {detail}");
    assert!(ok, "criterion {n} failed: {detail}");
}

fn at(cfg: &ScenarioConfig, dbm: f64, n: usize) -> hcfqkd_core::ScenarioResult {
    evaluate_point(cfg, PointConfig { aggregate_dbm: dbm, channel_count: n }, 0).unwrap()
}

#[test]
fn criterion_1_calibration_anchor() {
    let t = Instant::now();
    let cal = calibrate(&load("default.json"), &anchor_target()).unwrap();
    let mut cfg = cal.config;
    cfg.point = PointConfig { aggregate_dbm: 8.0, channel_count: 17 };
    let q = run_scenario(&cfg).unwrap().qber;
    let secs = t.elapsed().as_secs_f64();
    let shipped = run_scenario(&load("calibrated.json")).unwrap().qber;
    let ok = (q - 0.012).abs() <= 2e-4 && (shipped - 0.012).abs() <= 2e-4 && secs < 5.0;
    report(1, ok, format!("qber {q:.6} (shipped config {shipped:.6}), scatter_fraction {:e}, {secs:.2} s", cfg.link.ce_t.scatter_fraction));
}

#[test]
fn criterion_2_skr_ordering() {
    let cfg = load("calibrated.json");
    let low = at(&cfg, -1.0, 6).skr;
    let mid = at(&cfg, 8.0, 17).skr;
    let high = at(&cfg, 11.0, 17).skr;
    let ordered = low > mid && mid > high && high > 0.0;
    let ratio = high / mid;
    report(
        2,
        ordered && ratio < 0.25,
        format!(
            "SKR(-1,6ch) {low:.1} > SKR(8,17ch) {mid:.1} > SKR(11,17ch) {high:.1} > 0: {ordered}; \
             SKR(11)/SKR(8) = {ratio:.4} (needs < 0.25)"
        ),
    );
}

#[test]
fn criterion_3_hcf_advantage() {
    let hcf = load("calibrated.json");
    let mut smf = hcf.clone();
    smf.link.fiber.kind = FiberKind::Smf;
    let mut factors = Vec::new();
    for (dbm, n) in [(-1.0, 6), (8.0, 17), (11.0, 17)] {
        factors.push(at(&smf, dbm, n).noise.spr_flux / at(&hcf, dbm, n).noise.spr_flux);
    }
    let expect = 10f64.powf(3.5);
    let factor_ok = factors.iter().all(|f| (f / expect - 1.0).abs() <= 0.01);
    let skr = at(&smf, 11.0, 17).skr;
    report(3, factor_ok && skr == 0.0, format!("SpRS factor {factors:?} vs {expect:.1}; SMF SKR at 11 dBm = {skr}"));
}

#[test]
fn criterion_4_no_load_ase() {
    let cfg = load("calibrated.json");
    let empty = at(&cfg, -1.0, 0);
    let loaded = at(&cfg, -1.0, 6);
    report(
        4,
        cfg.link.amplifier.ase_density_noload_dbm > cfg.link.amplifier.ase_density_loaded_dbm && empty.skr < loaded.skr,
        format!("SKR(0ch) {:.1} < SKR(-1 dBm, 6ch) {:.1}", empty.skr, loaded.skr),
    );
}

#[test]
fn criterion_5_backend_equivalence() {
    let t = Instant::now();
    let spec = FrameSpec::default();
    let spad = SpadParams { dead_time_s: 0.0, ..SpadParams::default() };
    let mut worst = [0.0f64; 3];
    let mut failures = Vec::new();
    for noise in [1e3, 5e4, 1e6] {
        let op = OperatingPoint { noise_flux: noise, spad, ..OperatingPoint::default() };
        let expect = expected_rates(&op, &spec).unwrap();
        for seed in 0..20u64 {
            let alice = alice_generate(10_000, spec, op.mu, op.decoy_fraction, 1000 + seed).unwrap();
            let report = frame_sync(bob_receive(&alice, &op, 2000 + seed).unwrap(), &alice).unwrap();
            let m = measure_rates(&alice, &report).unwrap();
            let sigma = m.model_sigmas(&op, &spec).unwrap();
            let z = [
                (m.r_sift - expect.r_sift) / sigma[0],
                (m.qber - expect.qber) / sigma[1],
                (m.visibility - expect.visibility) / sigma[2],
            ];
            for (w, zi) in worst.iter_mut().zip(z) {
                *w = w.max(zi.abs());
            }
            if z.iter().any(|zi| zi.abs() > 5.0) {
                failures.push((noise, seed, z));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        5,
        failures.is_empty() && secs < 60.0,
        format!("max |z| R_sift {:.2}, QBER {:.2}, V {:.2}; {} outliers; {secs:.1} s", worst[0], worst[1], worst[2], failures.len()),
    );
}

#[test]
fn criterion_6_distillation() {
    let spec = FrameSpec::default();
    let clean = SpadParams { dark_rate_hz: 0.0, dead_time_s: 0.0, ..SpadParams::default() };
    let mut notes = Vec::new();

    // Error-free channel.
    let op = OperatingPoint { intrinsic_qber: 0.0, noise_flux: 0.0, spad: clean, ..OperatingPoint::default() };
    let mut identical = true;
    let mut disjoint = true;
    for seed in 0..20u64 {
        let alice = alice_generate(2_000, spec, op.mu, op.decoy_fraction, seed).unwrap();
        let aligned = frame_sync(bob_receive(&alice, &op, seed + 100).unwrap(), &alice).unwrap();
        let s = sift(&alice, &aligned).unwrap();
        identical &= !s.alice.is_empty() && s.alice.bits == s.bob.bits;
    }
    notes.push(format!("error-free identical {identical}"));

    // Injected errors.
    let mut recovered = true;
    for q in [0.005, 0.02, 0.05] {
        let op = OperatingPoint { intrinsic_qber: q, noise_flux: 0.0, spad: clean, ..OperatingPoint::default() };
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let alice = alice_generate(20_000, spec, op.mu, op.decoy_fraction, 7 + seed).unwrap();
            let aligned = frame_sync(bob_receive(&alice, &op, 70 + seed).unwrap(), &alice).unwrap();
            let s = sift(&alice, &aligned).unwrap();
            let e = estimate(&s.alice, &s.bob, &s.monitor, 0.1, 100, 700 + seed).unwrap();
            let k = e.estimate.sample_size as f64;
            let z = (e.estimate.qber_est - q) / (q * (1.0 - q) / k).sqrt();
            worst = worst.max(z.abs());
            recovered &= z.abs() <= 5.0;
            let kept: std::collections::HashSet<_> = e.alice.positions.iter().collect();
            disjoint &= e.estimate.disclosed.iter().all(|&i| !kept.contains(&s.alice.positions[i]))
                && e.alice.len() + e.estimate.sample_size == s.alice.len()
                && hamming_distance(&e.alice.bits, &e.bob.bits) + e.estimate.disclosed.iter().filter(|&&i| s.alice.bits[i] != s.bob.bits[i]).count()
                    == hamming_distance(&s.alice.bits, &s.bob.bits);
        }
        notes.push(format!("q {q}: max |z| {worst:.2}"));
    }

    // Exhaustive universality, n = 8 -> 4.
    let (n, out) = (8usize, 4usize);
    let diag = n + out - 1;
    let family = 1usize << diag;
    let p = 1.0 / 16.0;
    let sigma_exh = (p * (1.0 - p) / family as f64).sqrt();
    let mut exh_worst = 0.0f64;
    let matrices: Vec<ToeplitzMatrix> = (0..family)
        .map(|m| ToeplitzMatrix::from_diagonals(out, n, (0..diag).map(|b| (m >> b) & 1 == 1).collect()).unwrap())
        .collect();
    for d in 1..(1usize << n) {
        let x: Vec<u8> = (0..n).map(|b| ((d >> b) & 1) as u8).collect();
        let zero = matrices.iter().filter(|t| t.apply(&x).unwrap().iter().all(|&b| b == 0)).count();
        exh_worst = exh_worst.max(((zero as f64 / family as f64) - p).abs() / sigma_exh);
    }
    let universal = exh_worst <= 5.0;
    notes.push(format!("exhaustive max |z| {exh_worst:.2}"));

    // Seeded family, 2000 seeds, fixed pair.
    let seeds = 2000u64;
    let a = [1u8, 0, 1, 1, 0, 0, 1, 0];
    let b = [0u8, 0, 1, 0, 1, 1, 1, 0];
    let hits = (0..seeds)
        .filter(|&s| {
            let t = ToeplitzMatrix::from_seed(out, n, s).unwrap();
            t.apply(&a).unwrap() == t.apply(&b).unwrap()
        })
        .count();
    let z_seed = (hits as f64 / seeds as f64 - p) / (p * (1.0 - p) / seeds as f64).sqrt();
    notes.push(format!("seeded |z| {:.2}", z_seed.abs()));
    notes.push(format!("disjoint {disjoint}"));

    report(6, identical && recovered && universal && z_seed.abs() <= 5.0 && disjoint, notes.join("; "));
}

#[test]
fn criterion_7_classical_ber() {
    let cfg = load("calibrated.json");
    let rx = cfg.receiver_model().unwrap();
    let anchor = ber(-23.6, &rx, 0.0).unwrap();
    let anchor_ok = (anchor / 1e-10 - 1.0).abs() <= 0.02;
    let sens: Vec<f64> = (0..cfg.plan.grid_count).map(|i| sensitivity(&rx, rx.offset(i), 1e-10).unwrap()).collect();
    let spread = sens.iter().cloned().fold(f64::MIN, f64::max) - sens.iter().cloned().fold(f64::MAX, f64::min);
    let spread_ok = (spread - 1.8).abs() < 1e-9;
    let mut monotone = true;
    for i in 0..cfg.plan.grid_count {
        let off = rx.offset(i);
        let mut prev = ln_ber(-30.0, &rx, off).unwrap();
        let mut prev_raw = ber(-30.0, &rx, off).unwrap();
        for k in 1..=2000 {
            let rop = -30.0 + k as f64 * 0.01;
            let cur = ln_ber(rop, &rx, off).unwrap();
            let raw = ber(rop, &rx, off).unwrap();
            monotone &= cur < prev && raw <= prev_raw && (prev_raw == 0.0 || raw < prev_raw || raw == 0.0);
            prev = cur;
            prev_raw = raw;
        }
    }
    report(
        7,
        anchor_ok && spread_ok && monotone,
        format!("BER(-23.6) {anchor:.4e}; spread {spread:.12} dB; strictly decreasing on [-30, -10]: {monotone}"),
    );
}

#[test]
fn criterion_8_aes_budget() {
    let budget = aes_budget_default(170e9).unwrap();
    let note = aes_note(&load("calibrated.json")).unwrap();
    report(8, budget == 85.0 && note.contains("85 bit/s") && note.contains("65 bit/s"), format!("budget {budget} bit/s; {note}"));
}

#[test]
fn criterion_9_determinism() {
    let t = Instant::now();
    let mut ok = true;
    let mut cfgs = vec![load("calibrated.json")];
    let mut mc = load("calibrated.json");
    mc.backend = Backend::Montecarlo { frames: 10_000, seed: 2024 };
    cfgs.push(mc);
    let dir = tempfile::tempdir().unwrap();
    for (i, cfg) in cfgs.iter().enumerate() {
        let mut files = Vec::new();
        for run in 0..2 {
            let csv = dir.path().join(format!("sweep{i}_{run}.csv"));
            let rows = run_sweep(cfg).unwrap();
            emit_csv(&rows, &csv).unwrap();
            let meta = write_meta(cfg, rows.len(), &csv).unwrap();
            files.push((std::fs::read(&csv).unwrap(), std::fs::read(&meta).unwrap()));
        }
        ok &= files[0] == files[1];
    }
    let secs = t.elapsed().as_secs_f64();
    report(9, ok && secs < 120.0, format!("analytic and Monte-Carlo sweeps byte-identical: {ok}; {secs:.1} s"));
}
