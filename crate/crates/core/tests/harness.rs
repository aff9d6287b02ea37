use std::path::PathBuf;

use proptest::prelude::*;

use hcfqkd_core::cow::{alice_generate, bob_receive, frame_sync, AliceRecord, BobReport};
use hcfqkd_core::distill::sift;
use hcfqkd_core::harness::{
    calibrate, emit_csv, evaluate_point, run_scenario, run_sweep, Backend, CalibrationTarget, PointConfig,
    ScenarioConfig,
};
use hcfqkd_core::{Error, FiberKind, FrameSpec};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn calibrated() -> ScenarioConfig {
    ScenarioConfig::load(&configs().join("calibrated.json")).unwrap()
}

fn at(cfg: &ScenarioConfig, dbm: f64, n: usize) -> hcfqkd_core::ScenarioResult {
    evaluate_point(cfg, PointConfig { aggregate_dbm: dbm, channel_count: n }, 0).unwrap()
}

#[test]
fn shipped_calibration_is_reproducible() {
    let target: CalibrationTarget =
        serde_json::from_str(&std::fs::read_to_string(configs().join("anchors.json")).unwrap()).unwrap();
    let fresh = calibrate(&ScenarioConfig::load(&configs().join("default.json")).unwrap(), &target).unwrap();
    let shipped = calibrated();
    let rel = fresh.record.scatter_fraction / shipped.link.ce_t.scatter_fraction - 1.0;
    assert!(rel.abs() < 1e-9, "{rel}");
    assert!(shipped.calibration.is_some());
}

#[test]
fn no_load_without_ase_gives_intrinsic_qber() {
    let mut cfg = calibrated();
    cfg.link.amplifier.ase_enabled = false;
    cfg.point = PointConfig { aggregate_dbm: 8.0, channel_count: 0 };
    let with_dark = run_scenario(&cfg).unwrap();
    assert_eq!(with_dark.noise.total_flux, 0.0);
    assert!(with_dark.qber > 0.0067 && with_dark.qber < 0.0077, "{}", with_dark.qber);
    assert!(with_dark.skr > 0.0);
    cfg.detector.dark_rate_hz = 0.0;
    let clean = run_scenario(&cfg).unwrap();
    assert!((clean.qber - 0.0067).abs() < 1e-12, "{}", clean.qber);
}

#[test]
fn montecarlo_qber_agrees_with_analytic() {
    let analytic = run_scenario(&calibrated()).unwrap();
    for seed in [1, 2, 3] {
        let mut cfg = calibrated();
        cfg.backend = Backend::Montecarlo { frames: 10_000, seed };
        let mc = run_scenario(&cfg).unwrap();
        let k = (mc.sifted_bits.unwrap() as f64 * 0.1).floor();
        let sigma = (analytic.qber * (1.0 - analytic.qber) / k).sqrt();
        assert!((mc.qber - analytic.qber).abs() <= 5.0 * sigma, "seed {seed}: {} vs {}", mc.qber, analytic.qber);
        assert!((mc.visibility - analytic.visibility).abs() < 0.05);
    }
}

#[test]
fn spectral_layout_insensitive_with_flat_profile() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("flat.txt"), "# flat\n-100 1.0e6\n100 1.0e6\n").unwrap();
    let mut cfg = calibrated();
    cfg.link.fiber.spr_profile = Some(dir.path().join("flat.txt"));
    for p in [-1.0, 2.0, 5.0, 8.0, 11.0] {
        let six = at(&cfg, p, 6).skr;
        let all = at(&cfg, p, 17).skr;
        assert!((six / all - 1.0).abs() < 0.05, "{p} dBm: {six} vs {all}");
    }
}

#[test]
fn smf_noise_grows_with_detuning_spread() {
    let mut cfg = calibrated();
    cfg.link.fiber.kind = FiberKind::Smf;
    assert!(at(&cfg, 8.0, 6).noise.spr_flux > at(&cfg, 8.0, 17).noise.spr_flux);
}

#[test]
fn relative_profile_path_resolves_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spr.txt"), "0 2.0e6\n").unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&calibrated().to_json().unwrap()).unwrap();
    v["link"]["fiber"]["spr_profile"] = serde_json::json!("spr.txt");
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let cfg = ScenarioConfig::load(&path).unwrap();
    assert_eq!(cfg.smf_profile().unwrap().coefficient(7.0), 2.0e6);
}

#[test]
fn malformed_configs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let mut v: serde_json::Value = serde_json::from_str(&calibrated().to_json().unwrap()).unwrap();
    v["protocol"]["mu_typo"] = serde_json::json!(0.1);
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Json(_))));
    let mut v: serde_json::Value = serde_json::from_str(&calibrated().to_json().unwrap()).unwrap();
    v["sweep"]["channel_counts"] = serde_json::json!([]);
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Config(_))));
}

#[test]
fn csv_one_row_two_lines_and_stable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = calibrated();
    cfg.backend = Backend::Montecarlo { frames: 3000, seed: 5 };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    emit_csv(&[run_scenario(&cfg).unwrap()], &a).unwrap();
    emit_csv(&[run_scenario(&cfg).unwrap()], &b).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(emit_csv(&[], &a).is_err());
    assert!(emit_csv(&[run_scenario(&cfg).unwrap()], &dir.path().join("missing/dir/x.csv")).is_err());
}

#[test]
fn sweep_rows_follow_grid() {
    let rows = run_sweep(&calibrated()).unwrap();
    let keys: Vec<_> = rows.iter().map(|r| (r.channel_count, r.aggregated_classical_dbm)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    assert_eq!(keys, sorted);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.skr >= 0.0));
}

#[test]
fn transcripts_replay_to_the_same_key() {
    let spec = FrameSpec::default();
    let op = calibrated().operating_point(9.46, 5e4);
    let alice = alice_generate(500, spec, op.mu, op.decoy_fraction, 3).unwrap();
    let bob = bob_receive(&alice, &op, 4).unwrap();
    let direct = sift(&alice, &frame_sync(bob.clone(), &alice).unwrap()).unwrap();
    let alice2 = AliceRecord::from_transcript(&alice.to_transcript()).unwrap();
    let bob2 = BobReport::from_transcript(&bob.to_transcript()).unwrap();
    let replay = sift(&alice2, &frame_sync(bob2, &alice2).unwrap()).unwrap();
    assert_eq!(direct, replay);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_axis_monotone(p1 in -5.0f64..14.0, dp in 0.0f64..5.0, six in any::<bool>()) {
        let cfg = calibrated();
        let n = if six { 6 } else { 17 };
        let p2 = (p1 + dp).min(13.0);
        prop_assume!(p2 >= p1);
        let (a, b) = (at(&cfg, p1, n), at(&cfg, p2, n));
        prop_assert!(b.qber >= a.qber);
        prop_assert!(b.skr <= a.skr);
    }
}
