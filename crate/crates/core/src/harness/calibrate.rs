use serde::{Deserialize, Serialize};

use super::config::{Anchor, Backend, CalibrationRecord, PointConfig, ScenarioConfig};
use super::scenario::evaluate_point;
use crate::cow::expected_rates;
use crate::error::{Error, Result};

/// Residual below which an anchor counts as met.
const TOLERANCE: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;

/// Anchors to fit. The first anchor sets the CE-T scatter fraction; with
/// `fit_spr_scale` the second sets the SpRS table multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub anchors: Vec<Anchor>,
    #[serde(default)]
    pub fit_spr_scale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub config: ScenarioConfig,
    pub record: CalibrationRecord,
}

fn with_params(base: &ScenarioConfig, scatter: f64, scale: f64) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.link.ce_t.scatter_fraction = scatter;
    cfg.link.fiber.spr_scale = scale;
    cfg.backend = Backend::Analytic;
    cfg
}

fn point(anchor: &Anchor) -> PointConfig {
    PointConfig { aggregate_dbm: anchor.aggregate_dbm, channel_count: anchor.channel_count }
}

fn residual(base: &ScenarioConfig, anchor: &Anchor, scatter: f64, scale: f64) -> Result<f64> {
    Ok(evaluate_point(&with_params(base, scatter, scale), point(anchor), 0)?.qber - anchor.qber)
}

/// Noise at an anchor as `fixed + scatter * per_scatter + scale * per_scale`.
struct NoiseTerms {
    fixed: f64,
    per_scatter: f64,
    per_scale: f64,
    loss_db: f64,
}

fn noise_terms(base: &ScenarioConfig, anchor: &Anchor) -> Result<NoiseTerms> {
    let noise = |scatter: f64, scale: f64| -> Result<(f64, f64)> {
        let cfg = with_params(base, scatter, scale);
        let plan = cfg.channel_plan(anchor.channel_count)?;
        let path = cfg.link_chain(&plan, anchor.aggregate_dbm)?.evaluate_quantum_path(&plan)?;
        Ok((path.noise.total_flux, path.loss_db))
    };
    let (fixed, loss_db) = noise(0.0, 0.0)?;
    let unit = 1e-12;
    Ok(NoiseTerms {
        fixed,
        per_scatter: (noise(unit, 0.0)?.0 - fixed) / unit,
        per_scale: noise(0.0, 1.0)?.0 - fixed,
        loss_db,
    })
}

/// Noise flux that puts the analytic QBER on the anchor.
fn required_noise(base: &ScenarioConfig, anchor: &Anchor, loss_db: f64) -> Result<f64> {
    let spec = base.frame_spec();
    let qber = |n: f64| -> Result<f64> { Ok(expected_rates(&base.operating_point(loss_db, n), &spec)?.qber - anchor.qber) };
    if qber(0.0)? > 0.0 {
        return Err(Error::AnchorUnreachable(format!("QBER {} is below the noise-free value", anchor.qber)));
    }
    let mut hi = 1.0;
    while qber(hi)? < 0.0 {
        hi *= 4.0;
        if hi > 1e18 {
            return Err(Error::AnchorUnreachable(format!("QBER {} not reached at any noise level", anchor.qber)));
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if qber(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fits the free noise parameters to the anchor QBERs using the analytic
/// backend. Noise is linear in both parameters, so each anchor fixes a noise
/// level by bisection and the parameters follow from a linear solve.
/// Parameters already meeting their anchors are left untouched.
pub fn calibrate(config: &ScenarioConfig, target: &CalibrationTarget) -> Result<Calibrated> {
    config.validate()?;
    let first = *target.anchors.first().ok_or_else(|| Error::Config("no calibration anchors".into()))?;
    let second = if target.fit_spr_scale {
        Some(*target.anchors.get(1).ok_or_else(|| Error::Config("fitting the SpRS scale needs a second anchor".into()))?)
    } else {
        None
    };
    for a in &target.anchors {
        if !(a.qber > config.protocol.intrinsic_qber && a.qber < 0.5) {
            return Err(Error::AnchorUnreachable(format!(
                "anchor QBER {} outside ({}, 0.5)",
                a.qber, config.protocol.intrinsic_qber
            )));
        }
    }

    let mut scatter = config.link.ce_t.scatter_fraction;
    let mut scale = config.link.fiber.spr_scale;
    let met = |a: &Anchor, sc: f64, sp: f64| -> Result<bool> { Ok(residual(config, a, sc, sp)?.abs() <= TOLERANCE) };
    let satisfied = met(&first, scatter, scale)? && match second {
        Some(b) => met(&b, scatter, scale)?,
        None => true,
    };

    if !satisfied {
        let t1 = noise_terms(config, &first)?;
        let n1 = required_noise(config, &first, t1.loss_db)?;
        match second {
            None => {
                if !(t1.per_scatter > 0.0) {
                    return Err(Error::AnchorUnreachable("scatter fraction has no effect at the anchor".into()));
                }
                scatter = (n1 - t1.fixed - scale * t1.per_scale) / t1.per_scatter;
            }
            Some(b) => {
                let t2 = noise_terms(config, &b)?;
                let n2 = required_noise(config, &b, t2.loss_db)?;
                let det = t1.per_scatter * t2.per_scale - t1.per_scale * t2.per_scatter;
                if det.abs() <= 1e-12 * (t1.per_scatter * t2.per_scale).abs() {
                    return Err(Error::AnchorUnreachable("anchors do not separate scatter from SpRS".into()));
                }
                let r1 = n1 - t1.fixed;
                let r2 = n2 - t2.fixed;
                scatter = (r1 * t2.per_scale - t1.per_scale * r2) / det;
                scale = (t1.per_scatter * r2 - r1 * t2.per_scatter) / det;
            }
        }
        if !(0.0..=1.0).contains(&scatter) || !(scale >= 0.0) {
            return Err(Error::AnchorUnreachable(format!(
                "fit needs scatter_fraction {scatter:e} and spr_scale {scale:e}"
            )));
        }
    }

    let residuals = target
        .anchors
        .iter()
        .map(|a| residual(config, a, scatter, scale))
        .collect::<Result<Vec<_>>>()?;
    let record = CalibrationRecord { anchors: target.anchors.clone(), scatter_fraction: scatter, spr_scale: scale, residuals };
    let mut out = config.clone();
    out.link.ce_t.scatter_fraction = scatter;
    out.link.fiber.spr_scale = scale;
    out.calibration = Some(record.clone());
    Ok(Calibrated { config: out, record })
}
