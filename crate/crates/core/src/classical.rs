//! BER of the intensity-modulated data channels versus received power,
//! using a single-parameter Gaussian Q model.

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{domain, Error, Result};
use crate::units::dbm_to_mw;

const BRACKET_DBM: (f64, f64) = (-60.0, 10.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverModel {
    /// Gaussian-equivalent noise power, mW.
    pub nep_mw: f64,
    /// Per-channel sensitivity offsets, dB (positive = worse).
    pub offsets_db: Vec<f64>,
}

/// Q factor giving `ber` under the Gaussian model.
pub fn q_for_ber(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(domain(format!("target BER {ber} outside (0, 0.5)")));
    }
    Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * ber))
}

/// Linear ramp from `-spread/2` to `+spread/2` over `count` channels.
pub fn ramp_offsets(count: usize, spread_db: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| -spread_db / 2.0 + spread_db * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl ReceiverModel {
    pub fn new(nep_mw: f64, offsets_db: Vec<f64>) -> Result<Self> {
        if !(nep_mw > 0.0) {
            return Err(domain("noise-equivalent power must be > 0"));
        }
        Ok(Self { nep_mw, offsets_db })
    }

    /// Receiver whose zero-offset channel reaches `ber` at exactly `sensitivity_dbm`.
    pub fn from_sensitivity(sensitivity_dbm: f64, ber: f64, offsets_db: Vec<f64>) -> Result<Self> {
        Self::new(dbm_to_mw(sensitivity_dbm) / q_for_ber(ber)?, offsets_db)
    }

    pub fn spread_db(&self) -> f64 {
        let max = self.offsets_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.offsets_db.iter().copied().fold(f64::INFINITY, f64::min);
        if self.offsets_db.is_empty() {
            0.0
        } else {
            max - min
        }
    }

    pub fn offset(&self, channel: usize) -> f64 {
        self.offsets_db.get(channel).copied().unwrap_or(0.0)
    }
}

pub fn ber(rop_dbm: f64, rx: &ReceiverModel, channel_offset_db: f64) -> Result<f64> {
    if rop_dbm.is_nan() || rop_dbm == f64::NEG_INFINITY {
        if rop_dbm == f64::NEG_INFINITY {
            return Ok(0.5);
        }
        return Err(domain("received power is NaN"));
    }
    let q = dbm_to_mw(rop_dbm - channel_offset_db) / rx.nep_mw;
    Ok(0.5 * erfc(q / std::f64::consts::SQRT_2))
}

/// Natural log of [`ber`], finite where the probability itself underflows.
pub fn ln_ber(rop_dbm: f64, rx: &ReceiverModel, channel_offset_db: f64) -> Result<f64> {
    if rop_dbm.is_nan() {
        return Err(domain("received power is NaN"));
    }
    let z = dbm_to_mw(rop_dbm - channel_offset_db) / rx.nep_mw / std::f64::consts::SQRT_2;
    let tail = erfc(z);
    if tail > 1e-280 {
        return Ok((0.5 * tail).ln());
    }
    Ok(ln_half_erfc_asymptotic(z))
}

/// `ln(erfc(z) / 2)` from the asymptotic series; accurate to ~1e-9 relative for z > 10.
fn ln_half_erfc_asymptotic(z: f64) -> f64 {
    let z2 = z * z;
    let series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
    0.5f64.ln() - z2 - (z * std::f64::consts::PI.sqrt()).ln() + series.ln()
}

/// Lowest received power meeting `target_ber`.
pub fn sensitivity(rx: &ReceiverModel, channel_offset_db: f64, target_ber: f64) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(domain(format!("target BER {target_ber} outside (0, 0.5)")));
    }
    // Bisect the offset-free curve on a fixed bracket; the offset is a pure shift.
    let (mut lo, mut hi) = BRACKET_DBM;
    let f = |x: f64| ber(x, rx, 0.0).map(|b| b - target_ber);
    if f(lo)? <= 0.0 || f(hi)? > 0.0 {
        return Err(Error::Unreachable(target_ber));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let result = hi + channel_offset_db;
    if !(BRACKET_DBM.0..=BRACKET_DBM.1).contains(&result) {
        return Err(Error::Unreachable(target_ber));
    }
    Ok(result)
}
