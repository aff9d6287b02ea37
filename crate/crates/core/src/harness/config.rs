use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classical::{ramp_offsets, ReceiverModel};
use crate::cow::{FrameSpec, OperatingPoint};
use crate::detection::SpadParams;
use crate::distill::SecretFractionStrategy;
use crate::error::{Error, Result};
use crate::link::{Amplifier, CoexistenceElement, FiberKind, FiberSpan, LinkChain, SprProfile};
use crate::units::{build_plan, photon_flux, Channel, ChannelPlan, ChannelRole, GridMeta, OpticalPower};

/// Full description of one scenario and its sweep axes. Every field is
/// required in JSON unless noted; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plan: PlanConfig,
    pub point: PointConfig,
    pub link: LinkConfig,
    pub protocol: ProtocolConfig,
    pub detector: SpadParams,
    pub distillation: DistillationConfig,
    pub receiver: ReceiverConfig,
    pub backend: Backend,
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
    /// Directory relative profile paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub grid_start_nm: f64,
    pub grid_end_nm: f64,
    pub grid_count: usize,
    /// Per-channel power entering the AWG mux, dBm.
    pub source_power_dbm: f64,
    pub line_rate_bps: f64,
    pub quantum_nm: f64,
    pub sync_nm: f64,
    pub sync_power_dbm: f64,
}

/// One operating point: aggregated classical power into the span and the
/// number of grid channels lit, counted from the channel nearest the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub aggregate_dbm: f64,
    pub channel_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub mux_loss_db: f64,
    pub amplifier: Amplifier,
    pub ce_t: CoexistenceElement,
    pub ce_r: CoexistenceElement,
    pub fiber: FiberConfig,
    pub a_rx_db: f64,
    pub acceptance_bw_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub kind: FiberKind,
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub hcf_suppression_db: f64,
    /// SMF SpRS table; `null` selects the bundled table.
    #[serde(default)]
    pub spr_profile: Option<PathBuf>,
    /// Multiplier on the SMF table (fitted by calibration when requested).
    #[serde(default = "one")]
    pub spr_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub mu: f64,
    pub slot_rate_hz: f64,
    pub frame_rate_hz: f64,
    pub decoy_fraction: f64,
    pub data_split: f64,
    pub intrinsic_qber: f64,
    pub intrinsic_visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillationConfig {
    pub sample_fraction: f64,
    pub f_ec: f64,
    pub strategy: SecretFractionStrategy,
    pub min_sifted_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub sensitivity_dbm: f64,
    pub sensitivity_ber: f64,
    pub spread_db: f64,
    /// Explicit per-channel offsets; `null` spreads a linear ramp over the grid.
    #[serde(default)]
    pub offsets_db: Option<Vec<f64>>,
    /// ROP the per-channel BER is reported at; `null` uses the link budget.
    #[serde(default)]
    pub rop_dbm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backend {
    Analytic,
    Montecarlo { frames: u64, seed: u64 },
}

impl Backend {
    pub fn tag(&self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::Montecarlo { .. } => "montecarlo",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Backend::Analytic => None,
            Backend::Montecarlo { seed, .. } => Some(*seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub powers_dbm: Vec<f64>,
    pub channel_counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub aggregate_dbm: f64,
    pub channel_count: usize,
    pub qber: f64,
}

/// Values fitted by `calibrate`, kept with the config they produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRecord {
    pub anchors: Vec<Anchor>,
    pub scatter_fraction: f64,
    pub spr_scale: f64,
    pub residuals: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            plan: PlanConfig {
                grid_start_nm: 1540.56,
                grid_end_nm: 1558.17,
                grid_count: 17,
                source_power_dbm: 0.0,
                line_rate_bps: 10e9,
                quantum_nm: 1538.0,
                sync_nm: 1611.0,
                sync_power_dbm: -20.0,
            },
            point: PointConfig { aggregate_dbm: 8.0, channel_count: 17 },
            link: LinkConfig {
                mux_loss_db: 5.0,
                amplifier: Amplifier {
                    target_output_dbm: 20.0,
                    small_signal_gain_db: 30.0,
                    ase_density_loaded_dbm: -30.0,
                    ase_density_noload_dbm: 0.0,
                    ase_enabled: true,
                },
                ce_t: CoexistenceElement {
                    quantum_drop_loss_db: 0.76,
                    classical_express_loss_db: 6.3,
                    notch_rejection_db: 95.0,
                    scatter_fraction: 1e-12,
                },
                ce_r: CoexistenceElement {
                    quantum_drop_loss_db: 1.0,
                    classical_express_loss_db: 1.0,
                    notch_rejection_db: 0.0,
                    scatter_fraction: 0.0,
                },
                fiber: FiberConfig {
                    kind: FiberKind::Hcf,
                    length_km: 7.7,
                    attenuation_db_per_km: 1.0,
                    hcf_suppression_db: 35.0,
                    spr_profile: None,
                    spr_scale: 1.0,
                },
                a_rx_db: 0.0,
                acceptance_bw_nm: 0.1,
            },
            protocol: ProtocolConfig {
                mu: 0.1,
                slot_rate_hz: 1e9,
                frame_rate_hz: 1e6,
                decoy_fraction: 0.1,
                data_split: 0.75,
                intrinsic_qber: 0.0067,
                intrinsic_visibility: 0.98,
            },
            detector: SpadParams::default(),
            distillation: DistillationConfig {
                sample_fraction: 0.1,
                f_ec: 1.2,
                strategy: SecretFractionStrategy::Heuristic,
                min_sifted_bits: 100,
            },
            receiver: ReceiverConfig {
                sensitivity_dbm: -23.6,
                sensitivity_ber: 1e-10,
                spread_db: 1.8,
                offsets_db: None,
                rop_dbm: Some(-23.6),
            },
            backend: Backend::Analytic,
            sweep: SweepConfig { powers_dbm: vec![-1.0, 2.0, 5.0, 8.0, 11.0], channel_counts: vec![6, 17] },
            calibration: None,
            base_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.powers_dbm.is_empty() || self.sweep.channel_counts.is_empty() {
            return Err(Error::Config("sweep axes must be non-empty".into()));
        }
        if self.sweep.powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("sweep powers must be finite".into()));
        }
        if self.plan.grid_count == 0 {
            return Err(Error::Config("grid_count must be >= 1".into()));
        }
        for &n in self.sweep.channel_counts.iter().chain([&self.point.channel_count]) {
            if n > self.plan.grid_count {
                return Err(Error::Config(format!("{n} channels requested on a {}-channel grid", self.plan.grid_count)));
            }
        }
        if !(self.distillation.sample_fraction > 0.0 && self.distillation.sample_fraction < 1.0) {
            return Err(Error::Config("sample_fraction must be in (0, 1)".into()));
        }
        if !(self.distillation.f_ec >= 1.0) {
            return Err(Error::Config("f_ec must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.protocol.decoy_fraction) {
            return Err(Error::Config("decoy_fraction must be in [0, 0.5]".into()));
        }
        if !(self.link.fiber.spr_scale >= 0.0) {
            return Err(Error::Config("spr_scale must be >= 0".into()));
        }
        if let Backend::Montecarlo { frames, .. } = self.backend {
            if frames == 0 {
                return Err(Error::Config("Monte-Carlo backend needs frames >= 1".into()));
            }
        }
        self.frame_spec().validate()?;
        self.detector.validate()?;
        self.link.ce_t.validate()?;
        self.link.ce_r.validate()?;
        self.link.amplifier.validate()?;
        self.smf_profile()?;
        self.operating_point(0.0, 0.0).validate()?;
        Ok(())
    }

    pub fn frame_spec(&self) -> FrameSpec {
        FrameSpec { slot_rate_hz: self.protocol.slot_rate_hz, frame_rate_hz: self.protocol.frame_rate_hz }
    }

    pub fn smf_profile(&self) -> Result<SprProfile> {
        let base = match &self.link.fiber.spr_profile {
            None => SprProfile::default_smf(),
            Some(p) => {
                let path = match (&self.base_dir, p.is_relative()) {
                    (Some(dir), true) => dir.join(p),
                    _ => p.clone(),
                };
                SprProfile::load(&path)
                    .map_err(|e| Error::Config(format!("SpRS profile {}: {e}", path.display())))?
            }
        };
        Ok(base.scaled(self.link.fiber.spr_scale))
    }

    pub fn span(&self) -> Result<FiberSpan> {
        let f = &self.link.fiber;
        FiberSpan::from_smf_profile(f.kind, f.length_km, f.attenuation_db_per_km, &self.smf_profile()?, f.hcf_suppression_db)
    }

    pub fn grid(&self) -> GridMeta {
        GridMeta { start_nm: self.plan.grid_start_nm, end_nm: self.plan.grid_end_nm, count: self.plan.grid_count }
    }

    /// The first `channel_count` grid channels plus the quantum and sync channels.
    pub fn channel_plan(&self, channel_count: usize) -> Result<ChannelPlan> {
        let grid = self.grid();
        let classical = if channel_count == 0 {
            ChannelPlan::unloaded(grid)
        } else {
            let end = grid.start_nm + grid.spacing_nm() * (channel_count - 1) as f64;
            let end = if channel_count == grid.count { grid.end_nm } else { end };
            build_plan(channel_count, grid.start_nm, end, self.plan.source_power_dbm)?
        };
        let photon_rate = self.protocol.mu * self.protocol.slot_rate_hz;
        let quantum_w = photon_rate / photon_flux(1.0, self.plan.quantum_nm)?;
        let quantum = Channel::new(self.plan.quantum_nm, OpticalPower::from_mw(quantum_w * 1e3)?, ChannelRole::Quantum)?;
        let sync = Channel::new(self.plan.sync_nm, OpticalPower::from_dbm(self.plan.sync_power_dbm), ChannelRole::Sync)?;
        classical.with_channel(quantum)?.with_channel(sync)
    }

    /// Link chain with A_tx set so `aggregate_dbm` enters the span. Without
    /// classical load the attenuator keeps the setting a full grid would need.
    pub fn link_chain(&self, plan: &ChannelPlan, aggregate_dbm: f64) -> Result<LinkChain> {
        let mut chain = LinkChain {
            mux_loss_db: self.link.mux_loss_db,
            amplifier: self.link.amplifier,
            a_tx_db: 0.0,
            ce_t: self.link.ce_t,
            span: self.span()?,
            ce_r: self.link.ce_r,
            a_rx_db: self.link.a_rx_db,
            acceptance_bw_nm: self.link.acceptance_bw_nm,
        };
        chain.a_tx_db = if plan.classical_count() > 0 {
            chain.a_tx_for_aggregate(plan, aggregate_dbm)?
        } else {
            let reference = self.channel_plan(self.plan.grid_count)?;
            chain.a_tx_for_aggregate(&reference, aggregate_dbm)?
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn operating_point(&self, link_loss_db: f64, noise_flux: f64) -> OperatingPoint {
        OperatingPoint {
            mu: self.protocol.mu,
            link_loss_db,
            noise_flux,
            spad: self.detector,
            data_split: self.protocol.data_split,
            intrinsic_qber: self.protocol.intrinsic_qber,
            intrinsic_visibility: self.protocol.intrinsic_visibility,
            decoy_fraction: self.protocol.decoy_fraction,
        }
    }

    pub fn receiver_model(&self) -> Result<ReceiverModel> {
        let offsets = match &self.receiver.offsets_db {
            Some(o) => o.clone(),
            None => ramp_offsets(self.plan.grid_count, self.receiver.spread_db),
        };
        ReceiverModel::from_sensitivity(self.receiver.sensitivity_dbm, self.receiver.sensitivity_ber, offsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let back = ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default().to_json().unwrap()).unwrap();
        v["link"]["fiber"]["colour"] = serde_json::json!("blue");
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default().to_json().unwrap()).unwrap();
        v["backend"] = serde_json::json!({"kind": "montecarlo", "frames": 10, "seed": 1, "extra": 0});
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        v["backend"] = serde_json::json!({"kind": "montecarlo", "frames": 10, "seed": 1});
        assert!(ScenarioConfig::from_json(&v.to_string()).is_ok());
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.sweep.powers_dbm.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_profile_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.link.fiber.spr_profile = Some("/nonexistent/spr.txt".into());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn six_channel_plan_is_the_near_end_of_the_grid() {
        let cfg = ScenarioConfig::default();
        let plan = cfg.channel_plan(6).unwrap();
        let wl: Vec<f64> = plan.classical().map(|c| c.center_wavelength_nm).collect();
        assert_eq!(wl.len(), 6);
        assert!((wl[5] - 1546.063125).abs() < 1e-9);
        assert!(plan.quantum().is_some());
        let chain = cfg.link_chain(&plan, -1.0).unwrap();
        assert!((chain.span_input_aggregate(&plan).dbm() + 1.0).abs() < 1e-9);
    }
}
