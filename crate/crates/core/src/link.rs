//! Optical path evaluation: channel losses, booster ASE, spontaneous Raman
//! scattering in the span and filter scattering at the co-existence elements.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::units::{db_to_linear_loss, mw_to_dbm, photon_flux, Channel, ChannelPlan, ChannelRole, OpticalPower};

/// Span length the SpRS tables are referenced to, km.
pub const REFERENCE_SPAN_KM: f64 = 7.7;
/// Bandwidth the SpRS and ASE densities are quoted in, nm.
pub const REFERENCE_BW_NM: f64 = 0.1;

const DEFAULT_SMF_TABLE: &str = include_str!("../data/spr_smf.txt");

/// Raman coefficient versus detuning, piecewise linear with flat extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprProfile {
    points: Vec<(f64, f64)>,
}

impl SprProfile {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("SpRS profile has no rows".into()));
        }
        if points.iter().any(|&(d, c)| !d.is_finite() || !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::Config("SpRS coefficients must be finite and >= 0".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("SpRS profile has duplicate detunings".into()));
        }
        Ok(Self { points })
    }

    /// Parses the two-column `detuning_nm, coefficient` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Parse { line: idx + 1, msg: format!("expected 2 columns, got {}", fields.len()) });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse { line: idx + 1, msg: format!("{s:?}: {e}") })
            };
            points.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(points)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The table shipped with the crate for standard single-mode fiber.
    pub fn default_smf() -> Self {
        Self::parse(DEFAULT_SMF_TABLE).expect("bundled SpRS table is valid")
    }

    pub fn flat(coefficient: f64) -> Result<Self> {
        Self::new(vec![(0.0, coefficient)])
    }

    /// Every coefficient lowered by `suppression_db`.
    pub fn suppressed(&self, suppression_db: f64) -> Self {
        self.scaled(db_to_linear_loss(suppression_db))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { points: self.points.iter().map(|&(d, c)| (d, c * factor)).collect() }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn coefficient(&self, detuning_nm: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if detuning_nm <= first.0 {
            return first.1;
        }
        if detuning_nm >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= detuning_nm);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (detuning_nm - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    Smf,
    Hcf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    length_km: f64,
    attenuation_db_per_km: f64,
    kind: FiberKind,
    profile: SprProfile,
}

impl FiberSpan {
    pub fn new(kind: FiberKind, length_km: f64, attenuation_db_per_km: f64, profile: SprProfile) -> Result<Self> {
        if !(length_km > 0.0) {
            return Err(domain(format!("span length must be > 0 km, got {length_km}")));
        }
        if !(attenuation_db_per_km >= 0.0) {
            return Err(domain(format!("attenuation must be >= 0 dB/km, got {attenuation_db_per_km}")));
        }
        Ok(Self { length_km, attenuation_db_per_km, kind, profile })
    }

    /// Builds a span whose Raman profile derives from an SMF table: unchanged
    /// for SMF, lowered by `hcf_suppression_db` for HCF.
    pub fn from_smf_profile(
        kind: FiberKind,
        length_km: f64,
        attenuation_db_per_km: f64,
        smf: &SprProfile,
        hcf_suppression_db: f64,
    ) -> Result<Self> {
        let profile = match kind {
            FiberKind::Smf => smf.clone(),
            FiberKind::Hcf => smf.suppressed(hcf_suppression_db),
        };
        Self::new(kind, length_km, attenuation_db_per_km, profile)
    }

    pub fn kind(&self) -> FiberKind {
        self.kind
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn attenuation_db_per_km(&self) -> f64 {
        self.attenuation_db_per_km
    }

    pub fn profile(&self) -> &SprProfile {
        &self.profile
    }

    pub fn loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    /// Effective interaction length, km.
    pub fn effective_length_km(&self) -> f64 {
        effective_length(self.attenuation_db_per_km, self.length_km)
    }
}

fn effective_length(alpha_db_per_km: f64, length_km: f64) -> f64 {
    if alpha_db_per_km > 0.0 {
        let alpha = alpha_db_per_km * std::f64::consts::LN_10 / 10.0;
        (1.0 - 10f64.powf(-alpha_db_per_km * length_km / 10.0)) / alpha
    } else {
        length_km
    }
}

/// Filter element that adds/drops the quantum channel next to the classical compound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistenceElement {
    pub quantum_drop_loss_db: f64,
    pub classical_express_loss_db: f64,
    pub notch_rejection_db: f64,
    /// Fraction of the classical input power scattered into the quantum
    /// channel's 0.1 nm acceptance band.
    pub scatter_fraction: f64,
}

impl CoexistenceElement {
    pub fn validate(&self) -> Result<()> {
        if self.quantum_drop_loss_db < 0.0 || self.classical_express_loss_db < 0.0 || self.notch_rejection_db < 0.0 {
            return Err(Error::Config("co-existence element losses must be >= 0 dB".into()));
        }
        if !(0.0..1.0).contains(&self.scatter_fraction) {
            return Err(Error::Config(format!("scatter_fraction {} outside [0, 1)", self.scatter_fraction)));
        }
        Ok(())
    }
}

/// Booster EDFA with constant output power and two ASE levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplifier {
    pub target_output_dbm: f64,
    pub small_signal_gain_db: f64,
    /// ASE spectral density at the output, dBm per 0.1 nm, with signal load.
    pub ase_density_loaded_dbm: f64,
    /// Same without signal load.
    pub ase_density_noload_dbm: f64,
    #[serde(default = "yes")]
    pub ase_enabled: bool,
}

fn yes() -> bool {
    true
}

impl Amplifier {
    pub fn validate(&self) -> Result<()> {
        if self.ase_density_noload_dbm < self.ase_density_loaded_dbm {
            return Err(Error::Config("no-load ASE density must be >= loaded density".into()));
        }
        if self.small_signal_gain_db < 0.0 {
            return Err(Error::Config("amplifier gain must be >= 0 dB".into()));
        }
        Ok(())
    }

    /// Gain applied to an input of `input_total`, clamped so the output never
    /// exceeds the target power.
    pub fn gain_db(&self, input_total: OpticalPower) -> f64 {
        if input_total.mw() <= 0.0 {
            return self.small_signal_gain_db;
        }
        let headroom = self.target_output_dbm - input_total.dbm();
        self.small_signal_gain_db.min(headroom)
    }

    pub fn ase_density_dbm(&self, loaded: bool) -> f64 {
        if loaded {
            self.ase_density_loaded_dbm
        } else {
            self.ase_density_noload_dbm
        }
    }
}

/// Photon flux of the spontaneous Raman noise reaching the span output.
pub fn spr_flux(pump_mw: f64, detuning_nm: f64, span: &FiberSpan, acceptance_bw_nm: f64) -> Result<f64> {
    if !(acceptance_bw_nm > 0.0) {
        return Err(domain("acceptance bandwidth must be > 0 nm"));
    }
    if !(pump_mw >= 0.0) {
        return Err(domain("pump power must be >= 0 mW"));
    }
    let scaling = span.effective_length_km() / effective_length(span.attenuation_db_per_km, REFERENCE_SPAN_KM);
    Ok(span.profile.coefficient(detuning_nm) * pump_mw * (acceptance_bw_nm / REFERENCE_BW_NM) * scaling)
}

/// In-band ASE photon flux after the notch and any downstream loss.
pub fn ase_flux(
    amp: &Amplifier,
    loaded: bool,
    downstream_rejection_db: f64,
    downstream_loss_db: f64,
    acceptance_bw_nm: f64,
    wavelength_nm: f64,
) -> Result<f64> {
    if downstream_rejection_db < 0.0 || downstream_loss_db < 0.0 {
        return Err(domain("rejection and loss must be >= 0 dB"));
    }
    let mw = crate::units::dbm_to_mw(amp.ase_density_dbm(loaded))
        * (acceptance_bw_nm / REFERENCE_BW_NM)
        * db_to_linear_loss(downstream_rejection_db + downstream_loss_db);
    photon_flux(mw * 1e-3, wavelength_nm)
}

/// Classical power scattered into the quantum band by a filter element.
pub fn scatter_flux(
    aggregate_classical_mw: f64,
    element: &CoexistenceElement,
    downstream_loss_db: f64,
    wavelength_nm: f64,
) -> Result<f64> {
    if !(aggregate_classical_mw >= 0.0) {
        return Err(domain("aggregate classical power must be >= 0 mW"));
    }
    let watts = aggregate_classical_mw * element.scatter_fraction * db_to_linear_loss(downstream_loss_db) * 1e-3;
    photon_flux(watts, wavelength_nm)
}

/// Noise photon flux inside the quantum acceptance band at the receiver input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub spr_flux: f64,
    pub ase_flux: f64,
    pub scatter_flux: f64,
    pub total_flux: f64,
}

impl NoiseBudget {
    pub fn new(spr_flux: f64, ase_flux: f64, scatter_flux: f64) -> Self {
        Self { spr_flux, ase_flux, scatter_flux, total_flux: spr_flux + ase_flux + scatter_flux }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumPath {
    pub loss_db: f64,
    pub noise: NoiseBudget,
}

/// Element kinds in transmission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Mux,
    Booster,
    LaunchAttenuator,
    CoexistenceTx,
    Span,
    CoexistenceRx,
    ReceiveAttenuator,
}

/// The transmission chain: AWG mux, booster, A_tx, CE-T, span, CE-R, A_rx.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChain {
    pub mux_loss_db: f64,
    pub amplifier: Amplifier,
    pub a_tx_db: f64,
    pub ce_t: CoexistenceElement,
    pub span: FiberSpan,
    pub ce_r: CoexistenceElement,
    pub a_rx_db: f64,
    pub acceptance_bw_nm: f64,
}

impl LinkChain {
    pub const ORDER: [Element; 7] = [
        Element::Mux,
        Element::Booster,
        Element::LaunchAttenuator,
        Element::CoexistenceTx,
        Element::Span,
        Element::CoexistenceRx,
        Element::ReceiveAttenuator,
    ];

    pub fn validate(&self) -> Result<()> {
        self.ce_t.validate()?;
        self.ce_r.validate()?;
        self.amplifier.validate()?;
        if self.mux_loss_db < 0.0 || self.a_tx_db < 0.0 || self.a_rx_db < 0.0 {
            return Err(Error::Config("attenuations must be >= 0 dB".into()));
        }
        if !(self.acceptance_bw_nm > 0.0) {
            return Err(Error::Config("acceptance bandwidth must be > 0 nm".into()));
        }
        Ok(())
    }

    /// Gain the booster applies for the given plan.
    pub fn booster_gain_db(&self, plan: &ChannelPlan) -> f64 {
        let input = plan.aggregate_classical().attenuate(self.mux_loss_db);
        self.amplifier.gain_db(input)
    }

    /// Total booster output power for the plan.
    pub fn booster_output(&self, plan: &ChannelPlan) -> OpticalPower {
        plan.aggregate_classical()
            .attenuate(self.mux_loss_db - self.booster_gain_db(plan))
    }

    /// Power a classical channel carries into the span.
    pub fn span_input_power(&self, plan: &ChannelPlan, channel: &Channel) -> OpticalPower {
        let gain = self.booster_gain_db(plan);
        channel
            .launch_power
            .attenuate(self.mux_loss_db - gain + self.a_tx_db + self.ce_t.classical_express_loss_db)
    }

    /// Aggregated classical power launched into the span.
    pub fn span_input_aggregate(&self, plan: &ChannelPlan) -> OpticalPower {
        plan.classical().map(|c| self.span_input_power(plan, c)).sum()
    }

    /// Launch attenuation that puts `target_dbm` of aggregated classical power into the span.
    pub fn a_tx_for_aggregate(&self, plan: &ChannelPlan, target_dbm: f64) -> Result<f64> {
        let out = self.booster_output(plan).dbm();
        let a_tx = out - self.ce_t.classical_express_loss_db - target_dbm;
        if a_tx < 0.0 {
            return Err(Error::Config(format!(
                "aggregate {target_dbm} dBm exceeds the {:.2} dBm available after CE-T",
                out - self.ce_t.classical_express_loss_db
            )));
        }
        Ok(a_tx)
    }

    pub fn quantum_loss_db(&self) -> f64 {
        self.ce_t.quantum_drop_loss_db + self.span.loss_db() + self.ce_r.quantum_drop_loss_db + self.a_rx_db
    }

    /// Per-channel Raman contribution at the quantum receiver input.
    pub fn spr_contributions(&self, plan: &ChannelPlan, quantum_nm: f64) -> Result<Vec<f64>> {
        let after_span = db_to_linear_loss(self.ce_r.quantum_drop_loss_db + self.a_rx_db);
        plan.classical()
            .map(|c| {
                let pump = self.span_input_power(plan, c).mw();
                let detuning = c.center_wavelength_nm - quantum_nm;
                Ok(spr_flux(pump, detuning, &self.span, self.acceptance_bw_nm)? * after_span)
            })
            .collect()
    }

    pub fn evaluate_quantum_path(&self, plan: &ChannelPlan) -> Result<QuantumPath> {
        let quantum = plan
            .quantum()
            .ok_or_else(|| Error::Config("channel plan has no quantum channel".into()))?;
        let wl = quantum.center_wavelength_nm;
        let after_span_db = self.ce_r.quantum_drop_loss_db + self.a_rx_db;

        let spr: f64 = self.spr_contributions(plan, wl)?.iter().fold(0.0, |a, b| a + b);

        let ase = if self.amplifier.ase_enabled {
            let loaded = plan.classical_count() > 0;
            ase_flux(
                &self.amplifier,
                loaded,
                self.ce_t.notch_rejection_db,
                self.a_tx_db + self.span.loss_db() + after_span_db,
                self.acceptance_bw_nm,
                wl,
            )?
        } else {
            0.0
        };

        // Scattering happens at the CE-T input, after the launch attenuator.
        let ce_t_input = self.booster_output(plan).attenuate(self.a_tx_db);
        let ce_t_input_mw = if plan.classical_count() > 0 { ce_t_input.mw() } else { 0.0 };
        let scatter = scatter_flux(ce_t_input_mw, &self.ce_t, self.span.loss_db() + after_span_db, wl)?
            * (self.acceptance_bw_nm / REFERENCE_BW_NM);

        Ok(QuantumPath { loss_db: self.quantum_loss_db(), noise: NoiseBudget::new(spr, ase, scatter) })
    }

    /// Received power of a classical data channel at the APD receiver, dBm.
    pub fn evaluate_classical_path(&self, plan: &ChannelPlan, channel: &Channel) -> Result<f64> {
        if channel.role != ChannelRole::ClassicalData {
            return Err(Error::Config(format!("{:?} channel has no classical receive path", channel.role)));
        }
        let p = self
            .span_input_power(plan, channel)
            .attenuate(self.span.loss_db() + self.ce_r.classical_express_loss_db + self.a_rx_db);
        Ok(mw_to_dbm(p.mw()))
    }
}
