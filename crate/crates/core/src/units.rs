//! Units, conversions and the channel plan shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Zero maps to `-inf`.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Linear transmission of a loss given in dB.
pub fn db_to_linear_loss(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Photons per second carried by `watts` of optical power at `wavelength_nm`.
pub fn photon_flux(watts: f64, wavelength_nm: f64) -> Result<f64> {
    if !(watts >= 0.0) {
        return Err(domain(format!("optical power must be >= 0 W, got {watts}")));
    }
    Ok(watts * wavelength_nm * 1e-9 / (PLANCK * SPEED_OF_LIGHT))
}

/// Binary Shannon entropy in bits; `h2(0) = h2(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("probability outside [0, 1]: {x}")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Optical power, stored linearly in mW.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OpticalPower {
    mw: f64,
}

impl OpticalPower {
    pub const ZERO: OpticalPower = OpticalPower { mw: 0.0 };

    pub fn from_mw(mw: f64) -> Result<Self> {
        if !(mw >= 0.0) || mw.is_infinite() {
            return Err(domain(format!("power must be finite and >= 0 mW, got {mw}")));
        }
        Ok(Self { mw })
    }

    pub fn from_dbm(dbm: f64) -> Self {
        Self { mw: dbm_to_mw(dbm) }
    }

    pub fn mw(self) -> f64 {
        self.mw
    }

    pub fn watts(self) -> f64 {
        self.mw * 1e-3
    }

    pub fn dbm(self) -> f64 {
        mw_to_dbm(self.mw)
    }

    /// Power after `db` of loss (negative values are gain).
    pub fn attenuate(self, db: f64) -> Self {
        Self { mw: self.mw * db_to_linear_loss(db) }
    }
}

impl std::ops::Add for OpticalPower {
    type Output = OpticalPower;
    fn add(self, rhs: Self) -> Self {
        Self { mw: self.mw + rhs.mw }
    }
}

impl std::iter::Sum for OpticalPower {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(OpticalPower::ZERO, |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    ClassicalData,
    Quantum,
    Sync,
    DistillationDown,
    DistillationUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub center_wavelength_nm: f64,
    pub launch_power: OpticalPower,
    pub role: ChannelRole,
}

impl Channel {
    pub fn new(center_wavelength_nm: f64, launch_power: OpticalPower, role: ChannelRole) -> Result<Self> {
        if !(center_wavelength_nm > 1200.0 && center_wavelength_nm < 1700.0) {
            return Err(Error::InvalidPlan(format!(
                "wavelength {center_wavelength_nm} nm outside (1200, 1700) nm"
            )));
        }
        Ok(Self { center_wavelength_nm, launch_power, role })
    }
}

/// Grid the classical channels were laid out on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub start_nm: f64,
    pub end_nm: f64,
    pub count: usize,
}

impl GridMeta {
    pub fn spacing_nm(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.end_nm - self.start_nm) / (self.count - 1) as f64
        }
    }
}

/// Ordered set of optical carriers sharing the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    channels: Vec<Channel>,
    grid: GridMeta,
}

/// Evenly spaced classical channels, inclusive of both endpoints.
pub fn build_plan(count: usize, start_nm: f64, end_nm: f64, per_channel_dbm: f64) -> Result<ChannelPlan> {
    if count == 0 {
        return Err(Error::EmptyPlan);
    }
    if count > 1 && !(start_nm < end_nm) {
        return Err(Error::InvalidPlan(format!("start {start_nm} nm must be below end {end_nm} nm")));
    }
    if count == 1 && start_nm > end_nm {
        return Err(Error::InvalidPlan(format!("start {start_nm} nm above end {end_nm} nm")));
    }
    let grid = GridMeta { start_nm, end_nm, count };
    let spacing = grid.spacing_nm();
    let power = OpticalPower::from_dbm(per_channel_dbm);
    let channels = (0..count)
        .map(|i| {
            let wl = if i + 1 == count { end_nm } else { start_nm + spacing * i as f64 };
            Channel::new(wl, power, ChannelRole::ClassicalData)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelPlan { channels, grid })
}

impl ChannelPlan {
    /// A plan without classical channels (no-load operation).
    pub fn unloaded(grid: GridMeta) -> Self {
        Self { channels: Vec::new(), grid }
    }

    /// Adds a channel, keeping wavelengths distinct, classical channels
    /// ascending and at most one quantum channel.
    pub fn with_channel(mut self, channel: Channel) -> Result<Self> {
        if self
            .channels
            .iter()
            .any(|c| c.center_wavelength_nm == channel.center_wavelength_nm)
        {
            return Err(Error::InvalidPlan(format!(
                "duplicate wavelength {} nm",
                channel.center_wavelength_nm
            )));
        }
        if channel.role == ChannelRole::Quantum && self.quantum().is_some() {
            return Err(Error::InvalidPlan("plan already has a quantum channel".into()));
        }
        if channel.role == ChannelRole::ClassicalData {
            if let Some(last) = self.classical().last() {
                if last.center_wavelength_nm > channel.center_wavelength_nm {
                    return Err(Error::InvalidPlan("classical channels must be ascending".into()));
                }
            }
        }
        self.channels.push(channel);
        Ok(self)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn grid(&self) -> GridMeta {
        self.grid
    }

    pub fn classical(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(|c| c.role == ChannelRole::ClassicalData)
    }

    pub fn classical_count(&self) -> usize {
        self.classical().count()
    }

    pub fn quantum(&self) -> Option<&Channel> {
        self.channels.iter().find(|c| c.role == ChannelRole::Quantum)
    }

    /// Sum of classical launch powers.
    pub fn aggregate_classical(&self) -> OpticalPower {
        self.classical().map(|c| c.launch_power).sum()
    }
}
