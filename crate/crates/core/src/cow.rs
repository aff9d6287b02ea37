//! Coherent one-way protocol endpoints and the closed-form rate backend.
//!
//! A symbol spans two slots: `Bit0 = (pulse, empty)`, `Bit1 = (empty, pulse)`,
//! `Decoy = (pulse, pulse)`. Bob's data line reads the bit from the arrival
//! slot; the monitor line watches the destructive port of a one-slot delay
//! interferometer. Output bin `k` of that interferometer mixes slots `k - 1`
//! and `k`, so a bin is *interfering* when both slots carry a pulse, *single*
//! when one does, and *empty* otherwise.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{
    background_click_rate, click_probability, sample_tagged, ClickOrigin, DetectorId, SlotClock, SpadParams,
};
use crate::error::{domain, Error, Result};
use crate::units::db_to_linear_loss;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub slot_rate_hz: f64,
    pub frame_rate_hz: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { slot_rate_hz: 1e9, frame_rate_hz: 1e6 }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot_rate_hz > 0.0 && self.frame_rate_hz > 0.0) {
            return Err(domain("slot and frame rates must be > 0"));
        }
        let ratio = self.slot_rate_hz / self.frame_rate_hz;
        if ratio.fract() != 0.0 || ratio < 2.0 || ratio > u32::MAX as f64 {
            return Err(domain("slot rate must be an integer multiple of the frame rate"));
        }
        if !(ratio as u64).is_multiple_of(2) {
            return Err(domain("slots per frame must be even"));
        }
        Ok(())
    }

    pub fn slots_per_frame(&self) -> u32 {
        (self.slot_rate_hz / self.frame_rate_hz).round() as u32
    }

    pub fn symbols_per_frame(&self) -> u32 {
        self.slots_per_frame() / 2
    }

    pub fn slot_duration_s(&self) -> f64 {
        1.0 / self.slot_rate_hz
    }

    pub fn clock(&self) -> SlotClock {
        SlotClock { slots_per_frame: self.slots_per_frame(), slot_duration_s: self.slot_duration_s() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CowSymbol {
    Bit0,
    Bit1,
    Decoy,
}

impl CowSymbol {
    /// Pulse occupancy of the (early, late) slot.
    pub fn pulses(self) -> [bool; 2] {
        match self {
            CowSymbol::Bit0 => [true, false],
            CowSymbol::Bit1 => [false, true],
            CowSymbol::Decoy => [true, true],
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            CowSymbol::Bit0 => Some(0),
            CowSymbol::Bit1 => Some(1),
            CowSymbol::Decoy => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            CowSymbol::Bit0 => '0',
            CowSymbol::Bit1 => '1',
            CowSymbol::Decoy => 'd',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(CowSymbol::Bit0),
            '1' => Some(CowSymbol::Bit1),
            'd' => Some(CowSymbol::Decoy),
            _ => None,
        }
    }
}

/// Alice's transmitted pattern, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceRecord {
    pub frame_spec: FrameSpec,
    pub mu: f64,
    pub decoy_fraction: f64,
    pub seed: u64,
    pub first_frame: u64,
    symbols: Vec<CowSymbol>,
}

impl AliceRecord {
    pub fn symbols(&self) -> &[CowSymbol] {
        &self.symbols
    }

    pub fn frame_count(&self) -> u64 {
        self.symbols.len() as u64 / self.frame_spec.symbols_per_frame() as u64
    }

    pub fn frame(&self, frame: u64) -> &[CowSymbol] {
        let n = self.frame_spec.symbols_per_frame() as usize;
        let start = frame as usize * n;
        &self.symbols[start..start + n]
    }

    pub fn symbol(&self, frame: u64, index: u32) -> Option<CowSymbol> {
        let n = self.frame_spec.symbols_per_frame();
        if index >= n || frame >= self.frame_count() {
            return None;
        }
        self.symbols.get((frame * n as u64 + index as u64) as usize).copied()
    }

    /// Whether global slot `g` carries a pulse.
    pub fn has_pulse(&self, g: u64) -> bool {
        self.symbols[(g / 2) as usize].pulses()[(g % 2) as usize]
    }

    pub fn pulse_train(&self) -> PulseTrain<'_> {
        PulseTrain { record: self }
    }
}

/// Per-slot mean photon numbers of Alice's output, derived on demand.
#[derive(Debug, Clone, Copy)]
pub struct PulseTrain<'a> {
    record: &'a AliceRecord,
}

impl PulseTrain<'_> {
    pub fn len(&self) -> usize {
        self.record.symbols.len() * 2
    }

    pub fn is_empty(&self) -> bool {
        self.record.symbols.is_empty()
    }

    pub fn mean_photons(&self, g: u64) -> f64 {
        if self.record.has_pulse(g) {
            self.record.mu
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len() as u64).map(|g| self.mean_photons(g))
    }
}

pub fn alice_generate(frame_count: u64, frame_spec: FrameSpec, mu: f64, decoy_fraction: f64, seed: u64) -> Result<AliceRecord> {
    frame_spec.validate()?;
    if frame_count == 0 {
        return Err(domain("frame_count must be >= 1"));
    }
    if !(0.0..=1.0).contains(&decoy_fraction) {
        return Err(domain(format!("decoy fraction {decoy_fraction} outside [0, 1]")));
    }
    if !(mu >= 0.0) {
        return Err(domain("mean photon number must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = frame_count as usize * frame_spec.symbols_per_frame() as usize;
    let symbols = (0..n)
        .map(|_| {
            if rng.random_bool(decoy_fraction) {
                CowSymbol::Decoy
            } else if rng.random::<bool>() {
                CowSymbol::Bit1
            } else {
                CowSymbol::Bit0
            }
        })
        .collect();
    Ok(AliceRecord { frame_spec, mu, decoy_fraction, seed, first_frame: 0, symbols })
}

/// Everything the analytic and Monte-Carlo backends need about one link setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub mu: f64,
    pub link_loss_db: f64,
    pub noise_flux: f64,
    pub spad: SpadParams,
    /// Share of the received light sent to the data line; the rest feeds the monitor.
    pub data_split: f64,
    pub intrinsic_qber: f64,
    pub intrinsic_visibility: f64,
    pub decoy_fraction: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            mu: 0.1,
            link_loss_db: 9.46,
            noise_flux: 0.0,
            spad: SpadParams::default(),
            data_split: 0.75,
            intrinsic_qber: 0.0067,
            intrinsic_visibility: 0.98,
            decoy_fraction: 0.1,
        }
    }
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        self.spad.validate()?;
        if !(self.mu >= 0.0) || !(self.noise_flux >= 0.0) || !(self.link_loss_db >= 0.0) {
            return Err(domain("mu, noise flux and loss must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.data_split) {
            return Err(domain("data split must be in [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.intrinsic_qber) {
            return Err(domain("intrinsic QBER must be in [0, 0.5]"));
        }
        if !(self.intrinsic_visibility > 0.0 && self.intrinsic_visibility <= 1.0) {
            return Err(domain("intrinsic visibility must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.decoy_fraction) {
            return Err(domain("decoy fraction must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn transmittance(&self) -> f64 {
        db_to_linear_loss(self.link_loss_db)
    }

    fn monitor_mean(&self) -> f64 {
        self.mu * self.transmittance() * (1.0 - self.data_split)
    }

    /// Data-line click probability of a pulse slot.
    pub fn data_click_probability(&self) -> Result<f64> {
        click_probability(self.mu * self.transmittance() * self.data_split, &self.spad)
    }

    /// Monitor click probability in an interfering bin without coherence.
    pub fn monitor_reference_probability(&self) -> Result<f64> {
        click_probability(self.monitor_mean() / 2.0, &self.spad)
    }

    /// Monitor click probability in a bin fed by a single pulse.
    pub fn monitor_single_probability(&self) -> Result<f64> {
        click_probability(self.monitor_mean() / 4.0, &self.spad)
    }

    /// Destructive-port click probability in an interfering bin.
    pub fn monitor_destructive_probability(&self) -> Result<f64> {
        click_probability(self.monitor_mean() * (1.0 - self.intrinsic_visibility) / 2.0, &self.spad)
    }

    pub fn data_background_rate(&self) -> Result<f64> {
        background_click_rate(self.noise_flux * self.data_split, &self.spad)
    }

    pub fn monitor_background_rate(&self) -> Result<f64> {
        background_click_rate(self.noise_flux * (1.0 - self.data_split), &self.spad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedRates {
    pub r_sift: f64,
    pub qber: f64,
    pub visibility: f64,
    pub r_signal: f64,
    pub r_background_data: f64,
    /// Monitor click rate of interfering bins without coherence, per second of bin time.
    pub r_interfering: f64,
    pub r_background_monitor: f64,
}

/// Closed-form sifted rate, QBER and visibility.
pub fn expected_rates(op: &OperatingPoint, frame_spec: &FrameSpec) -> Result<ExpectedRates> {
    op.validate()?;
    frame_spec.validate()?;
    let keep = 1.0 - op.decoy_fraction;
    let r_signal = frame_spec.slot_rate_hz / 2.0 * keep * op.data_click_probability()?;
    let r_bg = op.data_background_rate()?;
    let r_sift = r_signal + r_bg * keep;
    if !(r_sift > 0.0) {
        return Err(Error::UndefinedQber);
    }
    let qber = (op.intrinsic_qber * r_signal + 0.5 * r_bg * keep) / r_sift;

    let r_int = op.monitor_reference_probability()? * frame_spec.slot_rate_hz;
    let r_bg_mon = op.monitor_background_rate()?;
    let visibility = if r_int + r_bg_mon > 0.0 {
        op.intrinsic_visibility * r_int / (r_int + r_bg_mon)
    } else {
        op.intrinsic_visibility
    };
    Ok(ExpectedRates {
        r_sift,
        qber,
        visibility,
        r_signal,
        r_background_data: r_bg,
        r_interfering: r_int,
        r_background_monitor: r_bg_mon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataDetection {
    pub frame: u64,
    pub symbol: u32,
    /// Arrival slot parity, i.e. the bit Bob reads.
    pub bit: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonitorDetection {
    pub frame: u64,
    /// Interferometer output bin; mixes slots `slot - 1` and `slot`.
    pub slot: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BobReport {
    pub first_frame: u64,
    pub frame_count: u64,
    pub data: Vec<DataDetection>,
    pub monitor: Vec<MonitorDetection>,
}

/// Monte-Carlo receiver.
pub fn bob_receive(alice: &AliceRecord, op: &OperatingPoint, seed: u64) -> Result<BobReport> {
    op.validate()?;
    let spec = alice.frame_spec;
    let clock = spec.clock();
    let frames = alice.frame_count();
    let train_op = OperatingPoint { mu: alice.mu, ..*op };

    let p_data = train_op.data_click_probability()?;
    let p_single = train_op.monitor_single_probability()?;
    let p_destructive = train_op.monitor_destructive_probability()?;

    let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
    data_rng.set_stream(1);
    let mut monitor_rng = ChaCha8Rng::seed_from_u64(seed);
    monitor_rng.set_stream(2);
    let mut flip_rng = ChaCha8Rng::seed_from_u64(seed);
    flip_rng.set_stream(3);

    let data_clicks = sample_tagged(
        DetectorId::Data,
        &clock,
        frames,
        |g| if alice.has_pulse(g) { p_data } else { 0.0 },
        train_op.data_background_rate()?,
        op.spad.dead_time_s,
        &mut data_rng,
    )?;

    let monitor_clicks = sample_tagged(
        DetectorId::Monitor,
        &clock,
        frames,
        |g| {
            let cur = alice.has_pulse(g);
            let prev = g > 0 && alice.has_pulse(g - 1);
            match (prev, cur) {
                (true, true) => p_destructive,
                (true, false) | (false, true) => p_single,
                (false, false) => 0.0,
            }
        },
        train_op.monitor_background_rate()?,
        op.spad.dead_time_s,
        &mut monitor_rng,
    )?;

    let mut data: Vec<DataDetection> = Vec::with_capacity(data_clicks.len());
    for click in data_clicks {
        let r = click.record;
        let mut bit = (r.slot % 2) as u8;
        if click.origin == ClickOrigin::Signal && flip_rng.random_bool(op.intrinsic_qber) {
            bit ^= 1;
        }
        let det = DataDetection { frame: r.frame, symbol: r.slot / 2, bit };
        match data.last_mut() {
            // Double click inside one symbol: squash to a random bit.
            Some(prev) if prev.frame == det.frame && prev.symbol == det.symbol => {
                if prev.bit != det.bit {
                    prev.bit = flip_rng.random::<bool>() as u8;
                }
            }
            _ => data.push(det),
        }
    }
    let monitor = monitor_clicks
        .into_iter()
        .map(|c| MonitorDetection { frame: c.record.frame, slot: c.record.slot })
        .collect();

    Ok(BobReport { first_frame: alice.first_frame, frame_count: frames, data, monitor })
}

/// Bob's report after frame alignment against Alice's record.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedReport(BobReport);

impl AlignedReport {
    pub fn report(&self) -> &BobReport {
        &self.0
    }

    pub fn into_inner(self) -> BobReport {
        self.0
    }
}

/// Aligns Bob's frames to Alice's. The sync channel is ideal, so alignment
/// succeeds only when both sides count the same frames.
pub fn frame_sync(report: BobReport, alice: &AliceRecord) -> Result<AlignedReport> {
    if report.first_frame != alice.first_frame {
        return Err(Error::Sync(format!(
            "first frame {} does not match Alice's {}",
            report.first_frame, alice.first_frame
        )));
    }
    if report.frame_count != alice.frame_count() {
        return Err(Error::Sync(format!(
            "Bob counted {} frames, Alice sent {}",
            report.frame_count,
            alice.frame_count()
        )));
    }
    Ok(AlignedReport(report))
}

/// Monitor-line click counts classified by Alice's pulse pattern.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MonitorCounts {
    pub destructive_clicks: u64,
    pub interfering_bins: u64,
    pub single_clicks: u64,
    pub single_bins: u64,
    pub empty_clicks: u64,
    pub empty_bins: u64,
}

impl MonitorCounts {
    pub fn classify(alice: &AliceRecord, monitor: &[MonitorDetection]) -> Result<Self> {
        let spf = alice.frame_spec.slots_per_frame() as u64;
        let total = alice.frame_count() * spf;
        let class = |g: u64| -> u8 {
            let cur = alice.has_pulse(g);
            let prev = g > 0 && alice.has_pulse(g - 1);
            cur as u8 + prev as u8
        };
        let mut counts = MonitorCounts::default();
        for g in 0..total {
            match class(g) {
                2 => counts.interfering_bins += 1,
                1 => counts.single_bins += 1,
                _ => counts.empty_bins += 1,
            }
        }
        for m in monitor {
            let g = m.frame * spf + m.slot as u64;
            if m.slot as u64 >= spf || g >= total {
                return Err(Error::Protocol(format!("monitor click at frame {} slot {} out of range", m.frame, m.slot)));
            }
            match class(g) {
                2 => counts.destructive_clicks += 1,
                1 => counts.single_clicks += 1,
                _ => counts.empty_clicks += 1,
            }
        }
        Ok(counts)
    }

    fn empty_rate(&self) -> f64 {
        if self.empty_bins == 0 {
            0.0
        } else {
            self.empty_clicks as f64 / self.empty_bins as f64
        }
    }

    fn single_rate(&self) -> f64 {
        if self.single_bins == 0 {
            0.0
        } else {
            self.single_clicks as f64 / self.single_bins as f64
        }
    }

    /// Per-bin click probability an interfering bin would show without coherence,
    /// inferred from single-pulse bins (signal doubled) and empty bins (background).
    pub fn reference_rate(&self) -> f64 {
        2.0 * self.single_rate() - self.empty_rate()
    }

    pub fn destructive_rate(&self) -> f64 {
        if self.interfering_bins == 0 {
            0.0
        } else {
            self.destructive_clicks as f64 / self.interfering_bins as f64
        }
    }

    /// `1 - destructive / reference`, clamped to [0, 1]; 0 without a usable reference.
    pub fn visibility(&self) -> f64 {
        let reference = self.reference_rate();
        if !(reference > 0.0) {
            return 0.0;
        }
        (1.0 - self.destructive_rate() / reference).clamp(0.0, 1.0)
    }

    /// Standard deviation of [`visibility`](Self::visibility) from Poisson counting
    /// statistics (first-order propagation) on the observed counts.
    pub fn visibility_sigma(&self) -> f64 {
        let rate = |c: u64, n: u64| if n == 0 { 0.0 } else { c.max(1) as f64 / n as f64 };
        self.visibility_sigma_for(
            rate(self.destructive_clicks, self.interfering_bins),
            rate(self.single_clicks, self.single_bins),
            rate(self.empty_clicks, self.empty_bins),
        )
    }

    /// Same propagation with given per-bin click probabilities in place of the
    /// observed ones. With model probabilities this is the sampling spread of
    /// the estimator, which stays meaningful when few destructive clicks occur.
    pub fn visibility_sigma_for(&self, destructive: f64, single: f64, empty: f64) -> f64 {
        let reference = 2.0 * single - empty;
        if !(reference > 0.0) || self.interfering_bins == 0 {
            return f64::INFINITY;
        }
        let var = |p: f64, n: u64| if n == 0 { 0.0 } else { p / n as f64 };
        let var_d = var(destructive, self.interfering_bins);
        let var_ref = 4.0 * var(single, self.single_bins) + var(empty, self.empty_bins);
        (var_d / reference.powi(2) + destructive * destructive * var_ref / reference.powi(4)).sqrt()
    }
}

/// Rates observed in a Monte-Carlo run, from the full transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredRates {
    pub duration_s: f64,
    pub sifted: u64,
    pub errors: u64,
    pub r_sift: f64,
    pub qber: f64,
    pub visibility: f64,
    pub monitor: MonitorCounts,
}

impl MeasuredRates {
    pub fn r_sift_sigma(&self) -> f64 {
        (self.sifted.max(1) as f64).sqrt() / self.duration_s
    }

    pub fn qber_sigma(&self) -> f64 {
        let n = self.sifted.max(1) as f64;
        let q = self.qber.clamp(1.0 / n, 1.0 - 1.0 / n);
        (q * (1.0 - q) / n).sqrt()
    }

    pub fn visibility_sigma(&self) -> f64 {
        self.monitor.visibility_sigma()
    }

    /// Sampling standard deviations of (R_sift, QBER, V) if `op` is the true
    /// operating point, for the bins this run actually contained.
    pub fn model_sigmas(&self, op: &OperatingPoint, frame_spec: &FrameSpec) -> Result<[f64; 3]> {
        let expected = expected_rates(op, frame_spec)?;
        let n = expected.r_sift * self.duration_s;
        let bg = op.monitor_background_rate()? * frame_spec.slot_duration_s();
        let v = self.monitor.visibility_sigma_for(
            op.monitor_destructive_probability()? + bg,
            op.monitor_single_probability()? + bg,
            bg,
        );
        Ok([n.sqrt() / self.duration_s, (expected.qber * (1.0 - expected.qber) / n).sqrt(), v])
    }
}

pub fn measure_rates(alice: &AliceRecord, report: &AlignedReport) -> Result<MeasuredRates> {
    let mut sifted = 0u64;
    let mut errors = 0u64;
    for d in &report.0.data {
        let sym = alice
            .symbol(d.frame, d.symbol)
            .ok_or_else(|| Error::Protocol(format!("detection at frame {} symbol {} out of range", d.frame, d.symbol)))?;
        if let Some(bit) = sym.bit() {
            sifted += 1;
            errors += (bit != d.bit) as u64;
        }
    }
    let duration_s = alice.frame_count() as f64 / alice.frame_spec.frame_rate_hz;
    let monitor = MonitorCounts::classify(alice, &report.0.monitor)?;
    Ok(MeasuredRates {
        duration_s,
        sifted,
        errors,
        r_sift: sifted as f64 / duration_s,
        qber: if sifted > 0 { errors as f64 / sifted as f64 } else { 0.0 },
        visibility: monitor.visibility(),
        monitor,
    })
}

// Transcript text format. Blank lines and `#` comments are ignored.
//
//   cow-alice v1
//   slot_rate_hz <f64>
//   frame_rate_hz <f64>
//   mu <f64>
//   decoy_fraction <f64>
//   seed <u64>
//   first_frame <u64>
//   frames <u64>
//   F <frame> <one char per symbol: 0, 1 or d>
//
//   cow-bob v1
//   first_frame <u64>
//   frames <u64>
//   D <frame> <symbol> <bit>
//   M <frame> <slot>

impl AliceRecord {
    pub fn to_transcript(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cow-alice v1");
        let _ = writeln!(s, "slot_rate_hz {}", self.frame_spec.slot_rate_hz);
        let _ = writeln!(s, "frame_rate_hz {}", self.frame_spec.frame_rate_hz);
        let _ = writeln!(s, "mu {}", self.mu);
        let _ = writeln!(s, "decoy_fraction {}", self.decoy_fraction);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "first_frame {}", self.first_frame);
        let _ = writeln!(s, "frames {}", self.frame_count());
        for f in 0..self.frame_count() {
            let line: String = self.frame(f).iter().map(|s| s.to_char()).collect();
            let _ = writeln!(s, "F {} {}", self.first_frame + f, line);
        }
        s
    }

    pub fn from_transcript(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        expect_header(&mut lines, "cow-alice v1")?;
        let slot_rate_hz = keyed(&mut lines, "slot_rate_hz")?;
        let frame_rate_hz = keyed(&mut lines, "frame_rate_hz")?;
        let mu = keyed(&mut lines, "mu")?;
        let decoy_fraction = keyed(&mut lines, "decoy_fraction")?;
        let seed = keyed(&mut lines, "seed")?;
        let first_frame: u64 = keyed(&mut lines, "first_frame")?;
        let frames: u64 = keyed(&mut lines, "frames")?;
        let frame_spec = FrameSpec { slot_rate_hz, frame_rate_hz };
        frame_spec.validate()?;
        let per = frame_spec.symbols_per_frame() as usize;
        let mut symbols = Vec::with_capacity(frames as usize * per);
        for f in 0..frames {
            let (no, line) = lines.next().ok_or(Error::Parse { line: 0, msg: "missing frame line".into() })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "F" {
                return Err(Error::Parse { line: no, msg: "expected `F <frame> <symbols>`".into() });
            }
            let idx: u64 = parse_field(parts[1], no)?;
            if idx != first_frame + f {
                return Err(Error::Parse { line: no, msg: format!("frame {idx} out of order") });
            }
            if parts[2].len() != per {
                return Err(Error::Parse { line: no, msg: format!("expected {per} symbols") });
            }
            for c in parts[2].chars() {
                symbols.push(CowSymbol::from_char(c).ok_or(Error::Parse { line: no, msg: format!("bad symbol {c:?}") })?);
            }
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::Parse { line: no, msg: "trailing content".into() });
        }
        Ok(Self { frame_spec, mu, decoy_fraction, seed, first_frame, symbols })
    }
}

impl BobReport {
    pub fn to_transcript(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cow-bob v1");
        let _ = writeln!(s, "first_frame {}", self.first_frame);
        let _ = writeln!(s, "frames {}", self.frame_count);
        for d in &self.data {
            let _ = writeln!(s, "D {} {} {}", d.frame, d.symbol, d.bit);
        }
        for m in &self.monitor {
            let _ = writeln!(s, "M {} {}", m.frame, m.slot);
        }
        s
    }

    pub fn from_transcript(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        expect_header(&mut lines, "cow-bob v1")?;
        let first_frame = keyed(&mut lines, "first_frame")?;
        let frame_count = keyed(&mut lines, "frames")?;
        let mut report = BobReport { first_frame, frame_count, ..Default::default() };
        for (no, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["D", f, s, b] => {
                    let bit: u8 = parse_field(b, no)?;
                    if bit > 1 {
                        return Err(Error::Parse { line: no, msg: "bit must be 0 or 1".into() });
                    }
                    report.data.push(DataDetection { frame: parse_field(f, no)?, symbol: parse_field(s, no)?, bit });
                }
                ["M", f, s] => report.monitor.push(MonitorDetection { frame: parse_field(f, no)?, slot: parse_field(s, no)? }),
                _ => return Err(Error::Parse { line: no, msg: format!("unrecognised record {line:?}") }),
            }
        }
        Ok(report)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn expect_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, header: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l == header => Ok(()),
        Some((no, l)) => Err(Error::Parse { line: no, msg: format!("expected {header:?}, got {l:?}") }),
        None => Err(Error::Parse { line: 0, msg: "empty transcript".into() }),
    }
}

fn keyed<'a, T: std::str::FromStr>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let (no, line) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing {key}") })?;
    match line.split_once(' ') {
        Some((k, v)) if k == key => parse_field(v.trim(), no),
        _ => Err(Error::Parse { line: no, msg: format!("expected `{key} <value>`") }),
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::Parse { line, msg: format!("{s:?}: {e}") })
}
