//! Key distillation: sifting, parameter estimation, leakage accounting,
//! Toeplitz privacy amplification and secure-key-rate bookkeeping.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cow::{AlignedReport, AliceRecord, MonitorCounts};
use crate::error::{domain, Error, Result};
use crate::units::binary_entropy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Alice,
    Bob,
}

/// Frame and symbol a key bit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolPos {
    pub frame: u64,
    pub symbol: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftedKey {
    pub owner: Owner,
    pub bits: Vec<u8>,
    pub positions: Vec<SymbolPos>,
    pub first_frame: u64,
    pub frame_count: u64,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    fn retain_indices(&self, keep: &[bool]) -> SiftedKey {
        let (bits, positions) = self
            .bits
            .iter()
            .zip(&self.positions)
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|((b, p), _)| (*b, *p))
            .unzip();
        SiftedKey { bits, positions, ..*self }
    }
}

pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftOutput {
    pub alice: SiftedKey,
    pub bob: SiftedKey,
    pub monitor: MonitorCounts,
}

/// Bob announces his data-line positions, Alice drops decoys, both keep the rest.
pub fn sift(alice: &AliceRecord, report: &AlignedReport) -> Result<SiftOutput> {
    let r = report.report();
    let mut a_bits = Vec::new();
    let mut b_bits = Vec::new();
    let mut positions = Vec::new();
    for d in &r.data {
        let sym = alice.symbol(d.frame, d.symbol).ok_or_else(|| {
            Error::Protocol(format!("Bob announced frame {} symbol {} outside Alice's record", d.frame, d.symbol))
        })?;
        if let Some(bit) = sym.bit() {
            a_bits.push(bit);
            b_bits.push(d.bit);
            positions.push(SymbolPos { frame: d.frame, symbol: d.symbol });
        }
    }
    let monitor = MonitorCounts::classify(alice, &r.monitor)?;
    let mk = |owner, bits| SiftedKey {
        owner,
        bits,
        positions: positions.clone(),
        first_frame: r.first_frame,
        frame_count: r.frame_count,
    };
    Ok(SiftOutput { alice: mk(Owner::Alice, a_bits), bob: mk(Owner::Bob, b_bits), monitor })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub qber_est: f64,
    pub visibility_est: f64,
    pub sample_size: usize,
    /// Indices into the sifted key that were disclosed.
    pub disclosed: Vec<usize>,
}

impl ParamEstimate {
    /// Estimate taken directly from closed-form rates (no disclosure).
    pub fn analytic(qber: f64, visibility: f64) -> Self {
        Self { qber_est: qber, visibility_est: visibility, sample_size: 0, disclosed: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimated {
    pub estimate: ParamEstimate,
    pub alice: SiftedKey,
    pub bob: SiftedKey,
}

/// Discloses a uniformly chosen sample, measures its error rate and removes it
/// from both keys. Visibility comes from the monitor counts.
pub fn estimate(
    alice: &SiftedKey,
    bob: &SiftedKey,
    monitor: &MonitorCounts,
    sample_fraction: f64,
    min_sifted_bits: usize,
    seed: u64,
) -> Result<Estimated> {
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(domain(format!("sample fraction {sample_fraction} outside (0, 1)")));
    }
    if alice.len() != bob.len() || alice.positions != bob.positions {
        return Err(Error::Protocol("sifted keys are not aligned".into()));
    }
    let n = alice.len();
    if n < min_sifted_bits.max(1) {
        return Err(Error::InsufficientData { have: n, need: min_sifted_bits.max(1) });
    }
    let k = ((n as f64 * sample_fraction).floor() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disclosed = rand::seq::index::sample(&mut rng, n, k).into_vec();
    disclosed.sort_unstable();

    let mismatches = disclosed.iter().filter(|&&i| alice.bits[i] != bob.bits[i]).count();
    let mut keep = vec![true; n];
    for &i in &disclosed {
        keep[i] = false;
    }
    Ok(Estimated {
        estimate: ParamEstimate {
            qber_est: mismatches as f64 / k as f64,
            visibility_est: monitor.visibility(),
            sample_size: k,
            disclosed,
        },
        alice: alice.retain_indices(&keep),
        bob: bob.retain_indices(&keep),
    })
}

/// Maps (QBER, visibility, reconciliation efficiency) to the fraction of
/// reconciled bits that survive privacy amplification.
pub trait SecretFraction {
    fn name(&self) -> &'static str;
    fn fraction(&self, qber: f64, visibility: f64, f_ec: f64) -> Result<f64>;
}

/// `max(0, 1 - f_ec·h2(Q) - (1 - V))`. A heuristic, not a proven bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicFraction;

impl SecretFraction for HeuristicFraction {
    fn name(&self) -> &'static str {
        "heuristic"
    }

    fn fraction(&self, qber: f64, visibility: f64, f_ec: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(domain(format!("visibility {visibility} outside [0, 1]")));
        }
        if !(f_ec >= 1.0) {
            return Err(domain(format!("reconciliation efficiency must be >= 1, got {f_ec}")));
        }
        // Above 50 % the channel is no better than a coin.
        let leak = f_ec * binary_entropy(qber.min(0.5))?;
        Ok((1.0 - leak - (1.0 - visibility)).max(0.0))
    }
}

/// Secret-fraction strategy selectable from configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecretFractionStrategy {
    #[default]
    Heuristic,
}

impl SecretFractionStrategy {
    pub fn get(self) -> &'static dyn SecretFraction {
        match self {
            SecretFractionStrategy::Heuristic => &HeuristicFraction,
        }
    }
}

pub fn secret_fraction(qber: f64, visibility: f64, f_ec: f64) -> Result<f64> {
    HeuristicFraction.fraction(qber, visibility, f_ec)
}

pub fn secure_key_rate(r_sift: f64, estimate: &ParamEstimate, sample_fraction: f64, f_ec: f64) -> Result<f64> {
    secure_key_rate_with(&HeuristicFraction, r_sift, estimate, sample_fraction, f_ec)
}

pub fn secure_key_rate_with(
    strategy: &dyn SecretFraction,
    r_sift: f64,
    estimate: &ParamEstimate,
    sample_fraction: f64,
    f_ec: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&sample_fraction) {
        return Err(domain(format!("sample fraction {sample_fraction} outside [0, 1)")));
    }
    if !(r_sift >= 0.0) {
        return Err(domain("sifted rate must be >= 0"));
    }
    let f = strategy.fraction(estimate.qber_est, estimate.visibility_est, f_ec)?;
    Ok(r_sift * (1.0 - sample_fraction) * f)
}

/// Secret-key rate needed to renew a `key_bits` AES key every
/// `data_limit_bytes` of traffic on a link of `link_capacity` bit/s.
pub fn aes_budget(link_capacity_bps: f64, key_bits: f64, data_limit_bytes: f64) -> Result<f64> {
    if !(link_capacity_bps > 0.0) || !(data_limit_bytes > 0.0) || !(key_bits > 0.0) {
        return Err(domain("capacity, key size and data limit must be > 0"));
    }
    Ok(key_bits * (link_capacity_bps / 8.0) / data_limit_bytes)
}

/// Default AES renewal budget: a 256-bit key per 64 GB.
pub fn aes_budget_default(link_capacity_bps: f64) -> Result<f64> {
    aes_budget(link_capacity_bps, 256.0, 64e9)
}

/// Toeplitz matrix over GF(2), stored as its `rows + cols - 1` diagonals.
/// Entry `(i, j)` is `diagonals[rows - 1 + j - i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzMatrix {
    rows: usize,
    cols: usize,
    diagonals: Vec<bool>,
    words: Vec<u64>,
}

impl ToeplitzMatrix {
    pub fn from_diagonals(rows: usize, cols: usize, diagonals: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(domain("Toeplitz matrix needs at least one row and column"));
        }
        if diagonals.len() != rows + cols - 1 {
            return Err(domain(format!("expected {} diagonal bits, got {}", rows + cols - 1, diagonals.len())));
        }
        let words = pack(&diagonals);
        Ok(Self { rows, cols, diagonals, words })
    }

    pub fn from_seed(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..rows + cols - 1).map(|_| rng.random::<bool>()).collect();
        Self::from_diagonals(rows, cols, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.diagonals[self.rows - 1 + j - i]
    }

    /// `T·key` over GF(2).
    pub fn apply(&self, key: &[u8]) -> Result<Vec<u8>> {
        if key.len() != self.cols {
            return Err(domain(format!("key has {} bits, matrix expects {}", key.len(), self.cols)));
        }
        let key_bits: Vec<bool> = key.iter().map(|&b| b & 1 == 1).collect();
        let key_words = pack(&key_bits);
        let n_words = key_words.len();
        let tail = self.cols % 64;
        let last_mask = if tail == 0 { u64::MAX } else { (1u64 << tail) - 1 };
        let out = (0..self.rows)
            .map(|i| {
                let offset = self.rows - 1 - i;
                let mut acc = 0u64;
                for (w, kw) in key_words.iter().enumerate() {
                    let mut row = extract(&self.words, offset + 64 * w);
                    if w + 1 == n_words {
                        row &= last_mask;
                    }
                    acc ^= row & kw;
                }
                (acc.count_ones() & 1) as u8
            })
            .collect();
        Ok(out)
    }
}

fn pack(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// 64 bits of the packed sequence starting at bit `start`.
fn extract(words: &[u64], start: usize) -> u64 {
    let (w, s) = (start / 64, start % 64);
    let lo = words.get(w).copied().unwrap_or(0);
    if s == 0 {
        lo
    } else {
        let hi = words.get(w + 1).copied().unwrap_or(0);
        (lo >> s) | (hi << (64 - s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureKey {
    pub bits: Vec<u8>,
    pub toeplitz_seed: u64,
}

impl SecureKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Hex text with a length header; bits are packed MSB first.
    pub fn to_hex_text(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b == 1 {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        let mut s = String::new();
        let _ = writeln!(s, "secure-key v1");
        let _ = writeln!(s, "length {}", self.bits.len());
        let _ = writeln!(s, "toeplitz_seed {}", self.toeplitz_seed);
        let _ = writeln!(s, "{}", hex::encode(bytes));
        s
    }

    pub fn from_hex_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let err = |msg: &str| Error::Parse { line: 0, msg: msg.to_string() };
        if lines.next() != Some("secure-key v1") {
            return Err(err("missing `secure-key v1` header"));
        }
        let field = |l: Option<&str>, key: &str| -> Result<u64> {
            l.and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| err(&format!("missing {key}")))
        };
        let length = field(lines.next(), "length")? as usize;
        let toeplitz_seed = field(lines.next(), "toeplitz_seed")?;
        let bytes = hex::decode(lines.next().unwrap_or("")).map_err(|e| err(&e.to_string()))?;
        if bytes.len() != length.div_ceil(8) {
            return Err(err("hex payload does not match length"));
        }
        let bits = (0..length).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect();
        Ok(Self { bits, toeplitz_seed })
    }
}

/// Compresses `key` to `out_length` bits with a seeded Toeplitz hash.
pub fn privacy_amplify(key: &[u8], out_length: usize, seed: u64) -> Result<SecureKey> {
    if out_length > key.len() {
        return Err(Error::OutputTooLong { requested: out_length, available: key.len() });
    }
    if out_length == 0 {
        return Ok(SecureKey { bits: Vec::new(), toeplitz_seed: seed });
    }
    let t = ToeplitzMatrix::from_seed(out_length, key.len(), seed)?;
    Ok(SecureKey { bits: t.apply(key)?, toeplitz_seed: seed })
}
