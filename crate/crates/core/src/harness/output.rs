use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{CalibrationRecord, ScenarioConfig};
use super::scenario::ScenarioResult;
use crate::distill::aes_budget_default;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 18] = [
    "channel_count",
    "aggregated_classical_dbm",
    "a_tx_db",
    "quantum_loss_db",
    "spr_flux",
    "ase_flux",
    "scatter_flux",
    "total_noise_flux",
    "r_sift",
    "qber",
    "visibility",
    "secret_fraction",
    "skr",
    "backend",
    "seed",
    "sifted_bits",
    "secure_bits",
    "channel_ber",
];

fn num(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn row(r: &ScenarioResult) -> Vec<String> {
    vec![
        r.channel_count.to_string(),
        num(r.aggregated_classical_dbm),
        num(r.a_tx_db),
        num(r.quantum_loss_db),
        num(r.noise.spr_flux),
        num(r.noise.ase_flux),
        num(r.noise.scatter_flux),
        num(r.noise.total_flux),
        num(r.r_sift),
        num(r.qber),
        num(r.visibility),
        num(r.secret_fraction),
        num(r.skr),
        r.backend.to_string(),
        opt(r.seed),
        opt(r.sifted_bits),
        opt(r.secure_bits),
        r.channel_ber.iter().map(|&b| num(b)).collect::<Vec<_>>().join(";"),
    ]
}

pub fn write_csv<W: Write>(rows: &[ScenarioResult], out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("refusing to write an empty result table".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the table to `path`.
pub fn emit_csv(rows: &[ScenarioResult], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("refusing to write an empty result table".into()));
    }
    write_csv(rows, std::fs::File::create(path)?)
}

/// Hex SHA-256 of the canonical JSON form of the config.
pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Key-rate needed to renew AES-256 every 64 GB over the full grid, with a
/// comparison against a 65 bit/s key rate.
pub fn aes_note(config: &ScenarioConfig) -> Result<String> {
    let capacity = config.plan.grid_count as f64 * config.plan.line_rate_bps;
    let budget = aes_budget_default(capacity)?;
    Ok(format!(
        "note: renewing a 256-bit AES key every 64 GB on {} x {} Gb/s needs {} bit/s of secure key; \
         a 65 bit/s key rate covers {:.0}% of that",
        config.plan.grid_count,
        config.plan.line_rate_bps / 1e9,
        budget.round(),
        100.0 * 65.0 / budget
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub backend: String,
    pub seed: Option<u64>,
    pub rows: usize,
    pub calibration: Option<CalibrationRecord>,
    pub notes: Vec<String>,
}

impl RunMeta {
    pub fn new(config: &ScenarioConfig, rows: usize) -> Result<Self> {
        Ok(Self {
            tool: "hcfqkd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config_hash(config)?,
            backend: config.backend.tag().into(),
            seed: config.backend.seed(),
            rows,
            calibration: config.calibration.clone(),
            notes: vec![aes_note(config)?],
        })
    }
}

/// Writes `<csv path>.meta.json` next to the table.
pub fn write_meta(config: &ScenarioConfig, rows: usize, csv_path: &Path) -> Result<std::path::PathBuf> {
    let meta = RunMeta::new(config, rows)?;
    let mut name = csv_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    let path = csv_path.with_file_name(name);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
