use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hcfqkd_core::classical::ber;
use hcfqkd_core::harness::{
    aes_note, calibrate, emit_csv, run_scenario, run_sweep, write_csv, write_meta, Backend, CalibrationTarget,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "hcfqkd", version, about = "COW QKD / WDM co-existence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Mc,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured point, or the whole sweep with --sweep.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: bool,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Frames per point for the Monte-Carlo backend.
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; a `.meta.json` is written beside it. Stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit noise parameters to QBER anchors and print the calibrated config.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-channel BER against received optical power.
    BerCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
        rop_min: f64,
        #[arg(long, default_value_t = -18.0, allow_hyphen_values = true)]
        rop_max: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Print the built-in default config.
    DefaultConfig,
}

fn apply_overrides(cfg: &mut ScenarioConfig, backend: Option<BackendArg>, frames: Option<u64>, seed: Option<u64>) {
    let (cur_frames, cur_seed) = match cfg.backend {
        Backend::Montecarlo { frames, seed } => (frames, seed),
        Backend::Analytic => (10_000, 1),
    };
    let mc = match backend {
        Some(BackendArg::Mc) => true,
        Some(BackendArg::Analytic) => false,
        None => matches!(cfg.backend, Backend::Montecarlo { .. }) || frames.is_some() || seed.is_some(),
    };
    cfg.backend = if mc {
        Backend::Montecarlo { frames: frames.unwrap_or(cur_frames), seed: seed.unwrap_or(cur_seed) }
    } else {
        Backend::Analytic
    };
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, sweep, backend, frames, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            apply_overrides(&mut cfg, backend, frames, seed);
            cfg.validate()?;
            let rows = if sweep { run_sweep(&cfg)? } else { vec![run_scenario(&cfg)?] };
            match out {
                Some(path) => {
                    emit_csv(&rows, &path)?;
                    let meta = write_meta(&cfg, rows.len(), &path)?;
                    eprintln!("wrote {} and {}", path.display(), meta.display());
                }
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            eprintln!("{}", aes_note(&cfg)?);
        }
        Command::Calibrate { config, anchors, out } => {
            let cfg = ScenarioConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let target: CalibrationTarget = serde_json::from_str(
                &std::fs::read_to_string(&anchors).with_context(|| format!("reading {}", anchors.display()))?,
            )?;
            let cal = calibrate(&cfg, &target)?;
            eprintln!(
                "scatter_fraction = {:e}, spr_scale = {}, residuals = {:?}",
                cal.record.scatter_fraction, cal.record.spr_scale, cal.record.residuals
            );
            let text = cal.config.to_json()? + "\n";
            match out {
                Some(path) => std::fs::write(&path, text)?,
                None => print!("{text}"),
            }
        }
        Command::BerCurve { config, rop_min, rop_max, step } => {
            if step.is_nan() || step <= 0.0 || rop_max.is_nan() || rop_min.is_nan() || rop_max < rop_min {
                bail!("need step > 0 and rop_max >= rop_min");
            }
            let cfg = ScenarioConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let rx = cfg.receiver_model()?;
            let n = cfg.plan.grid_count;
            let mut w = std::io::stdout().lock();
            let header: Vec<String> = (1..=n).map(|i| format!("ch{i}")).collect();
            writeln!(w, "rop_dbm,{}", header.join(","))?;
            let steps = ((rop_max - rop_min) / step + 1e-9).floor() as usize;
            for k in 0..=steps {
                let rop = rop_min + k as f64 * step;
                let bers = (0..n).map(|i| ber(rop, &rx, rx.offset(i)).map(|b| format!("{b:.5e}")));
                writeln!(w, "{rop:.5e},{}", bers.collect::<Result<Vec<_>, _>>()?.join(","))?;
            }
        }
        Command::DefaultConfig => println!("{}", ScenarioConfig::default().to_json()?),
    }
    Ok(())
}
