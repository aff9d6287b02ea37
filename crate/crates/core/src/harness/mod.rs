//! Scenario configuration, evaluation, sweeps, calibration and output.

mod calibrate;
mod config;
mod output;
mod scenario;

pub use calibrate::{calibrate, Calibrated, CalibrationTarget};
pub use config::{
    Anchor, Backend, CalibrationRecord, DistillationConfig, FiberConfig, LinkConfig, PlanConfig, PointConfig,
    ProtocolConfig, ReceiverConfig, ScenarioConfig, SweepConfig,
};
pub use output::{aes_note, config_hash, emit_csv, write_csv, write_meta, RunMeta, CSV_COLUMNS};
pub use scenario::{derive_seed, evaluate_point, run_scenario, run_sweep, sweep_points, ScenarioResult};
