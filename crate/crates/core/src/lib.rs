//! Simulation of a coherent-one-way QKD link sharing a hollow-core fibre span
//! with a C-band WDM classical grid.
//!
//! Closed-form and Monte-Carlo backends share the same link model, detector
//! model and distillation pipeline; [`harness`] drives both from JSON configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod cow;
pub mod detection;
pub mod distill;
pub mod error;
pub mod harness;
pub mod link;
pub mod units;

pub use error::{Error, Result};
pub use units::{Channel, ChannelPlan, ChannelRole, GridMeta, OpticalPower};
pub use link::{FiberKind, FiberSpan, LinkChain, NoiseBudget, QuantumPath, SprProfile};
pub use detection::{ClickRecord, DetectorId, SpadParams};
pub use cow::{AliceRecord, BobReport, CowSymbol, ExpectedRates, FrameSpec, MeasuredRates, OperatingPoint};
pub use distill::{ParamEstimate, SecretFractionStrategy, SecureKey, SiftedKey};
pub use classical::ReceiverModel;
pub use harness::{run_scenario, run_sweep, ScenarioConfig, ScenarioResult};
