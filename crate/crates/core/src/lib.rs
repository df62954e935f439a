//! Model-free control of a boost DC-DC converter.
//!
//! The crate pairs a sampled-data intelligent PI (i-PI) controller built on
//! the second-order ultra-local model `y'' = F + alpha * u` with a full-order
//! averaged boost-converter model that covers both continuous (CCM) and
//! discontinuous (DCM) conduction. A cycle-by-cycle switched model serves as
//! an independent reference for the averaged one.
//!
//! Modules:
//! - [`controller`]: the discrete i-PI law, duty clamps, anti-windup, moving-average filter.
//! - [`plant`]: averaged and switched boost models, conduction-mode logic, static relations.
//! - [`sim`]: RK4 integration, reference trajectories, the closed loop and metrics.
//! - [`scenario`]: the scenario file format, built-in presets, CSV output, plot scripts.
//! - [`validate`]: the built-in cross-model oracle checks.
//! - [`cli`]: the command-line front end used by the `boost-ipi` binary.

pub mod cli;
pub mod controller;
pub mod error;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod validate;

pub use controller::{moving_average, ControllerState, IpiConfig};
pub use error::{Error, Result};
pub use plant::{BoostParams, ConductionMode, PlantState};
pub use scenario::{parse_scenario, preset, write_csv, Preset};
pub use sim::{
    metrics, reference_at, rk4_step, run_closed_loop, run_open_loop, ClosedLoop, LoadEvent,
    Metrics, ReferenceSpec, Scenario, TimeSeriesRecord,
};
