//! Simulation and analysis of distributed speculative inference (DSI).
//!
//! - [`analytic`]: closed-form latencies and the lookahead / SP planner.
//! - [`offline`]: discrete-event simulators for non-SI, SI and DSI.
//! - [`online`]: a threaded DSI executor over synthetic language models.
//! - [`estimation`]: acceptance rate and forward latency from recorded runs.
//! - [`harness`]: parameter sweeps, pair reports, CSV and SVG output.
//! - [`config`]: the flat key-value file format shared by the above.

pub mod acceptance;
pub mod analytic;
pub mod config;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod offline;
pub mod online;
pub mod rng;
pub mod trace;
pub mod types;

pub use acceptance::{acceptance_rate_from_mean, sample_accepted_run, AcceptanceTape};
pub use error::{Error, Result};
pub use offline::{Algorithm, Scenario, SimOptions, SimResult};
pub use rng::SimRng;
pub use trace::{EventKind, TraceEvent};
pub use types::{AcceptanceModel, ForwardProfile, SimConfig, Ticks, TokenId, TokenSeq};
