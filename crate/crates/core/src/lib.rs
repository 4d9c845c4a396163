// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of several initiators sharing one memory target through
//! a tree of arbitration nodes. Arbitration can be fixed priority, round
//! robin, TDMA, fixed weight, or epoch arbitration with credit-counter
//! bandwidth enforcement at the target edge.

pub mod arbiters;
pub mod cli;
pub mod engine;
pub mod fabric;
pub mod metrics;
pub mod model;
pub mod presets;
pub mod qos_edge;
pub mod target;
pub mod traffic;

pub use engine::{run_scenario, SimError, Simulation};
pub use metrics::MetricsReport;
pub use model::{QosLevel, ScenarioConfig, Scheme};
pub use presets::{preset, PRESET_NAMES};
