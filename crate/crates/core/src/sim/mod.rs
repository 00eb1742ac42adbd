//! Discrete-event parking simulator.
//!
//! Vehicles enter at configured links, traverse links at the speed limit (or
//! the imposed speed of an active condition), and try to park at the end of
//! links next to parking lots. Controlled vehicles pick every next link with
//! the receding-horizon planner; uncontrolled ones follow free-flow shortest
//! paths.

pub mod config;
pub mod engine;
pub mod trace;

pub use config::{Arrival, FleetGroup, ObstructionSpec, ScenarioConfig, VehicleKind};
pub use engine::{init_scenario, run, SimOutcome, SimState, VehicleState, VehicleStatus, RETRY_DELAY_S};
pub use trace::{TraceEvent, TraceLog, TraceRecord};
