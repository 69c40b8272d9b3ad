//! Discrete-time LEO access and backhaul network model.

pub mod channel;
pub mod config;
pub mod report;
pub mod scenario;

pub use channel::{backhaul_capacity, path_gain, shannon_rate, sinr, sinr_from_parts, GainTable};
pub use config::{DemandSplit, SimConfig};
pub use report::RateReport;
pub use scenario::{init_scenario, LeosState, ScenarioState, LOAD_CAP};
