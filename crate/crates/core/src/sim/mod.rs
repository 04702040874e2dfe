//! Deterministic simulator.

pub mod audit;
pub mod executor;
pub mod faults;
pub mod modelcheck;
pub mod network;
pub mod report;
pub mod scenario;
pub mod trace;

pub use executor::{RunMeta, RunOutput, Simulation};
pub use faults::AuthorityFault;
pub use modelcheck::{model_check_swap, Bounds, ModelCheckError, ModelCheckReport};
pub use network::NetworkConfig;
pub use report::{read_run, run_scenario, write_run, ReportFormat, RunReport};
pub use scenario::{ConfigError, Scenario};
pub use trace::{Trace, TraceEvent};
