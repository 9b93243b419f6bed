//! Configuration, batch runs and reports for the `optconn` binary.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use report::RunReport;
pub use run::run;
