pub mod config;
pub mod run;
pub mod table;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{run_experiment, Outcome};
pub use table::{read_csv, write_csv, Row};

/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "COMBQFI_WORKERS";
