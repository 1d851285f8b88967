//! Config-driven experiment runner on top of `ando-core`.

pub mod config;
pub mod error;
pub mod matrix_io;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, OutputFormat, Overrides, Pipeline};
pub use error::{CliError, Located};
pub use run::run;
