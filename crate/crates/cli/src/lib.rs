//! Command-line orchestration: simulate homes, run them through gateways and
//! the platform, analyze the synced data and write clinician summaries and
//! plot-ready tables.
//!
//! Exit codes of the `carewatch` binary:
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 2    | invalid scenario, thresholds or command line         |
//! | 3    | a component failed; the message names it             |
//! | 4    | unknown pseudonym or no stored results               |

pub mod api;
pub mod config;
pub mod pipeline;
pub mod report;

use thiserror::Error;

pub use api::{Api, Endpoint, Tokens, Uplink};
pub use config::{load, ConfigError, Overrides, PreparedHome, RunConfig, Scenario};
pub use pipeline::{
    analyze_events, analyze_subject, cmd_run, cmd_simulate, HomeOutcome, ReportLine, RunOptions, RunSummary,
};
pub use report::{rolling_median, write_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPONENT: i32 = 3;
pub const EXIT_NOT_FOUND: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{component}: {cause}")]
    Component { component: &'static str, cause: String },
    #[error("{code}: {message}")]
    NotFound { code: String, message: String },
}

impl CliError {
    pub fn component(component: &'static str, cause: impl std::fmt::Display) -> Self {
        CliError::Component { component, cause: cause.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Component { .. } => EXIT_COMPONENT,
            CliError::NotFound { .. } => EXIT_NOT_FOUND,
        }
    }
}
