//! Configuration, experiment harnesses and report output for `alphamod`.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, EXPERIMENTS};
pub use experiments::run;
pub use report::{Outcome, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{experiment}: {source}")]
    Run {
        experiment: String,
        source: alphamod::Error,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}
