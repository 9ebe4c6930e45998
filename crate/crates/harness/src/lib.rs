//! Experiment campaigns over the cooperative-perception optimizer:
//! seeded selection/allocation/fusion sweeps, their CSV/JSON/plot-data
//! writers, and a self-check suite runnable from the CLI.

pub mod config;
pub mod report;
pub mod sweeps;
pub mod verify;

pub use config::HarnessConfig;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cpopt_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
