//! Scenario runner for `speclp-core`: flat TOML configs, seeded test
//! corpora, JSON/CSV reports and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod corpus;
pub mod scenarios;

pub use config::{Scenario, ScenarioConfig};
pub use scenarios::{run_scenario, Check, RunResult};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad or illegal configuration; the CLI exits with status 2.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] speclp_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
