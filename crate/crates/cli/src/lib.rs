//! Configuration, orchestration, persistence and plot-data emission for the
//! obstacle-problem solvers and their verification checks.

pub mod config;
pub mod formats;
pub mod runner;

pub use config::{load_config, RunConfig};
pub use runner::{run, Subcommand};
