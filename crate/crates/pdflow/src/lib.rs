//! Instance generators, config-driven experiment runs and CSV/plot output for `pdflow-core`.

pub mod compare;
pub mod config;
pub mod error;
pub mod instance;
pub mod output;
pub mod runner;
