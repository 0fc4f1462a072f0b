//! HTTP service and composition root for keychord.

pub mod api;
pub mod audit;
pub mod config;
pub mod tables;
pub mod transcribe;

pub use api::{router, AppState};
pub use config::{Assets, ServerConfig, SetupError};
