//! HTTP service and command line for the hypothesis-testing engine in
//! `hypotest-core`.

pub mod api;
pub mod cli;
pub mod config;

pub use api::{router, AppState, HypothesisResponse};
pub use config::ApiConfig;
