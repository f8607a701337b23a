//! Storage, engine, HTTP API and configuration for the `reflective` binary.

pub mod config;
pub mod engine;
pub mod http;
pub mod store;

use std::sync::Arc;

use reflective_core::user_model::{fixture_personas, load_personas, UserModelError};

use config::{make_client, ServiceConfig};
use engine::Engine;
use store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Personas(#[from] UserModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Opens the store, loads personas and builds the LLM client.
pub fn build_engine(config: &ServiceConfig) -> Result<Engine, StartupError> {
    let personas = match &config.personas_path {
        Some(path) => load_personas(path)?,
        None => fixture_personas(),
    };
    let store = Arc::new(Store::open(&config.db_path)?);
    Ok(Engine::new(store, make_client(&config.llm), personas)
        .with_scheme_seed(config.scheme_seed)
        .with_workers(config.reflection_workers)
        .with_analysis(config.analysis))
}
