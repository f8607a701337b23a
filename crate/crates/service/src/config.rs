//! Service configuration: an optional TOML file, then environment overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use reflective_core::analysis::AnalysisConfig;
use reflective_core::llm::{HttpLlmClient, LlmClient, LlmConfig};
use reflective_core::mock::MockLlm;
use serde::{Deserialize, Serialize};

pub const ENV_DB_PATH: &str = "REFLECTIVE_DB_PATH";
pub const ENV_PERSONAS: &str = "REFLECTIVE_PERSONAS";
pub const ENV_BIND: &str = "REFLECTIVE_BIND";
pub const ENV_WORKERS: &str = "REFLECTIVE_REFLECTION_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub db_path: PathBuf,
    /// Persona file; the bundled fixtures when absent.
    pub personas_path: Option<PathBuf>,
    pub bind: String,
    pub reflection_workers: usize,
    /// Seed for the inquiry scheme selector of single story requests.
    pub scheme_seed: u64,
    pub llm: LlmConfig,
    pub analysis: AnalysisConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            db_path: PathBuf::from("reflective.db"),
            personas_path: None,
            bind: "127.0.0.1:8080".into(),
            reflection_workers: 4,
            scheme_seed: 7,
            llm: LlmConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

impl ServiceConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            None => ServiceConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
                toml::from_str(&text).map_err(|source| ConfigError::Parse { path: p.display().to_string(), source })?
            }
        };
        Ok(base.with_env())
    }

    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_DB_PATH) {
            self.db_path = v.into();
        }
        if let Ok(v) = std::env::var(ENV_PERSONAS) {
            self.personas_path = Some(v.into());
        }
        if let Ok(v) = std::env::var(ENV_BIND) {
            self.bind = v;
        }
        if let Some(n) = std::env::var(ENV_WORKERS).ok().and_then(|v| v.parse().ok()) {
            self.reflection_workers = n;
        }
        self.llm = self.llm.with_env();
        self
    }
}

pub fn make_client(config: &LlmConfig) -> Arc<dyn LlmClient> {
    if config.mock {
        Arc::new(MockLlm::new())
    } else {
        Arc::new(HttpLlmClient::new(config.clone()))
    }
}
