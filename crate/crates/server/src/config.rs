//! Service configuration: a TOML file, with the embedding endpoint
//! overridable from the environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use engine_core::extraction::FixtureSuggester;
use engine_core::grouping::{FixtureEmbedder, DEFAULT_EMBEDDING_DIMENSION};
use engine_core::session::{Providers, SessionConfig, DEFAULT_PUSH_INTERVAL_MS, DEFAULT_SNAPSHOT_EVERY};
use serde::Deserialize;

use crate::embedding::HttpEmbeddingProvider;

/// Overrides `embedding.endpoint`.
pub const EMBEDDING_ENDPOINT_ENV: &str = "ENGINE_EMBEDDING_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub port: u16,
    /// Where sessions are persisted. Sessions live only in memory when unset.
    pub data_dir: Option<PathBuf>,
    pub snapshot_every: u64,
    /// Minimum spacing of pushed ranking changes.
    pub push_interval_ms: i64,
    /// Defaults for new sessions.
    pub session: SessionConfig,
    pub embedding: EmbeddingConfig,
    pub suggester: SuggesterConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: None,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            push_interval_ms: DEFAULT_PUSH_INTERVAL_MS,
            session: SessionConfig::default(),
            embedding: EmbeddingConfig::default(),
            suggester: SuggesterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Remote provider taking `{"texts": [..]}` and answering
    /// `{"vectors": [[..]]}`. The built-in trigram embedder is used when unset.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub dimension: usize,
    /// Fixed vectors for known texts, as a JSON map from text to vector.
    pub fixture: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { endpoint: None, timeout_ms: 5_000, dimension: DEFAULT_EMBEDDING_DIMENSION, fixture: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuggesterConfig {
    /// Search-suggestion fixture, as a JSON map from query to suggestions.
    pub fixture: Option<PathBuf>,
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` and applies the environment override. Relative fixture
    /// and data paths are resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.apply_env(std::env::var(EMBEDDING_ENDPOINT_ENV).ok());
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data_dir, &mut self.embedding.fixture, &mut self.suggester.fixture].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn apply_env(&mut self, endpoint: Option<String>) {
        if let Some(e) = endpoint.filter(|e| !e.trim().is_empty()) {
            self.embedding.endpoint = Some(e);
        }
    }

    /// Builds the provider set. A remote endpoint takes precedence over an
    /// embedding fixture.
    pub fn providers(&self) -> anyhow::Result<Providers> {
        let mut providers = Providers::default();
        if let Some(path) = &self.suggester.fixture {
            providers.suggester = Arc::new(
                FixtureSuggester::from_file(path).with_context(|| format!("loading {}", path.display()))?,
            );
        }
        if let Some(endpoint) = &self.embedding.endpoint {
            let timeout = Duration::from_millis(self.embedding.timeout_ms);
            providers.embedder = Arc::new(HttpEmbeddingProvider::new(endpoint, self.embedding.dimension, timeout)?);
        } else if let Some(path) = &self.embedding.fixture {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            providers.embedder = Arc::new(FixtureEmbedder::from_json(&text)?);
        }
        Ok(providers)
    }
}
