//! Remote embedding provider.

use std::time::Duration;

use engine_core::error::ProviderError;
use engine_core::grouping::{EmbeddingProvider, EmbeddingVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Posts `{"texts": [..]}` to an endpoint that answers `{"vectors": [[..]]}`,
/// one vector per text. Vectors are re-normalized on arrival.
///
/// Calls block, so the session must not be driven from an async task.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    dimension: usize,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: &str, dimension: usize, timeout: Duration) -> anyhow::Result<Self> {
        anyhow::ensure!(dimension > 0, "embedding dimension must be positive");
        let client = reqwest::blocking::Client::builder().timeout(timeout).build()?;
        Ok(Self { client, endpoint: endpoint.to_string(), dimension })
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let unavailable = |e: reqwest::Error| ProviderError::Unavailable(e.to_string());
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?;
        let body: EmbedResponse = response.json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(ProviderError::Malformed(format!(
                        "expected dimension {}, got {}",
                        self.dimension,
                        v.len()
                    )));
                }
                Ok(EmbeddingVector::from_values(v))
            })
            .collect()
    }
}
