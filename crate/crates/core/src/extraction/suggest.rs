//! Alternatives suggestion ("[option] vs" autocomplete lookups).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::ProviderError;
use crate::text::normalize_name;

pub trait AlternativesSuggester: Send + Sync {
    /// Names offered as alternatives to `name`.
    fn suggest(&self, name: &str) -> Result<Vec<String>, ProviderError>;
}

/// Suggester that knows nothing; corroboration falls back to the other tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSuggestions;

impl AlternativesSuggester for NoSuggestions {
    fn suggest(&self, _name: &str) -> Result<Vec<String>, ProviderError> {
        Ok(Vec::new())
    }
}

/// File-backed suggester: a JSON object mapping normalized names to
/// alternatives, e.g. `{ "react": ["vue", "angular"] }`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureSuggester {
    entries: BTreeMap<String, Vec<String>>,
}

impl FixtureSuggester {
    pub fn new<K: AsRef<str>, V: AsRef<str>>(entries: impl IntoIterator<Item = (K, Vec<V>)>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(k, vs)| {
                (
                    normalize_name(k.as_ref()),
                    vs.iter().map(|v| v.as_ref().to_string()).collect(),
                )
            })
            .collect();
        Self { entries }
    }

    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        Ok(Self::new(raw))
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }
}

impl AlternativesSuggester for FixtureSuggester {
    fn suggest(&self, name: &str) -> Result<Vec<String>, ProviderError> {
        Ok(self
            .entries
            .get(&normalize_name(name))
            .cloned()
            .unwrap_or_default())
    }
}
