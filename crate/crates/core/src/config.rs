//! Run configuration, loadable from a TOML file.
//!
//! ```toml
//! window_lines = 3
//! max_file_bytes = 1048576
//! max_iterations = 4
//! levels = "123"
//! redact = false
//!
//! [min_entropy]          # keyed by secret type or rule name
//! OpenAI = 3.5
//!
//! [rules]                # rule name -> enabled
//! credentialed_uri = false
//!
//! [aliases]              # external detector name -> secret type
//! Github = "GitHub"
//!
//! [backend]
//! kind = "http"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4o-2024-08-06"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Level;

pub const DEFAULT_MAX_FILE_BYTES: u64 = 1024 * 1024;

/// Which verification levels the orchestrator may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum LevelSet {
    Intrinsic,
    IntrinsicContext,
    #[default]
    All,
}

impl LevelSet {
    pub fn allows(self, level: Level) -> bool {
        match self {
            LevelSet::Intrinsic => level == Level::Intrinsic,
            LevelSet::IntrinsicContext => level != Level::Reference,
            LevelSet::All => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LevelSet::Intrinsic => "1",
            LevelSet::IntrinsicContext => "12",
            LevelSet::All => "123",
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LevelSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(LevelSet::Intrinsic),
            "12" => Ok(LevelSet::IntrinsicContext),
            "123" => Ok(LevelSet::All),
            other => Err(format!("levels must be 1, 12 or 123, got `{other}`")),
        }
    }
}

impl TryFrom<String> for LevelSet {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LevelSet> for String {
    fn from(l: LevelSet) -> String {
        l.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    #[default]
    Deterministic,
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: f64,
    pub retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: "gpt-4o-2024-08-06".to_string(),
            timeout_secs: 60.0,
            retries: 3,
            backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Lines of context captured on each side of a match.
    pub window_lines: usize,
    /// Byte cap on each side of the context window.
    pub max_context_bytes: usize,
    pub max_file_bytes: u64,
    /// Entropy threshold overrides, keyed by secret type or rule name.
    pub min_entropy: BTreeMap<String, f64>,
    /// Rule toggles keyed by rule name.
    pub rules: BTreeMap<String, bool>,
    /// Extra detector-name aliases for ingested findings.
    pub aliases: BTreeMap<String, String>,
    pub backend: BackendConfig,
    pub max_iterations: usize,
    pub levels: LevelSet,
    pub redact: bool,
    pub price_table: Option<PathBuf>,
    /// Worker threads; `None` uses every logical CPU.
    pub jobs: Option<usize>,
    /// Replacement readability word list.
    pub lexicon: Option<PathBuf>,
    /// Replacement placeholder word list.
    pub placeholder_lexicon: Option<PathBuf>,
    /// Keywords marking a reference site as test or demo usage.
    pub site_keywords: Vec<String>,
    /// Shortest file stem used as a reference token.
    pub min_stem_len: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            window_lines: 3,
            max_context_bytes: 2048,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            min_entropy: BTreeMap::new(),
            rules: BTreeMap::new(),
            aliases: BTreeMap::new(),
            backend: BackendConfig::Deterministic,
            max_iterations: 4,
            levels: LevelSet::All,
            redact: false,
            price_table: None,
            jobs: None,
            lexicon: None,
            placeholder_lexicon: None,
            site_keywords: crate::advanced_check::DEFAULT_SITE_KEYWORDS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            min_stem_len: 3,
        }
    }
}

impl ScanConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScanConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window_lines", self.window_lines as u64),
            ("max_context_bytes", self.max_context_bytes as u64),
            ("max_file_bytes", self.max_file_bytes),
            ("max_iterations", self.max_iterations as u64),
            ("min_stem_len", self.min_stem_len as u64),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for (key, v) in &self.min_entropy {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Config(format!(
                    "min_entropy.{key} must be a non-negative number"
                )));
            }
        }
        if let BackendConfig::Http(http) = &self.backend {
            if http.endpoint.trim().is_empty() {
                return Err(Error::Config("backend kind http requires an endpoint".into()));
            }
            if !(http.timeout_secs.is_finite() && http.timeout_secs > 0.0) {
                return Err(Error::Config("backend.timeout_secs must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScanConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_documented_keys() {
        let cfg = ScanConfig::from_toml_str(
            r#"
            window_lines = 2
            max_iterations = 6
            levels = "12"
            redact = true
            [min_entropy]
            OpenAI = 3.5
            [rules]
            credentialed_uri = false
            [aliases]
            Github = "GitHub"
            [backend]
            kind = "http"
            endpoint = "http://127.0.0.1:9/v1/chat/completions"
            retries = 1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.window_lines, 2);
        assert_eq!(cfg.levels, LevelSet::IntrinsicContext);
        assert_eq!(cfg.min_entropy["OpenAI"], 3.5);
        assert!(!cfg.rules["credentialed_uri"]);
        match cfg.backend {
            BackendConfig::Http(h) => {
                assert_eq!(h.retries, 1);
                assert_eq!(h.model, "gpt-4o-2024-08-06");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScanConfig::from_toml_str("window_lines = 0").is_err());
        assert!(ScanConfig::from_toml_str("[backend]\nkind = \"http\"").is_err());
        assert!(ScanConfig::from_toml_str("levels = \"2\"").is_err());
        assert!(ScanConfig::from_toml_str("bogus = 1").is_err());
        assert!(ScanConfig::from_toml_str("[min_entropy]\nAWS = -1.0").is_err());
    }
}
