use std::path::{Path, PathBuf};

use anyhow::Context;
use legiscout_core::extract::ExtractParams;
use legiscout_core::layout::LayoutParams;
use legiscout_core::search::{DEFAULT_MAX_TOKENS, DEFAULT_OVERLAP_TOKENS, HASH_NGRAM_ID};
use legiscout_server::ServerConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "LEGISCOUT_CONFIG";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chunking {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for Chunking {
    fn default() -> Self {
        Chunking {
            max_tokens: DEFAULT_MAX_TOKENS,
            overlap_tokens: DEFAULT_OVERLAP_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub k: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { k: 10 }
    }
}

/// File-backed settings. Command-line flags override the matching field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub format: Format,
    pub lenient: bool,
    pub embedder: String,
    pub layout: LayoutParams,
    pub chunking: Chunking,
    pub search: SearchSettings,
    pub extract: ExtractParams,
    pub server: ServerConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            format: Format::Text,
            lenient: false,
            embedder: HASH_NGRAM_ID.into(),
            layout: LayoutParams::default(),
            chunking: Chunking::default(),
            search: SearchSettings::default(),
            extract: ExtractParams::default(),
            server: ServerConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads `explicit`, else the file named by `LEGISCOUT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>, lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let path: Option<PathBuf> = explicit
            .map(Path::to_path_buf)
            .or_else(|| lookup(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}
