use std::path::{Path, PathBuf};

use legiscout_core::layout::LayoutParams;
use legiscout_core::search::{DEFAULT_MAX_TOKENS, DEFAULT_OVERLAP_TOKENS, HASH_NGRAM_ID};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("environment variable {var}={value:?} is not valid: {reason}")]
    Env { var: String, value: String, reason: String },
}

/// Server settings. Every field can come from a TOML file and most from
/// `LEGISCOUT_*` environment variables, which win over the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub bundle: Option<PathBuf>,
    /// Overrides the bundle's documents directory.
    pub documents_dir: Option<PathBuf>,
    /// Static UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// `hash-ngram-v1` or the URL of an embedding service.
    pub embedder: String,
    pub max_views: usize,
    /// Background layout cadence; 0 disables the ticker.
    pub tick_interval_ms: u64,
    pub steps_per_tick: u32,
    pub chunk_max_tokens: usize,
    pub chunk_overlap_tokens: usize,
    /// Cluster by this tag key instead of the bundle's grouping file.
    pub cluster_tag: Option<String>,
    pub lenient: bool,
    pub layout: LayoutParams,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            bundle: None,
            documents_dir: None,
            ui_dir: None,
            embedder: HASH_NGRAM_ID.into(),
            max_views: 32,
            tick_interval_ms: 100,
            steps_per_tick: 5,
            chunk_max_tokens: DEFAULT_MAX_TOKENS,
            chunk_overlap_tokens: DEFAULT_OVERLAP_TOKENS,
            cluster_tag: None,
            lenient: false,
            layout: LayoutParams::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env {
        var: var.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl ServerConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Applies `LEGISCOUT_*` overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |name: &str| lookup(name).filter(|v| !v.is_empty()).map(|v| (name.to_string(), v));
        if let Some((_, v)) = get("LEGISCOUT_HOST") {
            self.host = v;
        }
        if let Some((k, v)) = get("LEGISCOUT_PORT") {
            self.port = parse_env(&k, &v)?;
        }
        if let Some((_, v)) = get("LEGISCOUT_BUNDLE") {
            self.bundle = Some(v.into());
        }
        if let Some((_, v)) = get("LEGISCOUT_DOCUMENTS_DIR") {
            self.documents_dir = Some(v.into());
        }
        if let Some((_, v)) = get("LEGISCOUT_UI_DIR") {
            self.ui_dir = Some(v.into());
        }
        if let Some((_, v)) = get("LEGISCOUT_EMBEDDER") {
            self.embedder = v;
        }
        if let Some((k, v)) = get("LEGISCOUT_MAX_VIEWS") {
            self.max_views = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("LEGISCOUT_TICK_MS") {
            self.tick_interval_ms = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("LEGISCOUT_SEED") {
            self.layout.seed = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("LEGISCOUT_K") {
            self.layout.ideal_edge_length = parse_env(&k, &v)?;
        }
        Ok(())
    }

    pub fn with_env(mut self) -> Result<Self, ConfigError> {
        self.apply_env(|k| std::env::var(k).ok())?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn file_then_env() {
        let text = "port = 9000\nembedder = \"http://localhost:7000/embed\"\n[layout]\nseed = 4\n";
        let mut c = ServerConfig::from_toml_str(text, Path::new("x.toml")).unwrap();
        assert_eq!((c.port, c.layout.seed), (9000, 4));
        let env: HashMap<&str, &str> = [("LEGISCOUT_PORT", "9100"), ("LEGISCOUT_SEED", "7")].into();
        c.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!((c.port, c.layout.seed), (9100, 7));
        assert_eq!(c.embedder, "http://localhost:7000/embed");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ServerConfig::from_toml_str("prot = 1", Path::new("x")), Err(ConfigError::Parse { .. })));
        let mut c = ServerConfig::default();
        let err = c.apply_env(|k| (k == "LEGISCOUT_PORT").then(|| "eighty".to_string())).unwrap_err();
        assert!(matches!(err, ConfigError::Env { .. }));
    }
}
