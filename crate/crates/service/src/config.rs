use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_MAX_UPLOAD: usize = 10 * 1024 * 1024;

/// Service settings: a TOML file, then `ONTRACK_*` environment overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub store_dir: PathBuf,
    /// Origin allowed to call the API from a browser, e.g. `http://localhost:5173`.
    pub cors_origin: Option<String>,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            store_dir: PathBuf::from("ontrack-data"),
            cors_origin: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, otherwise starts from defaults, then applies
    /// the process environment.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let base = match path {
            Some(p) => Self::from_toml_str(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        base.with_env(|k| std::env::var(k).ok())
    }

    /// Applies `ONTRACK_HOST`, `ONTRACK_PORT`, `ONTRACK_STORE`,
    /// `ONTRACK_CORS_ORIGIN` and `ONTRACK_MAX_UPLOAD` from `lookup`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        if let Some(v) = lookup("ONTRACK_HOST") {
            self.host = v;
        }
        if let Some(v) = lookup("ONTRACK_PORT") {
            self.port = v
                .parse()
                .map_err(|_| anyhow::anyhow!("ONTRACK_PORT must be a port number, got {v:?}"))?;
        }
        if let Some(v) = lookup("ONTRACK_STORE") {
            self.store_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("ONTRACK_CORS_ORIGIN") {
            self.cors_origin = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = lookup("ONTRACK_MAX_UPLOAD") {
            self.max_upload_bytes = v
                .parse()
                .map_err(|_| anyhow::anyhow!("ONTRACK_MAX_UPLOAD must be a byte count, got {v:?}"))?;
        }
        Ok(self)
    }
}
