//! Service configuration: TOML or JSON file, overridden by `ZESHOT_*` env vars.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendEndpoint, BackendKind, DEFAULT_TIMEOUT_MS};

use super::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            auth_token: None,
        }
    }

    pub fn endpoint(&self, kind: BackendKind) -> BackendEndpoint {
        let mut e = BackendEndpoint::new(&self.url, kind).with_timeout_ms(self.timeout_ms);
        e.auth_token = self.auth_token.clone();
        e
    }
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_listen() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_cache_capacity() -> usize {
    4096
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub bank_path: PathBuf,
    pub image_root: PathBuf,
    pub generator: EndpointConfig,
    pub embedder: EndpointConfig,
    /// Embedding cache entries; 0 disables the cache.
    #[serde(default = "default_cache_capacity")]
    pub cache_capacity: usize,
    /// Items evaluated concurrently per evaluation job.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Fail startup when a backend health check fails (otherwise warn).
    #[serde(default)]
    pub strict_health: bool,
}

impl ServiceConfig {
    pub fn from_path(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let mut config: Self = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Apply `ZESHOT_*` overrides from the given variables.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ServiceError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ServiceError> {
            value
                .parse()
                .map_err(|_| ServiceError::Config(format!("{key}={value:?} is not a valid number")))
        }
        for (key, value) in vars {
            let Some(name) = key.strip_prefix("ZESHOT_") else {
                continue;
            };
            match name {
                "LISTEN" => self.listen = value,
                "PORT" => self.port = num(&key, &value)?,
                "BANK_PATH" => self.bank_path = value.into(),
                "IMAGE_ROOT" => self.image_root = value.into(),
                "GENERATOR_URL" => self.generator.url = value,
                "EMBEDDER_URL" => self.embedder.url = value,
                "GENERATOR_TIMEOUT_MS" => self.generator.timeout_ms = num(&key, &value)?,
                "EMBEDDER_TIMEOUT_MS" => self.embedder.timeout_ms = num(&key, &value)?,
                "GENERATOR_TOKEN" => self.generator.auth_token = Some(value),
                "EMBEDDER_TOKEN" => self.embedder.auth_token = Some(value),
                "CACHE_CAPACITY" => self.cache_capacity = num(&key, &value)?,
                "PARALLELISM" => self.parallelism = num(&key, &value)?,
                "STRICT_HEALTH" => {
                    self.strict_health = matches!(value.as_str(), "1" | "true" | "yes")
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.port == 0 {
            return Err(ServiceError::Config("port must be in 1..=65535".into()));
        }
        if !self.bank_path.is_file() {
            return Err(ServiceError::Config(format!(
                "question bank {} does not exist",
                self.bank_path.display()
            )));
        }
        if !self.image_root.is_dir() {
            return Err(ServiceError::Config(format!(
                "image root {} is not a directory",
                self.image_root.display()
            )));
        }
        if self.parallelism == 0 {
            return Err(ServiceError::Config(
                "parallelism must be at least 1".into(),
            ));
        }
        for kind in [BackendKind::Generator, BackendKind::Embedder] {
            self.endpoint(kind)
                .validate()
                .map_err(ServiceError::Config)?;
        }
        Ok(())
    }

    pub fn endpoint(&self, kind: BackendKind) -> BackendEndpoint {
        match kind {
            BackendKind::Generator => self.generator.endpoint(kind),
            BackendKind::Embedder => self.embedder.endpoint(kind),
        }
    }
}
