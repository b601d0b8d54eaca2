//! Layered run configuration: command-line flags override environment
//! variables, which override the config file, which overrides built-in
//! defaults.
//!
//! The config file is a plain `key = value` document; `#` starts a comment.
//! Unknown keys and unparseable values are reported with their line number.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Result};
use serde::Serialize;

pub const ENV_PREFIX: &str = "LEADERLAB_";

/// Fully resolved run settings, with every default pinned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub temperature: f64,
    pub alignment_baseline: f64,
    pub max_items: u32,
    pub parallelism: usize,
    pub provider: String,
    pub model: String,
    pub endpoint: String,
    pub api_key_env: Option<String>,
    pub seed: u64,
    pub retries: u32,
    pub timeout_secs: u64,
    pub reasks: u32,
    pub format: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            temperature: 1.0,
            alignment_baseline: 0.25,
            max_items: 6,
            parallelism: 1,
            provider: "stub".to_string(),
            model: "stub".to_string(),
            endpoint: String::new(),
            api_key_env: None,
            seed: 0,
            retries: 3,
            timeout_secs: 60,
            reasks: 3,
            format: "csv".to_string(),
        }
    }
}

/// A partial configuration layer; `None` means "not set at this layer".
#[derive(Debug, Clone, Default)]
pub struct ConfigLayer {
    pub temperature: Option<f64>,
    pub alignment_baseline: Option<f64>,
    pub max_items: Option<u32>,
    pub parallelism: Option<usize>,
    pub provider: Option<String>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub seed: Option<u64>,
    pub retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub reasks: Option<u32>,
    pub format: Option<String>,
}

const KEYS: [&str; 13] = [
    "temperature",
    "alignment_baseline",
    "max_items",
    "parallelism",
    "provider",
    "model",
    "endpoint",
    "api_key_env",
    "seed",
    "retries",
    "timeout_secs",
    "reasks",
    "format",
];

impl ConfigLayer {
    fn set(&mut self, key: &str, value: &str, at: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str, at: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| anyhow!("{at}: invalid value for {key}: {e}"))
        }
        match key {
            "temperature" => self.temperature = Some(parse(key, value, at)?),
            "alignment_baseline" => self.alignment_baseline = Some(parse(key, value, at)?),
            "max_items" => self.max_items = Some(parse(key, value, at)?),
            "parallelism" => self.parallelism = Some(parse(key, value, at)?),
            "provider" => self.provider = Some(value.to_string()),
            "model" => self.model = Some(value.to_string()),
            "endpoint" => self.endpoint = Some(value.to_string()),
            "api_key_env" => self.api_key_env = Some(value.to_string()),
            "seed" => self.seed = Some(parse(key, value, at)?),
            "retries" => self.retries = Some(parse(key, value, at)?),
            "timeout_secs" => self.timeout_secs = Some(parse(key, value, at)?),
            "reasks" => self.reasks = Some(parse(key, value, at)?),
            "format" => self.format = Some(value.to_string()),
            other => {
                return Err(anyhow!(
                    "{at}: unknown key {other:?} (known keys: {})",
                    KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Parses a `key = value` config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
        let mut layer = ConfigLayer::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("{}:{}", path.display(), i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{at}: expected `key = value`, got {line:?}"))?;
            layer.set(key.trim(), value.trim(), &at)?;
        }
        Ok(layer)
    }

    /// Reads `LEADERLAB_<KEY>` variables from the process environment.
    pub fn from_env() -> Result<Self> {
        let vars: BTreeMap<String, String> = std::env::vars().collect();
        let mut layer = ConfigLayer::default();
        for key in KEYS {
            let name = format!("{ENV_PREFIX}{}", key.to_uppercase());
            if let Some(value) = vars.get(&name) {
                layer.set(key, value, &format!("env {name}"))?;
            }
        }
        Ok(layer)
    }

    fn over(self, under: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            temperature: self.temperature.or(under.temperature),
            alignment_baseline: self.alignment_baseline.or(under.alignment_baseline),
            max_items: self.max_items.or(under.max_items),
            parallelism: self.parallelism.or(under.parallelism),
            provider: self.provider.or(under.provider),
            model: self.model.or(under.model),
            endpoint: self.endpoint.or(under.endpoint),
            api_key_env: self.api_key_env.or(under.api_key_env),
            seed: self.seed.or(under.seed),
            retries: self.retries.or(under.retries),
            timeout_secs: self.timeout_secs.or(under.timeout_secs),
            reasks: self.reasks.or(under.reasks),
            format: self.format.or(under.format),
        }
    }
}

/// Resolves the effective configuration from (strongest first) flags,
/// environment, optional file, and defaults.
pub fn load_config(flags: ConfigLayer, file: Option<&Path>) -> Result<Config> {
    let file_layer = match file {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let merged = flags.over(ConfigLayer::from_env()?).over(file_layer);
    let d = Config::default();
    Ok(Config {
        temperature: merged.temperature.unwrap_or(d.temperature),
        alignment_baseline: merged.alignment_baseline.unwrap_or(d.alignment_baseline),
        max_items: merged.max_items.unwrap_or(d.max_items),
        parallelism: merged.parallelism.unwrap_or(d.parallelism),
        provider: merged.provider.unwrap_or(d.provider),
        model: merged.model.unwrap_or(d.model),
        endpoint: merged.endpoint.unwrap_or(d.endpoint),
        api_key_env: merged.api_key_env.or(d.api_key_env),
        seed: merged.seed.unwrap_or(d.seed),
        retries: merged.retries.unwrap_or(d.retries),
        timeout_secs: merged.timeout_secs.unwrap_or(d.timeout_secs),
        reasks: merged.reasks.unwrap_or(d.reasks),
        format: merged.format.unwrap_or(d.format),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_apply_with_no_sources() {
        let config = load_config(ConfigLayer::default(), None).unwrap();
        assert_eq!(config.temperature, 1.0);
        assert_eq!(config.alignment_baseline, 0.25);
        assert_eq!(config.max_items, 6);
        assert_eq!(config.provider, "stub");
    }

    #[test]
    fn flags_override_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# run settings\ntemperature = 0.7\nseed = 42").unwrap();
        let flags = ConfigLayer {
            temperature: Some(1.0),
            ..ConfigLayer::default()
        };
        let config = load_config(flags, Some(file.path())).unwrap();
        assert_eq!(config.temperature, 1.0);
        assert_eq!(config.seed, 42);
    }

    #[test]
    fn malformed_file_reports_line() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "temperature = 1.0\nnot a pair").unwrap();
        let err = load_config(ConfigLayer::default(), Some(file.path())).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn unknown_key_reports_key_and_line() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "temprature = 1.0").unwrap();
        let err = load_config(ConfigLayer::default(), Some(file.path())).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("temprature") && msg.contains(":1"), "{msg}");
    }

    #[test]
    fn bad_value_reports_field() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "seed = not-a-number").unwrap();
        let err = load_config(ConfigLayer::default(), Some(file.path())).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }
}
