//! Run configuration: built-in defaults, then a TOML file, then flags.
//!
//! ```toml
//! dataset = "tquad2"        # tquad1 | tquad2 | xquad.tr
//! split = "val"             # train | val
//! tasks = "qa,qg,ae"
//! qg_format = "both"        # prepend | highlight | both
//! seed = 42
//! backend = "http://127.0.0.1:8331"
//! cache_dir = "/var/cache/turqg"
//! manifest = "datasets.json"
//! rules = "rules.tsv"
//! jobs = 4
//! batch_size = 8
//! max_new_tokens = 64
//! log_level = "info"        # off | error | warn | info | debug | trace
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::LevelFilter;
use serde::Deserialize;
use turqg_core::corpus::Split;
use turqg_core::format::{QgFormat, TaskSet};

use crate::client::BACKEND_ENV;
use crate::fetch::default_cache_dir;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BACKEND: &str = "http://127.0.0.1:8331";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Syntax { path: String, message: String },
    #[error("invalid {key} {value:?}: {message}")]
    Invalid { key: &'static str, value: String, message: String },
}

/// Keys accepted in a config file. All optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<String>,
    pub split: Option<String>,
    pub tasks: Option<String>,
    pub qg_format: Option<String>,
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_new_tokens: Option<u32>,
    pub log_level: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: origin.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Fields of `other` that are set replace those of `self`.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            dataset: other.dataset.or(self.dataset),
            split: other.split.or(self.split),
            tasks: other.tasks.or(self.tasks),
            qg_format: other.qg_format.or(self.qg_format),
            seed: other.seed.or(self.seed),
            backend: other.backend.or(self.backend),
            cache_dir: other.cache_dir.or(self.cache_dir),
            manifest: other.manifest.or(self.manifest),
            rules: other.rules.or(self.rules),
            jobs: other.jobs.or(self.jobs),
            batch_size: other.batch_size.or(self.batch_size),
            max_new_tokens: other.max_new_tokens.or(self.max_new_tokens),
            log_level: other.log_level.or(self.log_level),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<String>,
    pub split: Split,
    pub tasks: TaskSet,
    pub qg_format: QgFormat,
    pub seed: u64,
    pub backend: String,
    pub cache_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub jobs: usize,
    pub batch_size: usize,
    pub max_new_tokens: u32,
    pub log_level: LevelFilter,
}

fn parse<T: FromStr>(key: &'static str, value: Option<String>, default: T) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match value {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
            key,
            value: v,
            message: e.to_string(),
        }),
    }
}

fn positive(key: &'static str, value: Option<usize>, default: usize) -> Result<usize, ConfigError> {
    match value {
        Some(0) => Err(ConfigError::Invalid {
            key,
            value: "0".into(),
            message: "must be at least 1".into(),
        }),
        v => Ok(v.unwrap_or(default)),
    }
}

impl RunConfig {
    /// Resolves `file` overlaid with `flags` against built-in defaults. The
    /// backend endpoint environment variable sits between file and flags.
    pub fn resolve(file: FileConfig, flags: FileConfig) -> Result<Self, ConfigError> {
        let env = FileConfig {
            backend: std::env::var(BACKEND_ENV).ok().filter(|v| !v.trim().is_empty()),
            ..FileConfig::default()
        };
        let c = file.overlay(env).overlay(flags);
        let max_new_tokens = positive("max_new_tokens", c.max_new_tokens.map(|v| v as usize), 64)? as u32;
        Ok(Self {
            dataset: c.dataset,
            split: parse("split", c.split, Split::Val)?,
            tasks: parse("tasks", c.tasks, TaskSet::all())?,
            qg_format: parse("qg_format", c.qg_format, QgFormat::Both)?,
            seed: c.seed.unwrap_or(DEFAULT_SEED),
            backend: c.backend.unwrap_or_else(|| DEFAULT_BACKEND.into()),
            cache_dir: c.cache_dir.unwrap_or_else(default_cache_dir),
            manifest: c.manifest,
            rules: c.rules,
            jobs: positive("jobs", c.jobs, 4)?,
            batch_size: positive("batch_size", c.batch_size, 8)?,
            max_new_tokens,
            log_level: parse("log_level", c.log_level, LevelFilter::Warn)?,
        })
    }
}
