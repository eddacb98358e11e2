//! Dataset manifest and download cache.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use turqg_core::corpus::Split;

use crate::client::{is_transient_status, RetryPolicy};

/// Environment variable naming the dataset cache directory.
pub const CACHE_ENV: &str = "TURQG_CACHE_DIR";

pub const BUILTIN_MANIFEST: &str = include_str!("../data/datasets.json");

const MAX_DOWNLOAD: u64 = 1 << 30;

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {dataset:?} has no {split} split")]
    UnknownSplit { dataset: String, split: Split },
    #[error("network failure fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("{url} answered HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("digest mismatch for {path}: expected {expected}, got {actual}")]
    Integrity {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("cache I/O on {path}")]
    Io { path: String, source: std::io::Error },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        match self {
            FetchError::Network { .. } => true,
            FetchError::Status { status, .. } => is_transient_status(*status),
            _ => false,
        }
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, FetchError::UnknownDataset(_) | FetchError::UnknownSplit { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSource {
    pub url: String,
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub license: String,
    pub splits: BTreeMap<Split, SplitSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub datasets: BTreeMap<String, DatasetEntry>,
}

impl Manifest {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_MANIFEST).expect("builtin manifest parses")
    }

    pub fn parse(json: &str) -> Result<Self, FetchError> {
        let de = &mut serde_json::Deserializer::from_str(json);
        serde_path_to_error::deserialize(de).map_err(|e| FetchError::Manifest(format!("{}: {}", e.path(), e.inner())))
    }

    pub fn load(path: &Path) -> Result<Self, FetchError> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    pub fn source(&self, name: &str, split: Split) -> Result<&SplitSource, FetchError> {
        let entry = self
            .datasets
            .get(name)
            .ok_or_else(|| FetchError::UnknownDataset(name.to_owned()))?;
        entry.splits.get(&split).ok_or_else(|| FetchError::UnknownSplit {
            dataset: name.to_owned(),
            split,
        })
    }
}

/// Cache directory from [`CACHE_ENV`], else `$XDG_CACHE_HOME/turqg`, else
/// `$HOME/.cache/turqg`, else `.turqg-cache`.
pub fn default_cache_dir() -> PathBuf {
    let env = |k| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    env(CACHE_ENV)
        .or_else(|| env("XDG_CACHE_HOME").map(|p| p.join("turqg")))
        .or_else(|| env("HOME").map(|p| p.join(".cache").join("turqg")))
        .unwrap_or_else(|| PathBuf::from(".turqg-cache"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Downloads datasets into a cache directory.
#[derive(Debug, Clone)]
pub struct Fetcher {
    agent: ureq::Agent,
    policy: RetryPolicy,
}

impl Default for Fetcher {
    fn default() -> Self {
        Self::new(Duration::from_secs(300), RetryPolicy::default())
    }
}

impl Fetcher {
    pub fn new(timeout: Duration, policy: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            policy,
        }
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        if let Some(local) = url.strip_prefix("file://") {
            let path = Path::new(local);
            return fs::read(path).map_err(io_err(path));
        }
        self.policy.run(
            |_| {
                log::info!("downloading {url}");
                let resp = self.agent.get(url).call().map_err(|e| FetchError::Network {
                    url: url.to_owned(),
                    message: e.to_string(),
                })?;
                let status = resp.status().as_u16();
                if !(200..300).contains(&status) {
                    return Err(FetchError::Status {
                        url: url.to_owned(),
                        status,
                    });
                }
                resp.into_body()
                    .with_config()
                    .limit(MAX_DOWNLOAD)
                    .read_to_vec()
                    .map_err(|e| FetchError::Network {
                        url: url.to_owned(),
                        message: e.to_string(),
                    })
            },
            FetchError::is_retryable,
        )
    }

    /// Returns the path of the cached raw JSON for `name`/`split`,
    /// downloading it first unless a cached copy with a matching digest
    /// exists. Without a pinned digest in the manifest, the digest recorded
    /// next to the cached file at download time is used.
    pub fn fetch(&self, manifest: &Manifest, name: &str, split: Split, cache_dir: &Path) -> Result<PathBuf, FetchError> {
        let source = manifest.source(name, split)?;
        let dir = cache_dir.join(name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(format!("{split}.json"));
        let sidecar = dir.join(format!("{split}.json.sha256"));
        let lock_path = dir.join(format!("{split}.json.lock"));

        let lock = File::create(&lock_path).map_err(io_err(&lock_path))?;
        lock.lock().map_err(io_err(&lock_path))?;

        let pinned = source.sha256.as_deref().map(str::to_ascii_lowercase);
        if let Ok(cached) = fs::read(&path) {
            let actual = sha256_hex(&cached);
            let expected = pinned
                .clone()
                .or_else(|| fs::read_to_string(&sidecar).ok().map(|s| s.trim().to_owned()));
            if expected.as_deref() == Some(actual.as_str()) {
                log::debug!("cache hit {}", path.display());
                return Ok(path);
            }
            log::warn!("cached {} does not match its digest, refetching", path.display());
        }

        let bytes = self.download(&source.url)?;
        let actual = sha256_hex(&bytes);
        if let Some(expected) = pinned {
            if expected != actual {
                return Err(FetchError::Integrity {
                    path: source.url.clone(),
                    expected,
                    actual,
                });
            }
        }
        let tmp = dir.join(format!("{split}.json.part"));
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        fs::write(&sidecar, format!("{actual}\n")).map_err(io_err(&sidecar))?;
        Ok(path)
    }
}

/// [`Fetcher::fetch`] with default timeouts and retries.
pub fn fetch_dataset(manifest: &Manifest, name: &str, split: Split, cache_dir: &Path) -> Result<PathBuf, FetchError> {
    Fetcher::default().fetch(manifest, name, split, cache_dir)
}
