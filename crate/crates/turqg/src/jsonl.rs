//! Line-oriented JSON files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("cannot access {path}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: String, line: usize, message: String },
}

/// Writes one compact JSON value per line and returns the line count.
pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: impl IntoIterator<Item = T>) -> io::Result<usize> {
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<usize, JsonlError> {
    let wrap = |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    write_jsonl(BufWriter::new(file), items).map_err(wrap)
}

/// Reads one value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R, origin: &str) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: origin.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let value = serde_path_to_error::deserialize(de).map_err(|e| JsonlError::Record {
            path: origin.to_owned(),
            line: i + 1,
            message: match e.path().to_string().as_str() {
                "." => e.into_inner().to_string(),
                p => format!("at {p}: {}", e.into_inner()),
            },
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}
