//! Binary similarity-matrix cache.
//!
//! Layout: the 6-byte magic `SESSM1`, the matrix size as a little-endian
//! `u64`, then the row-major entries as little-endian `f64`. A JSON sidecar
//! at `<path>.meta.json` records the mixing weight and the SHA-256 of the
//! source files the matrix was built from.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sess_core::similarity::SimilarityMatrix;

const MAGIC: &[u8; 6] = b"SESSM1";

/// Provenance recorded next to a cached matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheSidecar {
    pub alpha: f64,
    /// Source name (e.g. `pool`, `embeddings`) to SHA-256 hex digest.
    pub source_hashes: std::collections::BTreeMap<String, String>,
}

pub fn sidecar_path(cache_path: &Path) -> PathBuf {
    let mut name = cache_path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_matrix(
    path: &Path,
    matrix: &SimilarityMatrix,
    sidecar: &CacheSidecar,
) -> Result<(), CacheError> {
    let n = matrix.n();
    let mut bytes = Vec::with_capacity(MAGIC.len() + 8 + n * n * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    for &entry in matrix.entries() {
        bytes.extend_from_slice(&entry.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    let meta = sidecar_path(path);
    fs::write(&meta, json + "\n").map_err(|source| CacheError::Io { path: meta, source })?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(SimilarityMatrix, Option<CacheSidecar>), CacheError> {
    let bytes = fs::read(path).map_err(|source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CacheError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let mut cursor = MAGIC.len();
    let n = u64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap()) as usize;
    cursor += 8;
    let expected =
        n.checked_mul(n)
            .and_then(|c| c.checked_mul(8))
            .ok_or(CacheError::Truncated {
                path: path.to_path_buf(),
            })?;
    if bytes.len() != cursor + expected {
        return Err(CacheError::Truncated {
            path: path.to_path_buf(),
        });
    }
    let mut entries = Vec::with_capacity(n * n);
    while cursor < bytes.len() {
        entries.push(f64::from_le_bytes(
            bytes[cursor..cursor + 8].try_into().unwrap(),
        ));
        cursor += 8;
    }
    let matrix = SimilarityMatrix::from_entries(n, entries).map_err(|err| CacheError::Invalid {
        path: path.to_path_buf(),
        message: err.to_string(),
    })?;

    let meta = sidecar_path(path);
    let sidecar = match fs::read_to_string(&meta) {
        Ok(json) => Some(
            serde_json::from_str(&json).map_err(|err| CacheError::Invalid {
                path: meta,
                message: err.to_string(),
            })?,
        ),
        Err(_) => None,
    };
    Ok((matrix, sidecar))
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a SESSM1 matrix cache")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated or inconsistent matrix cache")]
    Truncated { path: PathBuf },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}
