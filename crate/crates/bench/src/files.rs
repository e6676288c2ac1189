//! Problem files and atomic output.

use std::io::Write;
use std::path::Path;

use ameta::CompositeProblem;
use sha2::{Digest, Sha256};

use crate::error::{BenchError, BenchResult};

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> BenchResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| BenchError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| BenchError::io(path, e))?;
    tmp.persist(path).map_err(|e| BenchError::io(path, e.error))?;
    Ok(())
}

pub fn problem_bytes(problem: &CompositeProblem) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(problem).expect("problem serializes");
    bytes.push(b'\n');
    bytes
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// A loaded problem together with the hash of its file contents.
pub struct LoadedProblem {
    pub problem: CompositeProblem,
    pub hash: String,
}

pub fn read_problem(path: &Path) -> BenchResult<LoadedProblem> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    let problem: CompositeProblem =
        serde_json::from_slice(&bytes).map_err(|e| BenchError::Format { path: path.into(), msg: e.to_string() })?;
    problem.validate().map_err(ameta::Error::from)?;
    Ok(LoadedProblem { problem, hash: hash_bytes(&bytes) })
}
