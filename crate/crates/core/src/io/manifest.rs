use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Record of one CLI invocation. Everything that varies between identical
/// reruns (timestamps, wall time) lives here and nowhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
    /// sha256 of each artifact, in the order of `artifacts`.
    pub artifact_hashes: Vec<String>,
    pub tool_version: String,
    pub started_at: f64,
    pub finished_at: f64,
    pub wall_time: f64,
}

impl RunManifest {
    pub fn start(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        let now = unix_now();
        RunManifest {
            command: command.to_string(),
            config_hash: sha256_hex(config_bytes),
            seed,
            artifacts: Vec::new(),
            artifact_hashes: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now,
            finished_at: now,
            wall_time: 0.0,
        }
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.artifacts.push(name.to_string());
        self.artifact_hashes.push(sha256_hex(bytes));
    }

    pub fn finish(&mut self) {
        self.finished_at = unix_now();
        self.wall_time = self.finished_at - self.started_at;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
