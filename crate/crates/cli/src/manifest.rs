use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Experiment;

/// What was run, with what, and what came out. Timestamps are unix seconds.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub version: &'static str,
    pub started: u64,
    pub finished: u64,
    pub status: String,
    pub error: Option<String>,
    pub violations: Vec<String>,
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Manifest {
    pub fn start(experiment: Experiment) -> Manifest {
        Manifest {
            experiment,
            config_sha256: None,
            seed: 0,
            version: env!("CARGO_PKG_VERSION"),
            started: now(),
            finished: 0,
            status: "running".into(),
            error: None,
            violations: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set_config(&mut self, bytes: &[u8]) {
        self.config_sha256 = Some(hex::encode(Sha256::digest(bytes)));
    }

    pub fn finish(&mut self) {
        self.finished = now();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
