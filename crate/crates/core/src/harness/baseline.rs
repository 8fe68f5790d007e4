//! Frozen fitted constants.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::FittedConstants;
use crate::error::Result;

const BUILTIN: &str = include_str!("../../baseline.json");

/// Constants fitted on the calibration seeds, keyed by bound name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub version: u32,
    pub calibration_seeds: Vec<u64>,
    pub constants: FittedConstants,
}

impl Baseline {
    /// The checked-in baseline.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("checked-in baseline parses")
    }

    /// No constants: every bound passes and only records its fit.
    pub fn empty() -> Self {
        Baseline::default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.0.get(name).copied()
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
