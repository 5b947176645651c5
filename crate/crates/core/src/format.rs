//! Fixed-precision text encoding shared by all artifact writers, plus the
//! header line that every artifact carries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::au::AuVector;
use crate::{Error, Result};

/// Decimal digits used for every serialized AU intensity.
pub const AU_DECIMALS: usize = 6;

/// Appends `v` with exactly six decimals; negative zero is written as zero.
pub fn push_fixed(out: &mut String, v: f64) {
    let v = if v == 0.0 { 0.0 } else { v };
    let _ = write!(out, "{v:.AU_DECIMALS$}");
}

pub fn push_au_vector(out: &mut String, v: &AuVector) {
    out.push('[');
    for (i, x) in v.values().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_fixed(out, *x);
    }
    out.push(']');
}

pub fn push_json_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string serialization cannot fail"));
}

/// Lowercase hex SHA-256 of the bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a value's canonical JSON encoding (struct field order).
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serialization cannot fail");
    sha256_hex(json.as_bytes())
}

/// First line of every JSON Lines artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub kind: String,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ArtifactHeader {
    pub fn new(kind: &str, config_digest: impl Into<String>, seed: u64) -> Self {
        Self {
            kind: kind.to_string(),
            tool_version: crate::TOOL_VERSION.to_string(),
            config_digest: config_digest.into(),
            seed,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("header serialization cannot fail")
    }

    /// Parses a header line, checking the artifact kind.
    pub fn parse(line: &str, expected_kind: &str) -> Result<Self> {
        let header: ArtifactHeader = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("bad {expected_kind} header: {e}")))?;
        if header.kind != expected_kind {
            return Err(Error::Format(format!(
                "expected a {expected_kind} artifact, found {:?}",
                header.kind
            )));
        }
        Ok(header)
    }
}

/// True when a JSON line is an artifact header rather than a record.
pub fn is_header_line(line: &str) -> bool {
    line.trim_start().starts_with("{\"kind\":")
}
