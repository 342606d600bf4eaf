//! Provenance headers and the JSON envelope around saved models and states.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bumped when the envelope layout changes.
pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("artifact I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact holds a {found:?}, expected a {expected:?}")]
    Kind { expected: String, found: String },
    #[error("artifact envelope version {0} is not supported")]
    Version(u32),
}

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self { toolkit_version: TOOLKIT_VERSION.to_string(), config_hash, seed }
    }

    /// Text placed after `# ` on the first line of every output file.
    pub fn header(&self) -> String {
        format!("amrbench {} config_hash={} seed={}", self.toolkit_version, self.config_hash, self.seed)
    }
}

/// SHA-256 of the value's JSON form, as lowercase hex.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, ArtifactError> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    pub envelope_version: u32,
    /// What `body` is, e.g. "model" or "pipeline_state".
    pub kind: String,
    pub header: String,
    pub provenance: Provenance,
    pub body: B,
}

impl<B: Serialize + DeserializeOwned> Envelope<B> {
    pub fn new(kind: &str, provenance: &Provenance, body: B) -> Self {
        Self {
            envelope_version: ENVELOPE_VERSION,
            kind: kind.to_string(),
            header: provenance.header(),
            provenance: provenance.clone(),
            body,
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), ArtifactError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R, kind: &str) -> Result<Self, ArtifactError> {
        let env: Self = serde_json::from_reader(r)?;
        if env.envelope_version != ENVELOPE_VERSION {
            return Err(ArtifactError::Version(env.envelope_version));
        }
        if env.kind != kind {
            return Err(ArtifactError::Kind { expected: kind.to_string(), found: env.kind });
        }
        Ok(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&[1, 2, 3]).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&[1, 2, 3]).unwrap());
        assert_ne!(a, config_hash(&[1, 2, 4]).unwrap());
    }

    #[test]
    fn envelope_round_trip() {
        let p = Provenance::new("abc".into(), 7);
        assert_eq!(p.header(), format!("amrbench {TOOLKIT_VERSION} config_hash=abc seed=7"));
        let env = Envelope::new("model", &p, vec![0.5f64, 1.0]);
        let mut buf = Vec::new();
        env.write_json(&mut buf).unwrap();
        assert_eq!(Envelope::<Vec<f64>>::read_json(&buf[..], "model").unwrap(), env);
        assert!(matches!(Envelope::<Vec<f64>>::read_json(&buf[..], "pipeline_state"), Err(ArtifactError::Kind { .. })));
    }
}
