//! Run configurations, the batch runner and artifact output.

mod config;
mod run;

pub use config::{Backend, Operation, Params, RunConfig, SCHEMA_VERSION};
pub use run::{run, Manifest, RunOutcome};

use sha2::{Digest, Sha256};

/// Hex SHA-256 digest truncated to 16 characters.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}
