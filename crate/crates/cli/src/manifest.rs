//! Run manifest: identity, config hash, provenance, and directory layout,
//! written before training starts.

use crate::errors::CliError;
use sha2::{Digest, Sha256};
use std::path::Path;
use wae_core::models::config::RunConfig;

pub fn config_hash(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_toml().as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic run identifier: the leading 12 hex chars of the config
/// hash (a rerun of the same config is the same run).
pub fn run_id(cfg: &RunConfig) -> String {
    config_hash(cfg)[..12].to_string()
}

pub const CONFIG_FILE: &str = "config.toml";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MANIFEST_FILE: &str = "manifest.toml";

pub fn write_manifest(
    run_dir: &Path,
    cfg: &RunConfig,
    dataset_provenance: &str,
) -> Result<(), CliError> {
    std::fs::create_dir_all(run_dir)
        .map_err(|e| CliError::io("creating run directory", e))?;
    let id = run_id(cfg);
    let hash = config_hash(cfg);
    let manifest = format!(
        "run_id = \"{id}\"\n\
         config_hash = \"sha256:{hash}\"\n\
         dataset_provenance = \"{dataset_provenance}\"\n\
         \n\
         [layout]\n\
         config = \"{CONFIG_FILE}\"\n\
         trace = \"{TRACE_FILE}\"\n\
         metrics = \"{METRICS_FILE}\"\n\
         checkpoint = \"{CHECKPOINT_FILE}\"\n"
    );
    std::fs::write(run_dir.join(MANIFEST_FILE), manifest)
        .map_err(|e| CliError::io("writing manifest", e))?;
    std::fs::write(run_dir.join(CONFIG_FILE), cfg.to_toml())
        .map_err(|e| CliError::io("writing config snapshot", e))?;
    Ok(())
}
