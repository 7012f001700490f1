pub mod eval;
pub mod interpolate;
pub mod reconstruct;
pub mod sample;
pub mod train;
pub mod verify;

use crate::errors::CliError;
use std::path::{Path, PathBuf};
use wae_core::models::checkpoint::{load_checkpoint, Checkpoint};

/// Output root: `--out`, else $WAE_LAB_OUT, else ./runs.
pub fn output_root(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("WAE_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn load_ckpt(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(load_checkpoint(path)?)
}

/// Directory alongside a checkpoint, for artifacts of read-only commands.
pub fn artifact_dir(out: &Option<PathBuf>, checkpoint: &Path) -> PathBuf {
    out.clone().unwrap_or_else(|| {
        checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    })
}
