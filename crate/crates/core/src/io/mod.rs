//! File formats: PFM float images, JSON configs, and dataset manifests.

pub mod config;
pub mod manifest;
pub mod pfm;

pub use config::{CameraConfig, RigConfig, SceneConfig};
pub use manifest::{ImageEntry, Manifest, Provenance};
pub use pfm::FloatImage;

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::{Error, Result};

/// Reads and parses a JSON file. Parse failures become [`Error::Config`]
/// naming the file, with serde's message (which names the offending key).
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
