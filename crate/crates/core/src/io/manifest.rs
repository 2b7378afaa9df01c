//! Dataset manifests: image list, camera, mask, and provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CameraConfig, RigConfig, SceneConfig};
use super::pfm::FloatImage;
use crate::geometry::{Sign, SymmetricRig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub pair: usize,
    /// `"+"` or `"-"`.
    pub sign: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Captured,
    Rendered {
        falloff: String,
        rig: RigConfig,
        scene: SceneConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub images: Vec<ImageEntry>,
    pub camera: CameraConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Conventional file name of a light image.
pub fn light_file_name(pair: usize, sign: Sign) -> String {
    let tag = match sign {
        Sign::Plus => "p",
        Sign::Minus => "m",
    };
    format!("light_{pair}_{tag}.pfm")
}

impl Manifest {
    /// Entries for every light of a rig in light order, using conventional names.
    pub fn light_entries(n_pairs: usize) -> Vec<ImageEntry> {
        (0..n_pairs)
            .flat_map(|k| {
                [Sign::Plus, Sign::Minus].map(|s| ImageEntry {
                    path: light_file_name(k, s),
                    pair: k,
                    sign: s.tag().to_string(),
                })
            })
            .collect()
    }

    /// Loads a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest: Self = super::read_json(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in manifest.files() {
            let full = dir.join(p);
            if !full.is_file() {
                return Err(Error::io(
                    full,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file listed in manifest not found"),
                ));
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_json(path, self)
    }

    fn files(&self) -> impl Iterator<Item = &str> {
        self.images.iter().map(|e| e.path.as_str()).chain(self.mask.as_deref())
    }

    /// Checks image count, pair indices, and sign tags against a rig.
    pub fn check_rig(&self, rig: &SymmetricRig) -> Result<()> {
        if self.images.len() != rig.n_lights() {
            return Err(Error::config(
                "images",
                format!(
                    "manifest lists {} images but the rig has {} lights",
                    self.images.len(),
                    rig.n_lights()
                ),
            ));
        }
        for (i, e) in self.images.iter().enumerate() {
            let expect = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
            if e.pair != i / 2 || e.sign != expect.tag() {
                return Err(Error::config(
                    format!("images[{i}]"),
                    format!("expected pair {} sign {}, found pair {} sign {}", i / 2, expect.tag(), e.pair, e.sign),
                ));
            }
        }
        Ok(())
    }

    /// Reads the listed images, which must all match the camera size.
    pub fn read_images(&self, dir: &Path) -> Result<Vec<Vec<f64>>> {
        let (w, h) = (self.camera.width, self.camera.height);
        self.images
            .iter()
            .map(|e| {
                let im = FloatImage::read(&dir.join(&e.path))?;
                if im.width != w || im.height != h {
                    return Err(Error::Shape(format!(
                        "{} is {}x{}, camera is {w}x{h}",
                        e.path, im.width, im.height
                    )));
                }
                im.to_scalars()
            })
            .collect()
    }

    pub fn mask_path(&self, dir: &Path) -> Option<PathBuf> {
        self.mask.as_ref().map(|m| dir.join(m))
    }
}
