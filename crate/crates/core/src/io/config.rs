//! JSON configuration documents for rigs, cameras, and synthetic scenes.

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, OffsetMode, SymmetricPair, SymmetricRig, Vec3};
use crate::render::{NoiseModel, Scene};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub radius_ratio: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetModeConfig {
    None,
    Z,
    Xyz,
}

impl From<OffsetModeConfig> for OffsetMode {
    fn from(m: OffsetModeConfig) -> Self {
        match m {
            OffsetModeConfig::None => OffsetMode::None,
            OffsetModeConfig::Z => OffsetMode::ZOnly,
            OffsetModeConfig::Xyz => OffsetMode::Xyz,
        }
    }
}

impl From<OffsetMode> for OffsetModeConfig {
    fn from(m: OffsetMode) -> Self {
        match m {
            OffsetMode::None => OffsetModeConfig::None,
            OffsetMode::ZOnly => OffsetModeConfig::Z,
            OffsetMode::Xyz => OffsetModeConfig::Xyz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub pairs: Vec<PairConfig>,
    pub offset_mode: OffsetModeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute_radius: Option<f64>,
    /// Only the renderer and the oracle use this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_truth: Option<[f64; 3]>,
}

impl RigConfig {
    pub fn to_rig(&self) -> Result<SymmetricRig> {
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                SymmetricPair::from_degrees(p.radius_ratio, p.angle_deg)
                    .map_err(|e| Error::config(format!("pairs[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rig = SymmetricRig::new(pairs, self.offset_mode.into())
            .map_err(|e| Error::config("pairs", e.to_string()))?;
        if let Some(r) = self.absolute_radius {
            rig = rig
                .with_absolute_radius(r)
                .map_err(|e| Error::config("absolute_radius", e.to_string()))?;
        }
        if let Some(o) = self.offset_truth {
            if o.iter().any(|c| !c.is_finite()) {
                return Err(Error::config("offset_truth", "components must be finite"));
            }
            rig = rig.with_offset_truth(Vec3::from(o));
        }
        Ok(rig)
    }

    pub fn from_rig(rig: &SymmetricRig) -> Self {
        Self {
            pairs: rig
                .pairs()
                .iter()
                .map(|p| PairConfig {
                    radius_ratio: p.radius_ratio,
                    angle_deg: p.angle.to_degrees(),
                })
                .collect(),
            offset_mode: rig.offset_mode.into(),
            absolute_radius: rig.absolute_radius,
            offset_truth: rig.offset_truth.map(|o| [o.x, o.y, o.z]),
        }
    }

    /// Parses and validates in one step.
    pub fn parse(text: &str) -> Result<SymmetricRig> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::config("rig", e.to_string()))?;
        config.to_rig()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraConfig {
    pub fn to_camera(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            .map_err(|e| Error::config("camera", e.to_string()))
    }

    pub fn from_camera(c: &CameraIntrinsics) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeConfig {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Plane through `[0, 0, depth]`; the normal defaults to facing the camera.
    Plane {
        depth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normal: Option<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub full_scale: f64,
    #[serde(default)]
    pub shot: f64,
    #[serde(default)]
    pub read_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub shape: ShapeConfig,
    #[serde(default = "unit_albedo")]
    pub albedo: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

fn unit_albedo() -> f64 {
    1.0
}

impl SceneConfig {
    pub fn to_scene(&self) -> Result<Scene> {
        let scene = match &self.shape {
            ShapeConfig::Sphere { center, radius } => Scene::sphere(Vec3::from(*center), *radius, self.albedo),
            ShapeConfig::Plane { depth, normal } => Scene::plane(
                *depth,
                normal.map(Vec3::from).unwrap_or_else(|| Vec3::new(0.0, 0.0, -1.0)),
                self.albedo,
            ),
        };
        scene.map_err(|e| Error::config("shape", e.to_string()))
    }

    pub fn noise_model(&self) -> Option<NoiseModel> {
        self.noise.as_ref().map(|n| NoiseModel {
            full_scale: n.full_scale,
            shot: n.shot,
            read_sigma: n.read_sigma,
            bits: n.bits,
            seed: n.seed,
        })
    }
}
