//! Light rigs, cameras, and arrangement solvability.
//!
//! A rig is a set of point-symmetric light pairs lying on a plane parallel to
//! the image plane. Pair `k` places two lights at
//! `offset ± radius_ratio_k * r * [sin angle_k, cos angle_k, 0]`, where `r` is
//! the first pair's radius. Only the ratios and angles are needed to solve;
//! `r` and the offset are required only for rendering and for metric output.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Angles closer than this (mod π) are treated as parallel.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Default `|sin(θ − φ)|` below which two basis pairs are rejected.
pub const BASIS_TOL: f64 = 1e-9;

/// Diagnostic used whenever surface position cannot be recovered because every
/// pair shares one radius.
pub const DISTINCT_RADII_REQUIRED: &str =
    "at least two pairs with different radii must exist for surface position estimation";

/// Which light of a symmetric pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricPair {
    /// Radius in units of the first pair's radius.
    pub radius_ratio: f64,
    /// Radians in `[0, 2π)`, measured from the +y axis toward +x.
    pub angle: f64,
}

impl SymmetricPair {
    pub fn new(radius_ratio: f64, angle: f64) -> Result<Self> {
        if !(radius_ratio > 0.0 && radius_ratio.is_finite()) {
            return Err(Error::InvalidRig(format!(
                "radius_ratio must be positive, got {radius_ratio}"
            )));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidRig("angle must be finite".into()));
        }
        Ok(Self {
            radius_ratio,
            angle: angle.rem_euclid(2.0 * PI),
        })
    }

    pub fn from_degrees(radius_ratio: f64, angle_deg: f64) -> Result<Self> {
        Self::new(radius_ratio, angle_deg.to_radians())
    }

    /// `radius_ratio * [sin angle, cos angle]`.
    pub fn planar(&self) -> [f64; 2] {
        [
            self.radius_ratio * self.angle.sin(),
            self.radius_ratio * self.angle.cos(),
        ]
    }

    /// Position of the `+` light relative to the rig center, in units of `r`.
    pub fn relative(&self) -> Vec3 {
        let [x, y] = self.planar();
        Vec3::new(x, y, 0.0)
    }
}

/// Assumed structure of the rig's global offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OffsetMode {
    /// The rig is centered on the camera.
    None,
    /// Offset only along the optical axis.
    ZOnly,
    /// Arbitrary offset.
    Xyz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricRig {
    pairs: Vec<SymmetricPair>,
    pub offset_mode: OffsetMode,
    /// Radius of the first pair in scene units, when known.
    pub absolute_radius: Option<f64>,
    /// True rig offset in scene units. Only the renderer and the oracle read it.
    pub offset_truth: Option<Vec3>,
}

impl SymmetricRig {
    pub fn new(pairs: Vec<SymmetricPair>, offset_mode: OffsetMode) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::InvalidRig(format!(
                "need at least 2 pairs, got {}",
                pairs.len()
            )));
        }
        if (pairs[0].radius_ratio - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidRig(format!(
                "the first pair's radius_ratio must be 1, got {}",
                pairs[0].radius_ratio
            )));
        }
        Ok(Self {
            pairs,
            offset_mode,
            absolute_radius: None,
            offset_truth: None,
        })
    }

    /// Convenience constructor from `(radius_ratio, angle_deg)` tuples.
    pub fn from_degrees(pairs: &[(f64, f64)], offset_mode: OffsetMode) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|&(ratio, deg)| SymmetricPair::from_degrees(ratio, deg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs, offset_mode)
    }

    pub fn with_absolute_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidRig(format!(
                "absolute_radius must be positive, got {radius}"
            )));
        }
        self.absolute_radius = Some(radius);
        Ok(self)
    }

    pub fn with_offset_truth(mut self, offset: Vec3) -> Self {
        self.offset_truth = Some(offset);
        self
    }

    pub fn pairs(&self) -> &[SymmetricPair] {
        &self.pairs
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_lights(&self) -> usize {
        2 * self.pairs.len()
    }

    /// True when every pair angle agrees modulo π, i.e. all lights lie on one line.
    pub fn is_collinear(&self) -> bool {
        let base = self.pairs[0].angle;
        self.pairs
            .iter()
            .all(|p| angles_parallel(p.angle, base, COLLINEAR_TOL))
    }

    pub fn has_distinct_radii(&self) -> bool {
        let first = self.pairs[0].radius_ratio;
        self.pairs.iter().any(|p| p.radius_ratio != first)
    }

    /// Light positions relative to the rig center in units of `r`, ordered
    /// `(pair 0 +, pair 0 −, pair 1 +, …)`.
    pub fn relative_positions(&self) -> Vec<Vec3> {
        self.pairs
            .iter()
            .flat_map(|p| [p.relative(), -p.relative()])
            .collect()
    }

    /// Metric light positions in the camera frame, same order as
    /// [`relative_positions`](Self::relative_positions).
    pub fn metric_positions(&self) -> Result<Vec<Vec3>> {
        let radius = self
            .absolute_radius
            .ok_or(Error::RigNotMetric("absolute_radius missing"))?;
        let offset = self
            .offset_truth
            .ok_or(Error::RigNotMetric("offset_truth missing"))?;
        Ok(self
            .pairs
            .iter()
            .flat_map(|p| {
                [
                    light_position(p, Sign::Plus, radius, &offset),
                    light_position(p, Sign::Minus, radius, &offset),
                ]
            })
            .collect())
    }
}

fn angles_parallel(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(PI);
    d < tol || PI - d < tol
}

/// Pinhole intrinsics, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image size must be non-zero".into()));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// `(u′, v′) = ((u − cx)/fx, (v − cy)/fy)`.
    pub fn normalized(&self, u: f64, v: f64) -> [f64; 2] {
        [(u - self.cx) / self.fx, (v - self.cy) / self.fy]
    }

    /// Viewing-ray direction `[u′, v′, 1]` of a pixel.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        let [x, y] = self.normalized(u, v);
        Vec3::new(x, y, 1.0)
    }

    /// Pixel coordinates `(u, v)` of a row-major index.
    pub fn pixel_of(&self, index: usize) -> (f64, f64) {
        ((index % self.width) as f64, (index / self.width) as f64)
    }
}

/// Position of one light of a pair in scene units.
pub fn light_position(pair: &SymmetricPair, sign: Sign, radius_unit: f64, offset: &Vec3) -> Vec3 {
    pair.relative() * (sign.factor() * radius_unit) + offset
}

/// Coefficients `(s, t)` expressing `target` as `s·basis1 + t·basis2` in the light plane.
pub fn basis_coefficients(
    basis1: &SymmetricPair,
    basis2: &SymmetricPair,
    target: &SymmetricPair,
) -> Result<(f64, f64)> {
    basis_coefficients_with_tol(basis1, basis2, target, BASIS_TOL)
}

pub fn basis_coefficients_with_tol(
    basis1: &SymmetricPair,
    basis2: &SymmetricPair,
    target: &SymmetricPair,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let sine = (basis1.angle - basis2.angle).sin();
    if sine.abs() < tolerance {
        return Err(Error::DegenerateBasis { sine, tolerance });
    }
    let [ax, ay] = basis1.planar();
    let [bx, by] = basis2.planar();
    let [tx, ty] = target.planar();
    // Cramer's rule on [a b] [s t]^T = target.
    let det = ax * by - bx * ay;
    let s = (tx * by - bx * ty) / det;
    let t = (ax * ty - tx * ay) / det;
    Ok((s, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrangementKind {
    /// Distinct radii, arbitrary (or zero) offset, at least three pairs.
    FullGeneral,
    /// Distinct radii, offset along the optical axis, at least three pairs.
    FullGeneralZOnly,
    /// All radii equal: scaled distances are estimable, position is not.
    RingScaledDistOnly,
    /// All lights on one line with a z-only offset: depth only.
    CollinearDepthOnly,
    Insufficient,
}

impl ArrangementKind {
    pub fn name(self) -> &'static str {
        match self {
            ArrangementKind::FullGeneral => "FullGeneral",
            ArrangementKind::FullGeneralZOnly => "FullGeneralZOnly",
            ArrangementKind::RingScaledDistOnly => "RingScaledDistOnly",
            ArrangementKind::CollinearDepthOnly => "CollinearDepthOnly",
            ArrangementKind::Insufficient => "Insufficient",
        }
    }
}

impl fmt::Display for ArrangementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrangementClass {
    pub kind: ArrangementKind,
    pub diagnostic: String,
}

impl ArrangementClass {
    fn new(kind: ArrangementKind, diagnostic: impl Into<String>) -> Self {
        Self {
            kind,
            diagnostic: diagnostic.into(),
        }
    }

    /// Whether per-pixel surface recovery is possible.
    pub fn recovers_position(&self) -> bool {
        matches!(
            self.kind,
            ArrangementKind::FullGeneral
                | ArrangementKind::FullGeneralZOnly
                | ArrangementKind::CollinearDepthOnly
        )
    }
}

/// Classifies a rig by what can be recovered from it.
pub fn classify_arrangement(rig: &SymmetricRig) -> ArrangementClass {
    use ArrangementKind::*;

    let n = rig.n_pairs();
    let distinct = rig.has_distinct_radii();

    if rig.is_collinear() {
        if rig.offset_mode != OffsetMode::ZOnly {
            return ArrangementClass::new(
                Insufficient,
                "collinear lights need an offset restricted to the optical axis (offset_mode \"z\")",
            );
        }
        if !distinct {
            return ArrangementClass::new(Insufficient, DISTINCT_RADII_REQUIRED);
        }
        return ArrangementClass::new(
            CollinearDepthOnly,
            format!("all {} lights lie on one line; only depth is recoverable", 2 * n),
        );
    }

    if !distinct {
        // A ring still determines e with three pairs, or two under a z-only offset.
        let min_pairs = if rig.offset_mode == OffsetMode::ZOnly { 2 } else { 3 };
        if n >= min_pairs {
            return ArrangementClass::new(
                RingScaledDistOnly,
                format!("scaled distances only: {DISTINCT_RADII_REQUIRED}"),
            );
        }
        return ArrangementClass::new(
            Insufficient,
            format!(
                "ring light needs at least {min_pairs} pairs for scaled distances; {DISTINCT_RADII_REQUIRED}"
            ),
        );
    }

    if n < 3 {
        return ArrangementClass::new(
            Insufficient,
            format!("scaled-distance estimation needs at least 3 non-collinear pairs, got {n}"),
        );
    }

    match rig.offset_mode {
        OffsetMode::ZOnly => ArrangementClass::new(
            FullGeneralZOnly,
            "distinct radii, z-only offset: position (up to a depth shift), normal, and albedo",
        ),
        OffsetMode::Xyz | OffsetMode::None => ArrangementClass::new(
            FullGeneral,
            "distinct radii: position (up to the rig offset), normal, and albedo",
        ),
    }
}
