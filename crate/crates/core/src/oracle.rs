//! Brute-force reference solver.
//!
//! The point is constrained to the pixel's viewing ray and its depth is
//! searched exhaustively on a grid. At each candidate depth the scaled normal
//! `b = ρ n` is the linear least-squares fit to the intensities under the
//! chosen fall-off model, and the intensity residual of that fit scores the
//! candidate. The rig must be fully calibrated.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{CameraIntrinsics, SymmetricRig, Vec3};
use crate::parallel::{map_indexed, Execution};
use crate::render::Falloff;
use crate::solver::Observations;
use crate::{Error, Result};

/// Uniform grid of candidate depths, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub steps: usize,
}

impl DepthGrid {
    pub fn new(z_min: f64, z_max: f64, steps: usize) -> Result<Self> {
        if !(z_min > 0.0 && z_min < z_max && z_max.is_finite()) {
            return Err(Error::config("grid", format!("need 0 < z_min < z_max, got [{z_min}, {z_max}]")));
        }
        if steps < 2 {
            return Err(Error::config("grid", format!("need at least 2 steps, got {steps}")));
        }
        Ok(Self { z_min, z_max, steps })
    }

    /// `[0.25 l, 2 l]` with 10⁴ steps for a nominal distance `l`.
    pub fn around(distance: f64) -> Result<Self> {
        Self::new(0.25 * distance, 2.0 * distance, 10_000)
    }

    /// `[0.25 l, 2 l]` with a step of at most `step`.
    pub fn around_with_step(distance: f64, step: f64) -> Result<Self> {
        let (lo, hi) = (0.25 * distance, 2.0 * distance);
        if !(step > 0.0) {
            return Err(Error::config("grid", "step must be positive"));
        }
        Self::new(lo, hi, ((hi - lo) / step).ceil() as usize + 1)
    }

    pub fn step(&self) -> f64 {
        (self.z_max - self.z_min) / (self.steps - 1) as f64
    }

    pub fn depth(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            self.z_max
        } else {
            self.z_min + i as f64 * self.step()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleFit {
    /// Camera-frame `z` of the best point.
    pub depth: f64,
    /// Unit normal, NaN when the fit has no direction.
    pub normal: Vec3,
    pub albedo: f64,
    /// Sum of squared intensity residuals at the best depth.
    pub residual: f64,
}

impl OracleFit {
    fn invalid() -> Self {
        Self {
            depth: f64::NAN,
            normal: Vec3::repeat(f64::NAN),
            albedo: f64::NAN,
            residual: f64::NAN,
        }
    }
}

/// Scaled normal and residual at one candidate point. `dirs` is scratch space.
fn fit_at(point: &Vec3, lights: &[Vec3], intensities: &[f64], power: i32, dirs: &mut Vec<Vec3>) -> Option<(Vec3, f64)> {
    dirs.clear();
    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (s, &m) in lights.iter().zip(intensities) {
        let d = s - point;
        let w = d / d.norm().powi(power);
        gram += w * w.transpose();
        rhs += w * m;
        dirs.push(w);
    }
    let b = gram.cholesky()?.solve(&rhs);
    let residual = dirs
        .iter()
        .zip(intensities)
        .map(|(w, &m)| (w.dot(&b) - m).powi(2))
        .sum();
    Some((b, residual))
}

fn search(ray: &Vec3, lights: &[Vec3], intensities: &[f64], grid: &DepthGrid, power: i32) -> OracleFit {
    let mut best = OracleFit::invalid();
    let mut dirs = Vec::with_capacity(lights.len());
    for i in 0..grid.steps {
        let z = grid.depth(i);
        if let Some((b, residual)) = fit_at(&(ray * z), lights, intensities, power, &mut dirs) {
            if !(residual >= best.residual) {
                let albedo = b.norm();
                best = OracleFit {
                    depth: z,
                    normal: if albedo > 0.0 { b / albedo } else { Vec3::repeat(f64::NAN) },
                    albedo,
                    residual,
                };
            }
        }
    }
    best
}

/// Exhaustive depth search at one pixel. Ties keep the nearest depth.
pub fn brute_force_pixel(
    intensities: &[f64],
    rig: &SymmetricRig,
    camera: &CameraIntrinsics,
    pixel: (f64, f64),
    grid: &DepthGrid,
    falloff: Falloff,
) -> Result<OracleFit> {
    let lights = rig.metric_positions()?;
    if intensities.len() != lights.len() {
        return Err(Error::Shape(format!(
            "{} intensities for {} lights",
            intensities.len(),
            lights.len()
        )));
    }
    Ok(search(&camera.ray(pixel.0, pixel.1), &lights, intensities, grid, falloff.power()))
}

/// Per-pixel oracle results; NaN where the input is masked or not finite.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMap {
    pub width: usize,
    pub height: usize,
    pub fits: Vec<OracleFit>,
}

impl OracleMap {
    pub fn depth(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.depth).collect()
    }

    pub fn normals(&self) -> Vec<Vec3> {
        self.fits.iter().map(|f| f.normal).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.residual).collect()
    }
}

pub fn brute_force_image(
    observations: &Observations,
    rig: &SymmetricRig,
    camera: &CameraIntrinsics,
    grid: &DepthGrid,
    falloff: Falloff,
    execution: Execution,
) -> Result<OracleMap> {
    let lights = rig.metric_positions()?;
    if observations.images.len() != lights.len() {
        return Err(Error::Shape(format!(
            "rig has {} lights but {} images were given",
            lights.len(),
            observations.images.len()
        )));
    }
    if observations.width != camera.width || observations.height != camera.height {
        return Err(Error::Shape("images do not match the camera resolution".into()));
    }
    let power = falloff.power();
    let fits = map_indexed(observations.pixel_count(), execution, |index| {
        let stack = observations.pixel_stack(camera, index);
        if !stack.valid || stack.intensities.iter().all(|&m| m == 0.0) {
            return OracleFit::invalid();
        }
        let (u, v) = stack.pixel;
        search(&camera.ray(u, v), &lights, &stack.intensities, grid, power)
    });
    Ok(OracleMap {
        width: observations.width,
        height: observations.height,
        fits,
    })
}
