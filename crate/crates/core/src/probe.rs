//! Single-pixel synthetic measurements with known scaled distances.
//!
//! Used by the `check` command to measure constraint ranks, and by tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::PixelStack;
use crate::geometry::{CameraIntrinsics, OffsetMode, SymmetricRig, Vec3};

#[derive(Debug, Clone)]
pub struct ProbePixel {
    pub stack: PixelStack,
    /// Unnormalized scaled distances `ρ⁻¹ dᵏ` for the model that generated the stack.
    pub e: Vec<f64>,
    pub point: Vec3,
    pub normal: Vec3,
    pub albedo: f64,
    pub offset: Vec3,
    pub radius: f64,
}

/// Intensities under `m = ρ (s − x)ᵀn / ‖s − x‖^power` and the matching `e = ρ⁻¹ ‖s − x‖^(power+1)`.
fn shade(
    rig: &SymmetricRig,
    radius: f64,
    offset: &Vec3,
    point: &Vec3,
    normal: &Vec3,
    albedo: f64,
    power: i32,
) -> (Vec<f64>, Vec<f64>) {
    rig.relative_positions()
        .iter()
        .map(|q| {
            let to_light = q * radius + offset - point;
            let d = to_light.norm();
            let m = albedo * to_light.dot(normal) / d.powi(power + 1);
            (m, d.powi(power + 1) / albedo)
        })
        .unzip()
}

fn probe(
    rig: &SymmetricRig,
    radius: f64,
    offset: &Vec3,
    point: &Vec3,
    normal: &Vec3,
    albedo: f64,
    power: i32,
) -> ProbePixel {
    let (m, e) = shade(rig, radius, offset, point, normal, albedo, power);
    let normalized = [point.x / point.z, point.y / point.z];
    ProbePixel {
        stack: PixelStack::new(m, (f64::NAN, f64::NAN), normalized),
        e,
        point: *point,
        normal: *normal,
        albedo,
        offset: *offset,
        radius,
    }
}

/// Relaxed (first-power fall-off) measurement of a given surface point.
pub fn relaxed_pixel(
    rig: &SymmetricRig,
    radius: f64,
    offset: &Vec3,
    point: &Vec3,
    normal: &Vec3,
    albedo: f64,
) -> ProbePixel {
    probe(rig, radius, offset, point, normal, albedo, 1)
}

/// Physically correct (inverse-square) measurement of a given surface point.
pub fn cubic_pixel(
    rig: &SymmetricRig,
    radius: f64,
    offset: &Vec3,
    point: &Vec3,
    normal: &Vec3,
    albedo: f64,
) -> ProbePixel {
    probe(rig, radius, offset, point, normal, albedo, 2)
}

impl ProbePixel {
    /// A random lit surface point under the relaxed model, with an offset that
    /// matches the rig's offset mode. Deterministic in `seed`.
    pub fn generic(rig: &SymmetricRig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = rig.absolute_radius.unwrap_or(1.0);
        loop {
            let offset = match rig.offset_mode {
                OffsetMode::None => Vec3::zeros(),
                OffsetMode::ZOnly => Vec3::new(0.0, 0.0, rng.random_range(-0.5..0.5)),
                OffsetMode::Xyz => Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ),
            };
            let point = Vec3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(4.0..8.0),
            ) * radius;
            let normal = Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                -1.0,
            )
            .normalize();
            let albedo = rng.random_range(0.3..1.0);
            let p = relaxed_pixel(rig, radius, &offset, &point, &normal, albedo);
            if p.stack.intensities.iter().all(|&m| m > 0.0) {
                return p;
            }
        }
    }

    /// Inverse-square measurement of the point at `depth` along a pixel's ray,
    /// using the rig's metric parameters when present.
    pub fn cubic_on_ray(rig: &SymmetricRig, camera: &CameraIntrinsics, pixel: (f64, f64), depth: f64) -> Self {
        let radius = rig.absolute_radius.unwrap_or(1.0);
        let offset = rig.offset_truth.unwrap_or_else(Vec3::zeros);
        let point = camera.ray(pixel.0, pixel.1) * depth;
        let normal = Vec3::new(0.1, -0.2, -1.0).normalize();
        let mut p = cubic_pixel(rig, radius, &offset, &point, &normal, 0.8);
        p.stack.pixel = pixel;
        p
    }
}
