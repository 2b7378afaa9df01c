//! Synthetic Lambertian images of simple scenes under a symmetric rig.
//!
//! The camera sits at the origin looking toward +z. Each pixel's ray is cast
//! against the scene; the hit point is shaded by every light with either the
//! inverse-square fall-off or the first-power (relaxed) one. Only attached
//! shadows are modelled: a pixel facing away from any light is masked out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{CameraIntrinsics, SymmetricRig, Vec3};
use crate::parallel::{map_indexed, Execution};
use crate::solver::Observations;
use crate::{Error, Result};

/// Light fall-off model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Falloff {
    /// `m = ρ (s − x)ᵀn / ‖s − x‖³`, the physical inverse-square law.
    Cubic,
    /// `m = ρ (s − x)ᵀn / ‖s − x‖²`.
    Relaxed,
}

impl Falloff {
    /// Power of the distance in the denominator.
    pub fn power(self) -> i32 {
        match self {
            Falloff::Cubic => 3,
            Falloff::Relaxed => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Falloff::Cubic => "cubic",
            Falloff::Relaxed => "relaxed",
        }
    }
}

impl std::str::FromStr for Falloff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cubic" => Ok(Falloff::Cubic),
            "relaxed" => Ok(Falloff::Relaxed),
            other => Err(format!("unknown falloff `{other}` (expected cubic or relaxed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Plane through `[0, 0, depth]` with the given camera-facing normal.
    Plane { depth: f64, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
    /// Per-pixel depths (scene units), row-major, matching the camera resolution.
    Heightfield {
        width: usize,
        height: usize,
        depths: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Albedo {
    Uniform(f64),
    Map {
        width: usize,
        height: usize,
        values: Vec<f64>,
    },
}

impl Albedo {
    fn at(&self, index: usize) -> f64 {
        match self {
            Albedo::Uniform(a) => *a,
            Albedo::Map { values, .. } => values[index],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub shape: Shape,
    pub albedo: Albedo,
}

impl Scene {
    pub fn new(shape: Shape, albedo: Albedo) -> Result<Self> {
        match &shape {
            Shape::Plane { depth, normal } => {
                if !(*depth > 0.0) {
                    return Err(Error::InvalidScene(format!("plane depth must be positive, got {depth}")));
                }
                if !(normal.norm() > 0.0) {
                    return Err(Error::InvalidScene("plane normal must be non-zero".into()));
                }
            }
            Shape::Sphere { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidScene(format!("sphere radius must be positive, got {radius}")));
                }
                if !(center.z - radius > 0.0) {
                    return Err(Error::InvalidScene("sphere must lie in front of the camera".into()));
                }
            }
            Shape::Heightfield { width, height, depths } => {
                if depths.len() != width * height {
                    return Err(Error::InvalidScene(format!(
                        "heightfield has {} depths for a {width}x{height} grid",
                        depths.len()
                    )));
                }
                if depths.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::InvalidScene("heightfield depths must be positive".into()));
                }
            }
        }
        match &albedo {
            Albedo::Uniform(a) => {
                if !(*a > 0.0) {
                    return Err(Error::InvalidScene(format!("albedo must be positive, got {a}")));
                }
            }
            Albedo::Map { width, height, values } => {
                if values.len() != width * height {
                    return Err(Error::InvalidScene("albedo map size mismatch".into()));
                }
                if values.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                    return Err(Error::InvalidScene("albedo map values must lie in (0, 1]".into()));
                }
            }
        }
        Ok(Self { shape, albedo })
    }

    pub fn plane(depth: f64, normal: Vec3, albedo: f64) -> Result<Self> {
        Self::new(Shape::Plane { depth, normal }, Albedo::Uniform(albedo))
    }

    pub fn fronto_parallel_plane(depth: f64, albedo: f64) -> Result<Self> {
        Self::plane(depth, Vec3::new(0.0, 0.0, -1.0), albedo)
    }

    pub fn sphere(center: Vec3, radius: f64, albedo: f64) -> Result<Self> {
        Self::new(Shape::Sphere { center, radius }, Albedo::Uniform(albedo))
    }

    fn check_camera(&self, camera: &CameraIntrinsics) -> Result<()> {
        let size_ok = |w: usize, h: usize| w == camera.width && h == camera.height;
        if let Shape::Heightfield { width, height, .. } = &self.shape {
            if !size_ok(*width, *height) {
                return Err(Error::Shape("heightfield does not match the camera resolution".into()));
            }
        }
        if let Albedo::Map { width, height, .. } = &self.albedo {
            if !size_ok(*width, *height) {
                return Err(Error::Shape("albedo map does not match the camera resolution".into()));
            }
        }
        Ok(())
    }
}

/// Rendered intensities plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedStack {
    pub width: usize,
    pub height: usize,
    /// `2·n_pairs` row-major images in light order.
    pub images: Vec<Vec<f64>>,
    /// Unit normals; NaN where the ray misses.
    pub gt_normal: Vec<Vec3>,
    /// z-coordinate of the hit point; NaN where the ray misses.
    pub gt_depth: Vec<f64>,
    pub gt_albedo: Vec<f64>,
    /// Hit, and lit by every light.
    pub mask: Vec<bool>,
}

impl RenderedStack {
    pub fn observations(&self) -> Observations {
        Observations {
            width: self.width,
            height: self.height,
            images: self.images.clone(),
            mask: Some(self.mask.clone()),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Nearest intersection of a pixel's ray with the scene and the normal there.
///
/// Heightfields are sampled at integer pixels and have no normal on the
/// border, where the central difference is undefined.
pub fn ray_surface_point(camera: &CameraIntrinsics, pixel: (f64, f64), scene: &Scene) -> Option<(Vec3, Vec3)> {
    let ray = camera.ray(pixel.0, pixel.1);
    match &scene.shape {
        Shape::Plane { depth, normal } => {
            let anchor = Vec3::new(0.0, 0.0, *depth);
            let mut n = normal.normalize();
            // Face the camera: nᵀ(0 − x) > 0.
            if n.dot(&anchor) > 0.0 {
                n = -n;
            }
            let denom = n.dot(&ray);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = n.dot(&anchor) / denom;
            (t > 0.0).then(|| (ray * t, n))
        }
        Shape::Sphere { center, radius } => {
            let a = ray.dot(&ray);
            let b = -2.0 * ray.dot(center);
            let c = center.dot(center) - radius * radius;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            // Numerically stable pair of roots.
            let qq = -0.5 * (b + b.signum() * sq);
            let (t0, t1) = (qq / a, c / qq);
            let t = [t0.min(t1), t0.max(t1)].into_iter().find(|t| *t > 0.0)?;
            let x = ray * t;
            Some((x, (x - center) / *radius))
        }
        Shape::Heightfield { width, height, depths } => {
            let (u, v) = (pixel.0 as usize, pixel.1 as usize);
            if u == 0 || v == 0 || u + 1 >= *width || v + 1 >= *height {
                return None;
            }
            let point = |uu: usize, vv: usize| camera.ray(uu as f64, vv as f64) * depths[vv * width + uu];
            let du = (point(u + 1, v) - point(u - 1, v)) * 0.5;
            let dv = (point(u, v + 1) - point(u, v - 1)) * 0.5;
            let mut n = du.cross(&dv);
            let len = n.norm();
            if !(len > 0.0) {
                return None;
            }
            n /= len;
            let x = point(u, v);
            if n.dot(&x) > 0.0 {
                n = -n;
            }
            Some((x, n))
        }
    }
}

struct PixelSample {
    intensities: Vec<f64>,
    normal: Vec3,
    depth: f64,
    albedo: f64,
    lit: bool,
}

pub fn render(scene: &Scene, rig: &SymmetricRig, camera: &CameraIntrinsics, falloff: Falloff) -> Result<RenderedStack> {
    render_with(scene, rig, camera, falloff, Execution::default())
}

pub fn render_with(
    scene: &Scene,
    rig: &SymmetricRig,
    camera: &CameraIntrinsics,
    falloff: Falloff,
    execution: Execution,
) -> Result<RenderedStack> {
    let lights = rig.metric_positions()?;
    scene.check_camera(camera)?;
    let n_lights = lights.len();
    let power = falloff.power();

    let samples = map_indexed(camera.pixel_count(), execution, |index| {
        let pixel = camera.pixel_of(index);
        match ray_surface_point(camera, pixel, scene) {
            None => PixelSample {
                intensities: vec![0.0; n_lights],
                normal: Vec3::repeat(f64::NAN),
                depth: f64::NAN,
                albedo: f64::NAN,
                lit: false,
            },
            Some((x, n)) => {
                let albedo = scene.albedo.at(index);
                let mut lit = true;
                let intensities = lights
                    .iter()
                    .map(|s| {
                        let to_light = s - x;
                        let shading = to_light.dot(&n);
                        if shading <= 0.0 {
                            lit = false;
                            return 0.0;
                        }
                        albedo * shading / to_light.norm().powi(power)
                    })
                    .collect();
                PixelSample {
                    intensities,
                    normal: n,
                    depth: x.z,
                    albedo,
                    lit,
                }
            }
        }
    });

    let mut images = vec![Vec::with_capacity(samples.len()); n_lights];
    for s in &samples {
        for (image, m) in images.iter_mut().zip(&s.intensities) {
            image.push(*m);
        }
    }
    Ok(RenderedStack {
        width: camera.width,
        height: camera.height,
        images,
        gt_normal: samples.iter().map(|s| s.normal).collect(),
        gt_depth: samples.iter().map(|s| s.depth).collect(),
        gt_albedo: samples.iter().map(|s| s.albedo).collect(),
        mask: samples.iter().map(|s| s.lit).collect(),
    })
}

/// Sensor model for the optional noisy setting. All parameters are supplied
/// by the caller; there are no defaults fitted to a particular camera.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Intensity mapped to the top quantization code.
    pub full_scale: f64,
    /// Shot-noise variance per unit intensity.
    pub shot: f64,
    /// Readout noise standard deviation, in intensity units.
    pub read_sigma: f64,
    /// Quantize to this many bits after adding noise (12 for a typical raw sensor).
    pub bits: Option<u32>,
    pub seed: u64,
}

/// Adds shot and readout noise, then quantizes. Deterministic in `model.seed`;
/// output intensities are clamped to `[0, full_scale]`.
pub fn apply_noise(stack: &mut RenderedStack, model: &NoiseModel) -> Result<()> {
    if !(model.full_scale > 0.0) || model.shot < 0.0 || model.read_sigma < 0.0 {
        return Err(Error::InvalidScene("noise parameters must be non-negative with positive full_scale".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let levels = model.bits.map(|b| ((1u64 << b) - 1) as f64);
    for image in &mut stack.images {
        for m in image.iter_mut() {
            let sigma = (model.shot * *m + model.read_sigma * model.read_sigma).sqrt();
            let mut value = (*m + sigma * unit.sample(&mut rng)).clamp(0.0, model.full_scale);
            if let Some(levels) = levels {
                value = (value / model.full_scale * levels).round() / levels * model.full_scale;
            }
            *m = value;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OffsetMode;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(200.0, 200.0, 32.0, 32.0, 64, 64).unwrap()
    }

    fn rig() -> SymmetricRig {
        SymmetricRig::from_degrees(&[(1.0, 45.0), (1.0, 135.0), (2.0, 45.0), (2.0, 135.0)], OffsetMode::ZOnly)
            .unwrap()
            .with_absolute_radius(1.0)
            .unwrap()
            .with_offset_truth(Vec3::zeros())
    }

    #[test]
    fn center_pixel_intensities() {
        let cam = camera();
        let scene = Scene::fronto_parallel_plane(6.0, 1.0).unwrap();
        let center = 32 * 64 + 32;
        let cubic = render(&scene, &rig(), &cam, Falloff::Cubic).unwrap();
        let relaxed = render(&scene, &rig(), &cam, Falloff::Relaxed).unwrap();
        // Inner light: d² = 1 + 36 = 37, shading = 6.
        assert!((cubic.images[0][center] - 6.0 / 37f64.powf(1.5)).abs() < 1e-15);
        assert!((cubic.images[0][center] - 0.026_660).abs() < 1e-6);
        assert!((relaxed.images[0][center] - 6.0 / 37.0).abs() < 1e-15);
        assert!((relaxed.images[0][center] - 0.162_162).abs() < 1e-6);
        // Outer light: d² = 4 + 36.
        assert!((relaxed.images[4][center] - 6.0 / 40.0).abs() < 1e-15);
        assert!(cubic.mask[center]);
        assert_eq!(cubic.gt_depth[center], 6.0);
    }

    #[test]
    fn relaxed_is_cubic_times_distance() {
        let cam = camera();
        let scene = Scene::sphere(Vec3::new(0.1, 0.0, 6.0), 1.2, 0.7).unwrap();
        let cubic = render(&scene, &rig(), &cam, Falloff::Cubic).unwrap();
        let relaxed = render(&scene, &rig(), &cam, Falloff::Relaxed).unwrap();
        let lights = rig().metric_positions().unwrap();
        for i in (0..cam.pixel_count()).filter(|&i| cubic.mask[i]) {
            let (u, v) = cam.pixel_of(i);
            let x = cam.ray(u, v) * cubic.gt_depth[i];
            for (l, s) in lights.iter().enumerate() {
                let expect = cubic.images[l][i] * (s - x).norm();
                assert!((relaxed.images[l][i] - expect).abs() <= 1e-12 * expect);
            }
        }
    }

    #[test]
    fn ray_surface_examples() {
        let cam = camera();
        let plane = Scene::fronto_parallel_plane(6.0, 1.0).unwrap();
        let (x, n) = ray_surface_point(&cam, (32.0, 32.0), &plane).unwrap();
        assert_eq!(x, Vec3::new(0.0, 0.0, 6.0));
        assert_eq!(n, Vec3::new(0.0, 0.0, -1.0));

        let (x, _) = ray_surface_point(&cam, (10.0, 50.0), &plane).unwrap();
        let p = cam.ray(10.0, 50.0);
        assert!((x - p * 6.0).norm() < 1e-14);

        let sphere = Scene::sphere(Vec3::new(0.0, 0.0, 6.0), 1.0, 1.0).unwrap();
        let (x, n) = ray_surface_point(&cam, (32.0, 32.0), &sphere).unwrap();
        assert!((x - Vec3::new(0.0, 0.0, 5.0)).norm() < 1e-14);
        assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-14);

        assert!(ray_surface_point(&cam, (0.0, 0.0), &sphere).is_none());
    }

    #[test]
    fn tilted_plane_faces_camera() {
        let cam = camera();
        let scene = Scene::plane(6.0, Vec3::new(0.2, -0.1, 1.0), 1.0).unwrap();
        let (x, n) = ray_surface_point(&cam, (40.0, 20.0), &scene).unwrap();
        assert!(n.z < 0.0);
        assert!(n.dot(&(x - Vec3::new(0.0, 0.0, 6.0))).abs() < 1e-12);
    }

    #[test]
    fn heightfield_matches_plane() {
        let cam = camera();
        let plane = Scene::plane(5.0, Vec3::new(0.3, 0.1, -1.0), 1.0).unwrap();
        let depths: Vec<f64> = (0..cam.pixel_count())
            .map(|i| {
                let (u, v) = cam.pixel_of(i);
                ray_surface_point(&cam, (u, v), &plane).unwrap().0.z
            })
            .collect();
        let field = Scene::new(
            Shape::Heightfield { width: 64, height: 64, depths },
            Albedo::Uniform(1.0),
        )
        .unwrap();
        assert!(ray_surface_point(&cam, (0.0, 10.0), &field).is_none());
        for pixel in [(10.0, 10.0), (33.0, 47.0), (62.0, 62.0)] {
            let (xp, np) = ray_surface_point(&cam, pixel, &plane).unwrap();
            let (xh, nh) = ray_surface_point(&cam, pixel, &field).unwrap();
            assert!((xp - xh).norm() < 1e-12);
            assert!((np - nh).norm() < 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_images_mirror_through_principal_point() {
        let cam = camera();
        let ring = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 90.0)], OffsetMode::None)
            .unwrap()
            .with_absolute_radius(1.0)
            .unwrap()
            .with_offset_truth(Vec3::zeros());
        let scene = Scene::fronto_parallel_plane(4.0, 1.0).unwrap();
        let out = render(&scene, &ring, &cam, Falloff::Cubic).unwrap();
        for v in 1..64usize {
            for u in 1..64usize {
                let mirrored = (64 - v) * 64 + (64 - u);
                let a = out.images[0][v * 64 + u];
                let b = out.images[1][mirrored];
                assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
            }
        }
    }

    #[test]
    fn grazing_light_is_masked() {
        // Tilt the plane so its normal is orthogonal to the direction of one light.
        let cam = camera();
        let r = rig();
        let lights = r.metric_positions().unwrap();
        let x = Vec3::new(0.0, 0.0, 6.0);
        let to_light = lights[0] - x;
        let n = to_light.cross(&Vec3::new(1.0, -1.0, 0.0)).normalize();
        let n = if n.z > 0.0 { -n } else { n };
        assert!(n.dot(&to_light).abs() < 1e-12);
        let scene = Scene::plane(6.0, n, 1.0).unwrap();
        let out = render(&scene, &r, &cam, Falloff::Relaxed).unwrap();
        assert!(!out.mask[32 * 64 + 32]);
    }

    #[test]
    fn render_requires_metric_rig() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (2.0, 90.0)], OffsetMode::None).unwrap();
        let scene = Scene::fronto_parallel_plane(6.0, 1.0).unwrap();
        assert!(matches!(
            render(&scene, &rig, &camera(), Falloff::Cubic),
            Err(Error::RigNotMetric(_))
        ));
    }

    #[test]
    fn render_is_deterministic_across_execution() {
        let scene = Scene::sphere(Vec3::new(0.0, 0.0, 6.0), 1.0, 0.5).unwrap();
        let a = render_with(&scene, &rig(), &camera(), Falloff::Cubic, Execution::Sequential).unwrap();
        let b = render_with(&scene, &rig(), &camera(), Falloff::Cubic, Execution::Parallel).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn noise_is_seeded_and_quantized() {
        let scene = Scene::sphere(Vec3::new(0.0, 0.0, 6.0), 1.0, 0.5).unwrap();
        let clean = render(&scene, &rig(), &camera(), Falloff::Cubic).unwrap();
        let model = NoiseModel {
            full_scale: 0.05,
            shot: 1e-6,
            read_sigma: 1e-5,
            bits: Some(12),
            seed: 9,
        };
        let mut a = clean.clone();
        let mut b = clean.clone();
        apply_noise(&mut a, &model).unwrap();
        apply_noise(&mut b, &model).unwrap();
        assert_eq!(a.images, b.images);
        assert_ne!(a.images, clean.images);
        let step = 0.05 / 4095.0;
        for m in &a.images[0] {
            let code = m / step;
            assert!((code - code.round()).abs() < 1e-6);
            assert!(*m >= 0.0 && *m <= 0.05 + 1e-15);
        }
    }
}
