//! Per-pixel recovery of scaled distances, surface point, normal, and albedo.
//!
//! For each pixel:
//! 1. `e` is the right singular vector of the smallest singular value of
//!    `[A; A′]`, sign-fixed to be positive.
//! 2. The albedo-scaled squared radius `ρ⁻¹r²` follows from pair sums of pairs
//!    with different radii.
//! 3. Pair differences give the planar part of `x′_r = (x − s_o)/r`; the
//!    relaxed distance identity `e = ρ⁻¹r² ‖s′_r − x′_r‖²` then gives `z′_r`.
//! 4. With `x′_r` known the normal is a linear least-squares problem, as in
//!    calibrated photometric stereo.
//!
//! All-collinear rigs take a depth-only path that uses the viewing ray to fix
//! the direction of the planar component.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2};

use crate::constraints::{ConstraintLayout, ConstraintSystem, PixelStack, DEFAULT_RANK_TOL};
use crate::geometry::{
    classify_arrangement, ArrangementClass, ArrangementKind, CameraIntrinsics, SymmetricRig, Vec3, BASIS_TOL,
};
use crate::parallel::{map_indexed, Execution};
use crate::{Error, Result};

/// Components below `-SIGN_TOL` after sign fixing mark a sign conflict.
pub const SIGN_TOL: f64 = 1e-6;

/// Default fraction of the pixel's brightest measurement below which a
/// measurement counts as shadowed.
pub const DEFAULT_SHADOW_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub shadow_threshold: f64,
    pub rank_tol: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            shadow_threshold: DEFAULT_SHADOW_THRESHOLD,
            rank_tol: DEFAULT_RANK_TOL,
            execution: Execution::default(),
        }
    }
}

/// Intensity images to solve, with an optional validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub width: usize,
    pub height: usize,
    /// `2·n_pairs` row-major images in light order.
    pub images: Vec<Vec<f64>>,
    pub mask: Option<Vec<bool>>,
}

impl Observations {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel_stack(&self, camera: &CameraIntrinsics, index: usize) -> PixelStack {
        let (u, v) = camera.pixel_of(index);
        let intensities = self.images.iter().map(|im| im[index]).collect();
        let mut stack = PixelStack::new(intensities, (u, v), camera.normalized(u, v));
        if let Some(mask) = &self.mask {
            stack.valid &= mask[index];
        }
        stack
    }

    /// Every intensity multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.images
            .iter_mut()
            .for_each(|im| im.iter_mut().for_each(|m| *m *= c));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDistances {
    /// Unit-norm scaled distances in light order.
    pub e: Vec<f64>,
    /// All components non-negative (within [`SIGN_TOL`]) after the global sign flip.
    pub sign_fixed: bool,
    /// Smallest singular value of the stacked system.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfelStatus {
    Ok,
    /// A measurement fell below the shadow threshold.
    Shadowed,
    /// The null vector has components of both signs.
    SignConflict,
    /// Rank deficiency, negative radicand, or another numerical failure.
    Degenerate,
    /// Outside the input mask, or non-finite input.
    Masked,
}

impl SurfelStatus {
    /// Stable integer code written to status images.
    pub fn code(self) -> u8 {
        match self {
            SurfelStatus::Ok => 0,
            SurfelStatus::Shadowed => 1,
            SurfelStatus::SignConflict => 2,
            SurfelStatus::Degenerate => 3,
            SurfelStatus::Masked => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => SurfelStatus::Ok,
            1 => SurfelStatus::Shadowed,
            2 => SurfelStatus::SignConflict,
            3 => SurfelStatus::Degenerate,
            4 => SurfelStatus::Masked,
            _ => return None,
        })
    }
}

/// Recovered surface at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surfel {
    /// `(x − s_o) / r`.
    pub x_r: Vec3,
    /// Unit normal; `None` on the depth-only path or when not recovered.
    pub normal: Option<Vec3>,
    /// `ρ / r`.
    pub scaled_albedo: Option<f64>,
    /// `ρ⁻¹ r²` in the units of the unit-norm `e`.
    pub rho_inv_r2: f64,
    pub status: SurfelStatus,
}

impl Surfel {
    pub fn flagged(status: SurfelStatus) -> Self {
        Self {
            x_r: Vec3::repeat(f64::NAN),
            normal: None,
            scaled_albedo: None,
            rho_inv_r2: f64::NAN,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == SurfelStatus::Ok
    }
}

/// Null-space solve of `[A; A′] e = 0` with `‖e‖ = 1`.
pub fn solve_scaled_distances(system: &ConstraintSystem, rank_tol: f64) -> Result<ScaledDistances> {
    let n = system.n_unknowns();
    let stacked = system.stacked();
    if stacked.nrows() + 1 < n {
        return Err(Error::Degenerate);
    }
    // Pad to at least square so the full right singular basis is returned.
    let m = if stacked.nrows() < n {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, stacked.nrows()).copy_from(&stacked);
        padded
    } else {
        stacked
    };
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(Error::Degenerate)?;
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (smallest, second) = (order[0], order[1]);
    let max = sv[order[order.len() - 1]];
    if !(max > 0.0) || sv[second] <= rank_tol * max {
        return Err(Error::Degenerate);
    }

    let mut e: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    if e.iter().sum::<f64>() < 0.0 {
        e.iter_mut().for_each(|c| *c = -*c);
    }
    let sign_fixed = e.iter().all(|&c| c >= -SIGN_TOL);
    Ok(ScaledDistances {
        e,
        sign_fixed,
        residual: sv[smallest],
    })
}

/// `ρ⁻¹r²` averaged over all pairs of pairs with different radii.
pub fn recover_rho_inv_r2(e: &[f64], rig: &SymmetricRig) -> Result<f64> {
    let pairs = rig.pairs();
    let sums: Vec<f64> = (0..pairs.len()).map(|k| e[2 * k] + e[2 * k + 1]).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            let denom = 2.0 * (pairs[j].radius_ratio.powi(2) - pairs[i].radius_ratio.powi(2));
            if denom == 0.0 {
                continue;
            }
            total += (sums[j] - sums[i]) / denom;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EqualRadii);
    }
    Ok(total / count as f64)
}

/// `z′_r` averaged over every light whose radicand is non-negative.
fn recover_depth(e: &[f64], rig: &SymmetricRig, rho_inv_r2: f64, x: f64, y: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, pair) in rig.pairs().iter().enumerate() {
        let [qx, qy] = pair.planar();
        let along = x * qx + y * qy;
        for (sign, ek) in [(1.0, e[2 * k]), (-1.0, e[2 * k + 1])] {
            // e = ρ⁻¹r² (ratio² + ‖x′_r‖² − 2 σ x′_rᵀq)
            let radicand = ek / rho_inv_r2 - pair.radius_ratio.powi(2) + 2.0 * sign * along - x * x - y * y;
            if radicand >= 0.0 {
                total += radicand.sqrt();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NegativeRadicand);
    }
    Ok(total / count as f64)
}

/// Scaled and shifted surface point `x′_r` from scaled distances.
///
/// The planar part is averaged over every non-parallel choice of two pairs.
pub fn recover_position(e: &[f64], rig: &SymmetricRig, rho_inv_r2: f64) -> Result<Vec3> {
    if !(rho_inv_r2 > 0.0) {
        return Err(Error::NegativeRadicand);
    }
    let pairs = rig.pairs();
    let diffs: Vec<f64> = (0..pairs.len()).map(|k| e[2 * k] - e[2 * k + 1]).collect();
    let scale = -4.0 * rho_inv_r2;

    let mut sum = Vector2::zeros();
    let mut count = 0usize;
    for a in 0..pairs.len() {
        for b in (a + 1)..pairs.len() {
            if (pairs[a].angle - pairs[b].angle).sin().abs() < BASIS_TOL {
                continue;
            }
            let [ax, ay] = pairs[a].planar();
            let [bx, by] = pairs[b].planar();
            let m = Matrix2::new(ax, ay, bx, by);
            let rhs = Vector2::new(diffs[a] / scale, diffs[b] / scale);
            if let Some(xy) = m.lu().solve(&rhs) {
                sum += xy;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::DegenerateBasis {
            sine: 0.0,
            tolerance: BASIS_TOL,
        });
    }
    let xy = sum / count as f64;
    let z = recover_depth(e, rig, rho_inv_r2, xy.x, xy.y)?;
    Ok(Vec3::new(xy.x, xy.y, z))
}

/// Normal and `ρ/r` from `m_i ‖s′_i − x_r‖² = (s′_i − x_r)ᵀ b`, `b = (ρ/r) n`.
pub fn recover_normal(stack: &PixelStack, rig: &SymmetricRig, x_r: &Vec3) -> Result<(Vec3, f64)> {
    // Normal equations of the 2n×3 system. With 3 unknowns the Gram matrix is
    // well conditioned whenever the light directions are.
    let mut gram = Matrix3::zeros();
    let mut rhs = Vec3::zeros();
    for (s, &m) in rig.relative_positions().iter().zip(&stack.intensities) {
        let d = s - x_r;
        gram += d * d.transpose();
        rhs += d * (m * d.norm_squared());
    }
    let eigen = gram.symmetric_eigenvalues();
    let max = eigen.max();
    // Eigenvalues of the Gram matrix are squared singular values.
    let rank = eigen.iter().filter(|&&l| l > 1e-20 * max).count();
    if rank < 3 {
        return Err(Error::RankDeficient(rank));
    }
    let b = gram.cholesky().ok_or(Error::RankDeficient(rank))?.solve(&rhs);
    let albedo = b.norm();
    if !(albedo > 0.0 && albedo.is_finite()) {
        return Err(Error::Degenerate);
    }
    Ok((b / albedo, albedo))
}

/// Per-pixel pipeline with the rig-dependent structure precomputed.
#[derive(Debug, Clone)]
pub struct PixelSolver {
    rig: SymmetricRig,
    layout: ConstraintLayout,
    class: ArrangementClass,
    options: SolveOptions,
}

impl PixelSolver {
    /// Fails with [`Error::UnsupportedArrangement`] when the rig cannot recover position.
    pub fn new(rig: &SymmetricRig, options: SolveOptions) -> Result<Self> {
        let class = classify_arrangement(rig);
        if !class.recovers_position() {
            return Err(Error::UnsupportedArrangement(format!("{}: {}", class.kind, class.diagnostic)));
        }
        Ok(Self {
            rig: rig.clone(),
            layout: ConstraintLayout::new(rig)?,
            class,
            options,
        })
    }

    pub fn classification(&self) -> &ArrangementClass {
        &self.class
    }

    fn screen(&self, stack: &PixelStack) -> Option<SurfelStatus> {
        if !stack.valid || stack.intensities.len() != self.rig.n_lights() {
            return Some(SurfelStatus::Masked);
        }
        let max = stack.intensities.iter().copied().fold(0.0, f64::max);
        let floor = self.options.shadow_threshold * max;
        if !(max > 0.0) || stack.intensities.iter().any(|&m| m < floor) {
            return Some(SurfelStatus::Shadowed);
        }
        None
    }

    fn scaled_distances(&self, stack: &PixelStack) -> std::result::Result<(ScaledDistances, f64), SurfelStatus> {
        let system = self.layout.build(stack);
        let e = solve_scaled_distances(&system, self.options.rank_tol).map_err(|_| SurfelStatus::Degenerate)?;
        if !e.sign_fixed {
            return Err(SurfelStatus::SignConflict);
        }
        let k = recover_rho_inv_r2(&e.e, &self.rig).map_err(|_| SurfelStatus::Degenerate)?;
        if !(k > 0.0) {
            return Err(SurfelStatus::Degenerate);
        }
        Ok((e, k))
    }

    pub fn solve(&self, stack: &PixelStack) -> Surfel {
        if let Some(status) = self.screen(stack) {
            return Surfel::flagged(status);
        }
        if self.class.kind == ArrangementKind::CollinearDepthOnly {
            return self.solve_collinear(stack).unwrap_or_else(|_| Surfel::flagged(SurfelStatus::Degenerate));
        }
        let (e, k) = match self.scaled_distances(stack) {
            Ok(v) => v,
            Err(status) => return Surfel::flagged(status),
        };
        let x_r = match recover_position(&e.e, &self.rig, k) {
            Ok(x) if x.z > 0.0 => x,
            _ => return Surfel::flagged(SurfelStatus::Degenerate),
        };
        match recover_normal(stack, &self.rig, &x_r) {
            Ok((normal, albedo)) => Surfel {
                x_r,
                normal: Some(normal),
                scaled_albedo: Some(albedo),
                rho_inv_r2: k,
                status: SurfelStatus::Ok,
            },
            Err(_) => Surfel::flagged(SurfelStatus::Degenerate),
        }
    }

    /// Depth-only solve for all-collinear rigs with a z-only offset.
    ///
    /// The pair differences give `x′_rᵀq̂` for the line direction `q̂`; the
    /// z-only offset puts the planar part of `x′_r` on the viewing ray, so
    /// `x′_r = τ [u′, v′]` and a single scalar `τ` remains.
    pub fn solve_collinear(&self, stack: &PixelStack) -> Result<Surfel> {
        let [u, v] = stack.normalized;
        if u * u + v * v < 1e-12 {
            return Err(Error::PrincipalPointDegenerate);
        }
        let (e, k) = self.scaled_distances(stack).map_err(|status| match status {
            SurfelStatus::SignConflict => Error::Degenerate,
            _ => Error::Degenerate,
        })?;
        let pairs = self.rig.pairs();
        // D_k = −4K τ w_k with w_k = pᵀq_k; least squares for τ.
        let mut num = 0.0;
        let mut den = 0.0;
        let mut scale = 0.0f64;
        for (idx, pair) in pairs.iter().enumerate() {
            let [qx, qy] = pair.planar();
            let w = u * qx + v * qy;
            let d = e.e[2 * idx] - e.e[2 * idx + 1];
            num += d * w;
            den += w * w;
            scale = scale.max(pair.radius_ratio * (u * u + v * v).sqrt());
        }
        if den.sqrt() <= 1e-9 * scale {
            return Err(Error::Degenerate);
        }
        let tau = num / (-4.0 * k * den);
        let (x, y) = (tau * u, tau * v);
        let z = recover_depth(&e.e, &self.rig, k, x, y)?;
        if !(z > 0.0) {
            return Err(Error::Degenerate);
        }
        Ok(Surfel {
            x_r: Vec3::new(x, y, z),
            normal: None,
            scaled_albedo: None,
            rho_inv_r2: k,
            status: SurfelStatus::Ok,
        })
    }
}

/// Depth-only solve at one pixel for a collinear rig.
pub fn solve_collinear(
    stack: &PixelStack,
    rig: &SymmetricRig,
    camera: &CameraIntrinsics,
    pixel: (f64, f64),
) -> Result<Surfel> {
    let solver = PixelSolver::new(rig, SolveOptions::default())?;
    if solver.class.kind != ArrangementKind::CollinearDepthOnly {
        return Err(Error::UnsupportedArrangement(format!(
            "{}: the depth-only path needs a collinear rig",
            solver.class.kind
        )));
    }
    let mut stack = stack.clone();
    stack.pixel = pixel;
    stack.normalized = camera.normalized(pixel.0, pixel.1);
    if let Some(status) = solver.screen(&stack) {
        return Ok(Surfel::flagged(status));
    }
    solver.solve_collinear(&stack)
}

/// Per-pixel results for a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfelMap {
    pub width: usize,
    pub height: usize,
    pub surfels: Vec<Surfel>,
}

impl SurfelMap {
    pub fn ok_count(&self) -> usize {
        self.surfels.iter().filter(|s| s.is_ok()).count()
    }

    /// `r·z′_r` when the radius is known, else `z′_r`; NaN where not ok.
    pub fn depth(&self, radius: Option<f64>) -> Vec<f64> {
        let r = radius.unwrap_or(1.0);
        self.surfels
            .iter()
            .map(|s| if s.is_ok() { r * s.x_r.z } else { f64::NAN })
            .collect()
    }

    /// Unit normals; NaN where not recovered.
    pub fn normals(&self) -> Vec<Vec3> {
        self.surfels
            .iter()
            .map(|s| match (s.status, s.normal) {
                (SurfelStatus::Ok, Some(n)) => n,
                _ => Vec3::repeat(f64::NAN),
            })
            .collect()
    }

    pub fn scaled_albedo(&self) -> Vec<f64> {
        self.surfels
            .iter()
            .map(|s| match (s.status, s.scaled_albedo) {
                (SurfelStatus::Ok, Some(a)) => a,
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn status_codes(&self) -> Vec<u8> {
        self.surfels.iter().map(|s| s.status.code()).collect()
    }
}

/// Solves every pixel independently.
pub fn solve_image(
    observations: &Observations,
    rig: &SymmetricRig,
    camera: &CameraIntrinsics,
    options: &SolveOptions,
) -> Result<SurfelMap> {
    let solver = PixelSolver::new(rig, *options)?;
    if observations.images.len() != rig.n_lights() {
        return Err(Error::Shape(format!(
            "rig has {} lights but {} images were given",
            rig.n_lights(),
            observations.images.len()
        )));
    }
    if observations.width != camera.width || observations.height != camera.height {
        return Err(Error::Shape(format!(
            "images are {}x{} but the camera is {}x{}",
            observations.width, observations.height, camera.width, camera.height
        )));
    }
    let count = observations.pixel_count();
    if observations.images.iter().any(|im| im.len() != count)
        || observations.mask.as_ref().is_some_and(|m| m.len() != count)
    {
        return Err(Error::Shape("image buffers disagree with the image size".into()));
    }
    let surfels = map_indexed(count, options.execution, |index| {
        solver.solve(&observations.pixel_stack(camera, index))
    });
    Ok(SurfelMap {
        width: observations.width,
        height: observations.height,
        surfels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OffsetMode;
    use crate::probe::{cubic_pixel, relaxed_pixel};
    use crate::render::{render, Falloff, Scene};

    const FRONT: [f64; 3] = [0.0, 0.0, -1.0];

    fn double_o45(mode: OffsetMode) -> SymmetricRig {
        SymmetricRig::from_degrees(&[(1.0, 45.0), (1.0, 135.0), (2.0, 45.0), (2.0, 135.0)], mode)
            .unwrap()
            .with_absolute_radius(1.0)
            .unwrap()
            .with_offset_truth(Vec3::zeros())
    }

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        v.iter().map(|c| c / n).collect()
    }

    fn plane_probe(rig: &SymmetricRig) -> crate::probe::ProbePixel {
        relaxed_pixel(rig, 1.0, &Vec3::zeros(), &Vec3::new(0.0, 0.0, 6.0), &Vec3::from(FRONT), 1.0)
    }

    #[test]
    fn scaled_distances_of_relaxed_plane() {
        let rig = double_o45(OffsetMode::ZOnly);
        let probe = plane_probe(&rig);
        let layout = ConstraintLayout::new(&rig).unwrap();
        let sd = solve_scaled_distances(&layout.build(&probe.stack), 1e-8).unwrap();
        let expect = unit(&[37.0, 37.0, 37.0, 37.0, 40.0, 40.0, 40.0, 40.0]);
        for (a, b) in sd.e.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((sd.e[0] - 0.33952).abs() < 1e-5 && (sd.e[4] - 0.36705).abs() < 1e-5);
        assert!(sd.sign_fixed);
        assert!(sd.residual < 1e-12);
    }

    #[test]
    fn scaled_distances_ignore_intensity_scale() {
        let rig = double_o45(OffsetMode::Xyz);
        let probe = crate::probe::ProbePixel::generic(&rig, 11);
        let layout = ConstraintLayout::new(&rig).unwrap();
        let base = solve_scaled_distances(&layout.build(&probe.stack), 1e-8).unwrap();
        let mut scaled = probe.stack.clone();
        scaled.intensities.iter_mut().for_each(|m| *m *= 4.25);
        let other = solve_scaled_distances(&layout.build(&scaled), 1e-8).unwrap();
        for (a, b) in base.e.iter().zip(&other.e) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_plane_scaled_distances_close_to_cubic_model() {
        let rig = double_o45(OffsetMode::ZOnly);
        let x = Vec3::new(0.0, 0.0, 6.0);
        let probe = cubic_pixel(&rig, 1.0, &Vec3::zeros(), &x, &Vec3::from(FRONT), 1.0);
        let layout = ConstraintLayout::new(&rig).unwrap();
        let sd = solve_scaled_distances(&layout.build(&probe.stack), 1e-8).unwrap();
        // Brute-force cubic model: e = d³, unit-normalized.
        let cubic = unit(&probe.e);
        for (a, b) in sd.e.iter().zip(&cubic) {
            assert!((a - b).abs() / b < 0.03, "{a} vs {b}");
        }
    }

    #[test]
    fn too_few_rows_is_degenerate() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (2.0, 90.0)], OffsetMode::Xyz).unwrap();
        let probe = crate::probe::ProbePixel::generic(&rig, 1);
        let layout = ConstraintLayout::new(&rig).unwrap();
        let err = solve_scaled_distances(&layout.build(&probe.stack), 1e-8).unwrap_err();
        assert!(matches!(err, Error::Degenerate));
    }

    #[test]
    fn rho_inv_r2_examples() {
        let rig = double_o45(OffsetMode::ZOnly);
        let e = [37.0, 37.0, 37.0, 37.0, 40.0, 40.0, 40.0, 40.0];
        assert_eq!(recover_rho_inv_r2(&e, &rig).unwrap(), 1.0);
        let scaled: Vec<f64> = e.iter().map(|v| v * 2.5).collect();
        assert!((recover_rho_inv_r2(&scaled, &rig).unwrap() - 2.5).abs() < 1e-14);

        let ring = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 60.0), (1.0, 120.0)], OffsetMode::ZOnly).unwrap();
        assert!(matches!(recover_rho_inv_r2(&[1.0; 6], &ring), Err(Error::EqualRadii)));
    }

    #[test]
    fn position_of_the_plane_center() {
        let rig = double_o45(OffsetMode::ZOnly);
        let e = [37.0, 37.0, 37.0, 37.0, 40.0, 40.0, 40.0, 40.0];
        let x = recover_position(&e, &rig, 1.0).unwrap();
        assert_eq!(x, Vec3::new(0.0, 0.0, 6.0));
        let scaled: Vec<f64> = e.iter().map(|v| v * 0.01).collect();
        let x2 = recover_position(&scaled, &rig, 0.01).unwrap();
        assert!((x - x2).norm() < 1e-12);
    }

    #[test]
    fn position_and_normal_of_off_axis_points() {
        let rig = double_o45(OffsetMode::Xyz);
        let offset = Vec3::new(0.3, -0.4, 0.5);
        let radius = 1.5;
        for (point, normal) in [
            (Vec3::new(0.7, -0.4, 5.0), Vec3::new(0.3, 0.1, -1.0).normalize()),
            (Vec3::new(-1.2, 0.9, 7.5), Vec3::new(-0.2, 0.4, -1.0).normalize()),
        ] {
            let probe = relaxed_pixel(&rig, radius, &offset, &point, &normal, 0.6);
            let k = recover_rho_inv_r2(&probe.e, &rig).unwrap();
            assert!((k - radius * radius / 0.6).abs() < 1e-12);
            let x_r = recover_position(&probe.e, &rig, k).unwrap();
            let expect = (point - offset) / radius;
            assert!((x_r - expect).norm() < 1e-12, "{x_r} vs {expect}");
            let (n, albedo) = recover_normal(&probe.stack, &rig, &x_r).unwrap();
            assert!((n - normal).norm() < 1e-12);
            assert!((albedo - 0.6 / radius).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_of_the_plane_center() {
        let rig = double_o45(OffsetMode::ZOnly);
        let probe = plane_probe(&rig);
        let (n, albedo) = recover_normal(&probe.stack, &rig, &Vec3::new(0.0, 0.0, 6.0)).unwrap();
        assert!((n - Vec3::from(FRONT)).norm() < 1e-14);
        assert!((albedo - 1.0).abs() < 1e-14);

        let mut brighter = probe.stack.clone();
        brighter.intensities.iter_mut().for_each(|m| *m *= 3.0);
        let (n3, albedo3) = recover_normal(&brighter, &rig, &Vec3::new(0.0, 0.0, 6.0)).unwrap();
        assert!((n3 - n).norm() < 1e-14);
        assert!((albedo3 - 3.0).abs() < 1e-13);
    }

    #[test]
    fn normal_needs_non_coplanar_directions() {
        let rig = double_o45(OffsetMode::ZOnly);
        let probe = plane_probe(&rig);
        // A point on the light plane makes every direction coplanar.
        let err = recover_normal(&probe.stack, &rig, &Vec3::new(0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(2)));
    }

    #[test]
    fn collinear_depth_only() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 45.0), (2.0, 45.0)], OffsetMode::ZOnly)
            .unwrap()
            .with_absolute_radius(1.0)
            .unwrap()
            .with_offset_truth(Vec3::new(0.0, 0.0, 0.5));
        let cam = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let scene = Scene::fronto_parallel_plane(6.0, 1.0).unwrap();
        let out = render(&scene, &rig, &cam, Falloff::Relaxed).unwrap();
        let obs = out.observations();

        let pixel = (70.0, 62.0);
        let index = 62 * 100 + 70;
        let s = solve_collinear(&obs.pixel_stack(&cam, index), &rig, &cam, pixel).unwrap();
        assert_eq!(s.status, SurfelStatus::Ok);
        assert!(s.normal.is_none());
        // z′_r = z − s_z with r = 1.
        assert!((s.x_r.z - 5.5).abs() < 1e-6, "{}", s.x_r.z);
        let p = cam.ray(pixel.0, pixel.1);
        assert!((s.x_r.x - 6.0 * p.x).abs() < 1e-6);

        let center = 50 * 100 + 50;
        let err = solve_collinear(&obs.pixel_stack(&cam, center), &rig, &cam, (50.0, 50.0)).unwrap_err();
        assert!(matches!(err, Error::PrincipalPointDegenerate));
    }

    #[test]
    fn collinear_cubic_error_shrinks_with_distance() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 45.0), (2.0, 45.0)], OffsetMode::ZOnly)
            .unwrap()
            .with_absolute_radius(1.0)
            .unwrap()
            .with_offset_truth(Vec3::zeros());
        let cam = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let pixel = (70.0, 62.0);
        let mut previous = f64::INFINITY;
        for z0 in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let scene = Scene::plane(z0, Vec3::new(0.1, 0.05, -1.0), 1.0).unwrap();
            let out = render(&scene, &rig, &cam, Falloff::Cubic).unwrap();
            let index = 62 * 100 + 70;
            let s = solve_collinear(&out.observations().pixel_stack(&cam, index), &rig, &cam, pixel).unwrap();
            let err = (s.x_r.z - out.gt_depth[index]).abs() / out.gt_depth[index];
            assert!(err > 0.0 && err < previous, "z0={z0}: {err} !< {previous}");
            previous = err;
        }
    }

    #[test]
    fn ring_rig_is_unsupported() {
        let ring = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 60.0), (1.0, 120.0)], OffsetMode::ZOnly).unwrap();
        let cam = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let obs = Observations {
            width: 4,
            height: 4,
            images: vec![vec![1.0; 16]; 6],
            mask: None,
        };
        match solve_image(&obs, &ring, &cam, &SolveOptions::default()) {
            Err(Error::UnsupportedArrangement(msg)) => {
                assert!(msg.contains("two pairs with different radii"), "{msg}")
            }
            other => panic!("expected UnsupportedArrangement, got {other:?}"),
        }
    }

    #[test]
    fn all_masked_input_is_flagged() {
        let rig = double_o45(OffsetMode::ZOnly);
        let cam = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let obs = Observations {
            width: 4,
            height: 4,
            images: vec![vec![0.3; 16]; 8],
            mask: Some(vec![false; 16]),
        };
        let map = solve_image(&obs, &rig, &cam, &SolveOptions::default()).unwrap();
        assert!(map.surfels.iter().all(|s| s.status == SurfelStatus::Masked));
    }

    #[test]
    fn shadowed_measurements_are_flagged() {
        let rig = double_o45(OffsetMode::ZOnly);
        let solver = PixelSolver::new(&rig, SolveOptions::default()).unwrap();
        let mut probe = plane_probe(&rig).stack;
        probe.intensities[3] = 0.0;
        assert_eq!(solver.solve(&probe).status, SurfelStatus::Shadowed);
        probe.intensities.iter_mut().for_each(|m| *m = 0.0);
        assert_eq!(solver.solve(&probe).status, SurfelStatus::Shadowed);
    }

    #[test]
    fn relaxed_sphere_round_trip() {
        let rig = double_o45(OffsetMode::ZOnly).with_offset_truth(Vec3::new(0.0, 0.0, 0.5));
        let cam = CameraIntrinsics::new(300.0, 300.0, 32.0, 32.0, 64, 64).unwrap();
        let scene = Scene::sphere(Vec3::new(0.0, 0.0, 6.0), 1.0, 0.8).unwrap();
        let out = render(&scene, &rig, &cam, Falloff::Relaxed).unwrap();
        let map = solve_image(&out.observations(), &rig, &cam, &SolveOptions::default()).unwrap();
        let depth = map.depth(rig.absolute_radius);
        let mut checked = 0;
        for i in 0..cam.pixel_count() {
            if !out.mask[i] {
                continue;
            }
            let s = &map.surfels[i];
            assert_eq!(s.status, SurfelStatus::Ok, "pixel {i}");
            let n = s.normal.unwrap();
            assert!(crate::metrics::angular_error(&n, &out.gt_normal[i]) < 0.01);
            assert!((depth[i] + 0.5 - out.gt_depth[i]).abs() < 1e-5);
            checked += 1;
        }
        assert!(checked > 500);
    }

    #[test]
    fn solve_is_execution_independent() {
        let rig = double_o45(OffsetMode::ZOnly);
        let cam = CameraIntrinsics::new(300.0, 300.0, 16.0, 16.0, 32, 32).unwrap();
        let scene = Scene::sphere(Vec3::new(0.0, 0.0, 6.0), 1.0, 0.8).unwrap();
        let out = render(&scene, &rig, &cam, Falloff::Cubic).unwrap();
        let seq = SolveOptions {
            execution: Execution::Sequential,
            ..SolveOptions::default()
        };
        let par = SolveOptions {
            execution: Execution::Parallel,
            ..SolveOptions::default()
        };
        let a = solve_image(&out.observations(), &rig, &cam, &seq).unwrap();
        let b = solve_image(&out.observations(), &rig, &cam, &par).unwrap();
        assert_eq!(format!("{:?}", a), format!("{:?}", b));
    }

    #[test]
    fn image_count_mismatch_is_rejected() {
        let rig = double_o45(OffsetMode::ZOnly);
        let cam = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let obs = Observations {
            width: 4,
            height: 4,
            images: vec![vec![0.3; 16]; 6],
            mask: None,
        };
        assert!(matches!(
            solve_image(&obs, &rig, &cam, &SolveOptions::default()),
            Err(Error::Shape(_))
        ));
    }
}
