//! Normal and depth error metrics, and affine depth alignment.
//!
//! Means are computed with [`pairwise_sum`], so reports are bit-reproducible
//! regardless of the execution strategy.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::parallel::{pairwise_sum, Execution};
use crate::{Error, Result};

/// Angle between two directions in degrees. Inputs are renormalized.
///
/// Uses `atan2(‖a×b‖, a·b)`, which stays accurate for nearly parallel vectors
/// where `acos` loses half the significant digits.
pub fn angular_error(estimate: &Vec3, truth: &Vec3) -> f64 {
    let a = estimate.normalize();
    let b = truth.normalize();
    a.cross(&b).norm().atan2(a.dot(&b)).to_degrees()
}

/// Affine fit `aligned = scale · estimate + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthAlignment {
    pub scale: f64,
    pub shift: f64,
    /// NaN outside the mask.
    pub aligned: Vec<f64>,
}

fn masked_indices(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Vec<usize> {
    (0..mask.len())
        .filter(|&i| mask[i] && estimate[i].is_finite() && truth[i].is_finite())
        .collect()
}

fn masked_mean(indices: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    let values: Vec<f64> = indices.iter().map(|&i| f(i)).collect();
    pairwise_sum(&values, Execution::default()) / values.len() as f64
}

fn apply(estimate: &[f64], mask: &[bool], scale: f64, shift: f64) -> Vec<f64> {
    estimate
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { scale * z + shift } else { f64::NAN })
        .collect()
}

/// Least-squares scale and shift mapping `estimate` onto `truth` over the mask.
///
/// Pixels where either map is non-finite are skipped.
pub fn align_depth(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Result<DepthAlignment> {
    check_lengths(estimate, truth, mask)?;
    let idx = masked_indices(estimate, truth, mask);
    if idx.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let mean_e = masked_mean(&idx, |i| estimate[i]);
    let mean_t = masked_mean(&idx, |i| truth[i]);
    let var = masked_mean(&idx, |i| (estimate[i] - mean_e).powi(2));
    let cov = masked_mean(&idx, |i| (estimate[i] - mean_e) * (truth[i] - mean_t));
    let spread = idx.iter().map(|&i| estimate[i].abs()).fold(0.0, f64::max);
    if !(var > (1e-12 * spread).powi(2)) {
        return Err(Error::DegenerateFit);
    }
    let scale = cov / var;
    if scale == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let shift = mean_t - scale * mean_e;
    let valid = valid_mask(estimate, truth, mask);
    Ok(DepthAlignment {
        scale,
        shift,
        aligned: apply(estimate, &valid, scale, shift),
    })
}

/// Shift-only alignment, for when the depth scale is already metric.
pub fn align_depth_shift(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Result<DepthAlignment> {
    check_lengths(estimate, truth, mask)?;
    let idx = masked_indices(estimate, truth, mask);
    if idx.is_empty() {
        return Err(Error::DegenerateFit);
    }
    let shift = masked_mean(&idx, |i| truth[i] - estimate[i]);
    let valid = valid_mask(estimate, truth, mask);
    Ok(DepthAlignment {
        scale: 1.0,
        shift,
        aligned: apply(estimate, &valid, 1.0, shift),
    })
}

fn valid_mask(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Vec<bool> {
    (0..mask.len())
        .map(|i| mask[i] && estimate[i].is_finite() && truth[i].is_finite())
        .collect()
}

fn check_lengths(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Result<()> {
    if estimate.len() != truth.len() || truth.len() != mask.len() {
        return Err(Error::Shape(format!(
            "depth maps have {}, {} and {} entries",
            estimate.len(),
            truth.len(),
            mask.len()
        )));
    }
    Ok(())
}

/// Mean of `|aligned − truth| / truth` over the mask, and the per-pixel map
/// (NaN outside the mask).
pub fn rel_abs_depth_error(aligned: &[f64], truth: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    check_lengths(aligned, truth, mask)?;
    let valid = valid_mask(aligned, truth, mask);
    let map: Vec<f64> = (0..mask.len())
        .map(|i| {
            if valid[i] {
                (aligned[i] - truth[i]).abs() / truth[i]
            } else {
                f64::NAN
            }
        })
        .collect();
    let values: Vec<f64> = map.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if values.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(&values, Execution::default()) / values.len() as f64
    };
    Ok((mean, map))
}

/// How estimated depth is mapped onto ground truth before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Scale and shift.
    #[default]
    Affine,
    ShiftOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_angular_error_deg: f64,
    pub mean_rel_abs_depth_error: f64,
    pub scale: f64,
    pub shift: f64,
    pub pixel_count: usize,
    #[serde(skip)]
    pub angular_error_map: Vec<f64>,
    #[serde(skip)]
    pub depth_error_map: Vec<f64>,
}

/// Normal and depth errors over the pixels valid in both estimate and truth.
///
/// A normal or depth counts as valid when all its components are finite.
pub fn evaluate(
    normal_est: &[Vec3],
    depth_est: &[f64],
    normal_gt: &[Vec3],
    depth_gt: &[f64],
    mask: &[bool],
    alignment: Alignment,
) -> Result<EvalReport> {
    let n = mask.len();
    if [normal_est.len(), depth_est.len(), normal_gt.len(), depth_gt.len()]
        .iter()
        .any(|&len| len != n)
    {
        return Err(Error::Shape("evaluation inputs differ in size".into()));
    }
    let finite3 = |v: &Vec3| v.iter().all(|c| c.is_finite()) && v.norm() > 0.0;
    let valid: Vec<bool> = (0..n)
        .map(|i| {
            mask[i]
                && finite3(&normal_est[i])
                && finite3(&normal_gt[i])
                && depth_est[i].is_finite()
                && depth_gt[i].is_finite()
                && depth_gt[i] > 0.0
        })
        .collect();
    let pixel_count = valid.iter().filter(|&&v| v).count();

    let angular_error_map: Vec<f64> = (0..n)
        .map(|i| {
            if valid[i] {
                angular_error(&normal_est[i], &normal_gt[i])
            } else {
                f64::NAN
            }
        })
        .collect();
    let errors: Vec<f64> = angular_error_map.iter().copied().filter(|v| v.is_finite()).collect();
    let mean_angular_error_deg = if errors.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(&errors, Execution::default()) / errors.len() as f64
    };

    let fit = match alignment {
        Alignment::Affine => align_depth(depth_est, depth_gt, &valid)?,
        Alignment::ShiftOnly => align_depth_shift(depth_est, depth_gt, &valid)?,
    };
    let (mean_rel_abs_depth_error, depth_error_map) = rel_abs_depth_error(&fit.aligned, depth_gt, &valid)?;
    Ok(EvalReport {
        mean_angular_error_deg,
        mean_rel_abs_depth_error,
        scale: fit.scale,
        shift: fit.shift,
        pixel_count,
        angular_error_map,
        depth_error_map,
    })
}
