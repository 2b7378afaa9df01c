//! 8-bit PNG masks, status maps, and normal visualizations.

use std::path::Path;

use image::{GrayImage, RgbImage};
use symps::{Error, Vec3};

use crate::Failure;

fn image_error(path: &Path, e: image::ImageError) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

pub fn write_gray(path: &Path, width: usize, height: usize, values: Vec<u8>) -> Result<(), Failure> {
    let img = GrayImage::from_raw(width as u32, height as u32, values)
        .ok_or_else(|| Failure::from(Error::Shape("gray image buffer size".into())))?;
    img.save(path).map_err(|e| image_error(path, e))
}

/// 255 where valid.
pub fn write_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<(), Failure> {
    write_gray(path, width, height, mask.iter().map(|&m| if m { 255 } else { 0 }).collect())
}

/// Nonzero pixels are valid.
pub fn read_mask(path: &Path, width: usize, height: usize) -> Result<Vec<bool>, Failure> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_luma8();
    if img.width() as usize != width || img.height() as usize != height {
        return Err(Error::Shape(format!(
            "{} is {}x{}, expected {width}x{height}",
            path.display(),
            img.width(),
            img.height()
        ))
        .into());
    }
    Ok(img.into_raw().into_iter().map(|v| v > 0).collect())
}

/// Camera-facing normals have negative z, so z is flipped to make them blue.
/// Unrecovered normals are black.
pub fn write_normal_vis(path: &Path, width: usize, height: usize, normals: &[Vec3]) -> Result<(), Failure> {
    let to_byte = |c: f64| ((c + 1.0) * 0.5 * 255.0).round().clamp(0.0, 255.0) as u8;
    let data = normals
        .iter()
        .flat_map(|n| {
            if n.iter().all(|c| c.is_finite()) {
                [to_byte(n.x), to_byte(n.y), to_byte(-n.z)]
            } else {
                [0, 0, 0]
            }
        })
        .collect();
    let img = RgbImage::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Failure::from(Error::Shape("normal image buffer size".into())))?;
    img.save(path).map_err(|e| image_error(path, e))
}
