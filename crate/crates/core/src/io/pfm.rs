//! Portable float map images.
//!
//! Header: `Pf` (one channel) or `PF` (three channels), then `width height`,
//! then a scale whose sign gives the byte order (negative = little-endian).
//! Rows are stored bottom to top. Writing always emits little-endian with
//! scale `-1.0`; reading accepts either byte order.

use std::path::Path;

use crate::geometry::Vec3;
use crate::{Error, Result};

/// Row-major, top-to-bottom float image with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Pfm(format!("{channels} channels; PFM supports 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Pfm(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_scalars(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        Self::new(width, height, 1, values.iter().map(|&v| v as f32).collect())
    }

    pub fn from_vectors(width: usize, height: usize, values: &[Vec3]) -> Result<Self> {
        let data = values
            .iter()
            .flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])
            .collect();
        Self::new(width, height, 3, data)
    }

    pub fn to_scalars(&self) -> Result<Vec<f64>> {
        if self.channels != 1 {
            return Err(Error::Pfm("expected a single-channel image".into()));
        }
        Ok(self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn to_vectors(&self) -> Result<Vec<Vec3>> {
        if self.channels != 3 {
            return Err(Error::Pfm("expected a three-channel image".into()));
        }
        Ok(self
            .data
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
            .collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{magic}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        out.reserve(self.data.len() * 4);
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<&str> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos || pos >= bytes.len() {
                return Err(Error::Pfm("truncated header".into()));
            }
            let t = std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Pfm("non-ASCII header".into()))?;
            // Exactly one whitespace byte ends each token.
            pos += 1;
            Ok(t)
        };
        let channels = match token()? {
            "Pf" => 1,
            "PF" => 3,
            other => return Err(Error::Pfm(format!("bad magic `{other}`"))),
        };
        let parse_dim = |t: &str| t.parse::<usize>().map_err(|_| Error::Pfm(format!("bad dimension `{t}`")));
        let width = parse_dim(token()?)?;
        let height = parse_dim(token()?)?;
        let scale_token = token()?;
        let scale: f64 = scale_token
            .parse()
            .map_err(|_| Error::Pfm(format!("bad scale `{scale_token}`")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Pfm("scale must be non-zero".into()));
        }
        let little = scale < 0.0;

        let row = width * channels;
        let payload = &bytes[pos..];
        if payload.len() != row * height * 4 {
            return Err(Error::Pfm(format!(
                "expected {} data bytes, found {}",
                row * height * 4,
                payload.len()
            )));
        }
        let mut data = vec![0f32; row * height];
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let raw: [u8; 4] = chunk.try_into().expect("chunk of four");
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            let (file_row, col) = (i / row.max(1), i % row.max(1));
            data[(height - 1 - file_row) * row + col] = v;
        }
        Self::new(width, height, channels, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
