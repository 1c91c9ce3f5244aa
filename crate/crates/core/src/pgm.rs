//! Binary PGM images for masks and depth maps.
//!
//! Masks are 8-bit with 0 for background and 255 for vegetation. Depth maps
//! are 16-bit millimeters; 65535 encodes no return.

use std::path::Path;

use image::ImageFormat;
use thiserror::Error;

use crate::grid::{DepthMap, Grid, GridError, VegetationMask, NO_RETURN};

/// Depth value written for pixels without a return.
pub const NO_RETURN_MM: u16 = u16::MAX;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: String,
        source: image::ImageError,
    },
    #[error("{path}: expected a {expected}-bit graymap")]
    Format { path: String, expected: u8 },
    #[error("{path}: mask pixel {index} is {value}, expected 0 or 255")]
    MaskValue { path: String, index: usize, value: u8 },
    #[error("depth {0} m does not fit in 16-bit millimeters")]
    DepthRange(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn load(path: &Path) -> Result<image::DynamicImage, PgmError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| PgmError::Io {
        path: name.clone(),
        source,
    })?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)
        .map_err(|source| PgmError::Decode { path: name, source })
}

/// Writes a P5 header followed by the samples, big-endian when 16-bit.
fn encode(samples: &[u8], width: usize, height: usize, maxval: u16) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

fn write_bytes(path: &Path, bytes: Vec<u8>) -> Result<(), PgmError> {
    std::fs::write(path, bytes).map_err(|source| PgmError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn encode_mask(mask: &VegetationMask) -> Vec<u8> {
    let raw: Vec<u8> = mask.cells().iter().map(|&c| if c { 255 } else { 0 }).collect();
    encode(&raw, mask.width(), mask.height(), 255)
}

pub fn write_mask(path: &Path, mask: &VegetationMask) -> Result<(), PgmError> {
    write_bytes(path, encode_mask(mask))
}

pub fn read_mask(path: &Path) -> Result<VegetationMask, PgmError> {
    let name = path.display().to_string();
    let image::DynamicImage::ImageLuma8(img) = load(path)? else {
        return Err(PgmError::Format { path: name, expected: 8 });
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut cells = Vec::with_capacity(w * h);
    for (index, px) in img.pixels().enumerate() {
        match px.0[0] {
            0 => cells.push(false),
            255 => cells.push(true),
            value => return Err(PgmError::MaskValue { path: name, index, value }),
        }
    }
    Ok(VegetationMask::from_cells(w, h, cells)?)
}

/// Rounds to the nearest millimeter.
pub fn encode_depth(depth: &DepthMap) -> Result<Vec<u8>, PgmError> {
    let (w, h) = (depth.width(), depth.height());
    let mut raw = Vec::with_capacity(w * h);
    for &d in depth.cells() {
        if d >= NO_RETURN {
            raw.push(NO_RETURN_MM);
            continue;
        }
        let mm = (d * 1000.0).round();
        if mm >= f64::from(NO_RETURN_MM) {
            return Err(PgmError::DepthRange(d));
        }
        raw.push(mm as u16);
    }
    let bytes: Vec<u8> = raw.iter().flat_map(|v| v.to_be_bytes()).collect();
    Ok(encode(&bytes, w, h, u16::MAX))
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<(), PgmError> {
    write_bytes(path, encode_depth(depth)?)
}

pub fn read_depth(path: &Path) -> Result<DepthMap, PgmError> {
    let name = path.display().to_string();
    let image::DynamicImage::ImageLuma16(img) = load(path)? else {
        return Err(PgmError::Format { path: name, expected: 16 });
    };
    let cells = img
        .pixels()
        .map(|px| match px.0[0] {
            NO_RETURN_MM => NO_RETURN,
            mm => f64::from(mm) / 1000.0,
        })
        .collect();
    Ok(DepthMap::from_cells(img.width() as usize, img.height() as usize, cells)?)
}
