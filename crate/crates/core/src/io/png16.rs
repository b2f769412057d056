use std::path::Path;

use image::{ColorType, ImageBuffer, ImageReader, Luma};

use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Reads a single-channel 16-bit PNG where `stored / scale` is the depth in
/// meters and a stored 0 marks an invalid pixel.
pub fn read_depth_png16(path: &Path, scale: u32) -> Result<DepthMap> {
    if scale == 0 {
        return Err(Error::InvalidInput("PNG depth scale must be non-zero".into()));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let image = reader
        .decode()
        .map_err(|e| Error::format(path, format!("cannot decode PNG: {e}")))?;
    if image.color() != ColorType::L16 {
        return Err(Error::format(
            path,
            format!(
                "expected single-channel 16-bit PNG, found {:?}",
                image.color()
            ),
        ));
    }
    let gray = image.into_luma16();
    let (width, height) = (gray.width() as usize, gray.height() as usize);
    let scale = f64::from(scale);
    let values = gray
        .into_raw()
        .into_iter()
        .map(|s| f64::from(s) / scale)
        .collect();
    DepthMap::from_values(width, height, values)
}

/// Writes `round(depth * scale)` as 16-bit grayscale; invalid pixels are
/// stored as 0.
pub fn write_depth_png16(path: &Path, depth: &DepthMap, scale: u32) -> Result<()> {
    let scale = f64::from(scale);
    let mut raw = Vec::with_capacity(depth.len());
    for (&z, &ok) in depth.values().iter().zip(depth.valid_mask()) {
        if !ok {
            raw.push(0u16);
            continue;
        }
        let stored = (z * scale).round();
        if !(1.0..=f64::from(u16::MAX)).contains(&stored) {
            return Err(Error::format(
                path,
                format!("depth {z} m does not fit 16 bits at scale {scale}"),
            ));
        }
        raw.push(stored as u16);
    }
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer matches dimensions");
    buffer
        .save(path)
        .map_err(|e| Error::format(path, format!("cannot write PNG: {e}")))
}
