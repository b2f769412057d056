//! Grayscale Portable Float Map ("Pf"). The sign of the header scale gives
//! the byte order (negative: little-endian) and rows are stored bottom to
//! top.

use std::fs;
use std::path::Path;

use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Reads a grayscale PFM in meters. Non-positive and non-finite values
/// (such as the common `-1` marker) are invalid pixels.
pub fn read_depth_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, little_endian, offset) = parse_header(&bytes)
        .map_err(|msg| Error::format(path, format!("malformed PFM header: {msg}")))?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "PFM dimensions overflow"))?;
    let data = &bytes[offset..];
    if data.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "PFM data truncated: expected {expected} bytes for {width}x{height}, found {}",
                data.len()
            ),
        ));
    }
    let mut values = vec![0.0f64; width * height];
    for (file_row, chunk) in data[..expected].chunks_exact(width * 4).enumerate() {
        let row = height - 1 - file_row;
        for (u, b) in chunk.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            let v = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            values[row * width + u] = f64::from(v);
        }
    }
    DepthMap::from_values(width, height, values)
}

fn parse_header(bytes: &[u8]) -> Result<(usize, usize, bool, usize), String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of file".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        if tokens.len() == 1 && tokens[0] != "Pf" {
            return Err(if tokens[0] == "PF" {
                "found color PFM (\"PF\"), expected grayscale \"Pf\"".into()
            } else {
                format!("bad magic {:?}, expected \"Pf\"", tokens[0])
            });
        }
    }
    let width: usize = tokens[1].parse().map_err(|e| format!("bad width: {e}"))?;
    let height: usize = tokens[2].parse().map_err(|e| format!("bad height: {e}"))?;
    let scale: f64 = tokens[3].parse().map_err(|e| format!("bad scale: {e}"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format!("scale must be non-zero and finite, got {scale}"));
    }
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() {
        return Err("missing raster after header".into());
    }
    Ok((width, height, scale < 0.0, pos + 1))
}

/// Writes a little-endian grayscale PFM; invalid pixels are stored as 0.
pub fn write_depth_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for u in 0..w {
            let z = depth.get(u, row).unwrap_or(0.0) as f32;
            out.extend_from_slice(&z.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
