use std::fs;
use std::path::Path;

use crate::depth::CameraIntrinsics;
use crate::error::{Error, Result};

/// Reads `fx fy cx cy` or a row-major 3x3 camera matrix, whitespace
/// separated over any number of lines.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intrinsics(&text, path)
}

/// Parses intrinsics text; `path` only labels diagnostics.
pub fn parse_intrinsics(text: &str, path: &Path) -> Result<CameraIntrinsics> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut numbers = Vec::new();
    let mut last = (1, 1);
    for (line_no, line) in text.lines().enumerate() {
        let mut rest = line;
        let mut column = 1;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            column += start;
            rest = &rest[start..];
            let len = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let token = &rest[..len];
            let value: f64 = token.parse().map_err(|_| {
                parse_err(line_no + 1, column, format!("expected a number, found {token:?}"))
            })?;
            numbers.push(value);
            last = (line_no + 1, column);
            column += len;
            rest = &rest[len..];
        }
    }
    let k = match numbers.as_slice() {
        &[fx, fy, cx, cy] => CameraIntrinsics { fx, fy, cx, cy },
        &[m00, _, m02, _, m11, m12, _, _, _] => CameraIntrinsics {
            fx: m00,
            fy: m11,
            cx: m02,
            cy: m12,
        },
        other => {
            return Err(parse_err(
                last.0,
                last.1,
                format!(
                    "expected 4 numbers (fx fy cx cy) or 9 (3x3 matrix), found {}",
                    other.len()
                ),
            ))
        }
    };
    k.validate().map_err(|e| parse_err(1, 1, e.to_string()))?;
    Ok(k)
}

/// Writes the four-number form.
pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    fs::write(path, format!("{} {} {} {}\n", k.fx, k.fy, k.cx, k.cy))
        .map_err(|e| Error::io(path, e))
}
