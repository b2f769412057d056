//! Depth maps, pinhole intrinsics and point clouds, plus the conversions
//! between them.
//!
//! Pixel `(u, v)` addresses the pixel center at integer coordinates, `u`
//! along a row and `v` down the columns. Depth is the planar `z` coordinate,
//! not the length of the viewing ray.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EvalConfig;
use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Dense row-major grid of metric depth with a per-pixel validity mask.
///
/// Invalid pixels keep whatever raw value they were loaded with; no metric
/// reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let expected = width * height;
        if values.len() != expected || valid.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height} = {expected} values and mask entries"),
                found: format!("{} values, {} mask entries", values.len(), valid.len()),
            });
        }
        if let Some(i) = values
            .iter()
            .zip(&valid)
            .position(|(&z, &ok)| ok && !(z.is_finite() && z > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "pixel {i} is marked valid but holds depth {}",
                values[i]
            )));
        }
        Ok(DepthMap {
            width,
            height,
            values,
            valid,
        })
    }

    /// Builds a map whose mask marks every finite, strictly positive value
    /// as valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let valid = values.iter().map(|&z| z.is_finite() && z > 0.0).collect();
        Self::new(width, height, values, valid)
    }

    /// A map of one repeated depth, every pixel valid.
    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::from_values(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&ok| ok).count()
    }

    /// Depth at pixel `(u, v)` if it is in bounds and valid.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then_some(self.values[i])
    }

    /// Values of the valid pixels in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(&z, &ok)| ok.then_some(z))
    }

    /// Every depth multiplied by `factor`, mask unchanged.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|z| z * factor).collect(),
            self.valid.clone(),
        )
    }

    /// Same values with every pixel outside `(min_depth_m, max_depth_m]`
    /// marked invalid.
    pub fn apply_validity(&self, config: &EvalConfig) -> DepthMap {
        let valid = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&z, &ok)| {
                ok && z.is_finite() && z > config.min_depth_m && z <= config.max_depth_m
            })
            .collect();
        DepthMap {
            width: self.width,
            height: self.height,
            values: self.values.clone(),
            valid,
        }
    }

    /// Nearest-neighbor resampling to `width` x `height`. Target pixel
    /// centers are mapped back into the source grid and the containing
    /// source pixel (value and validity) is copied.
    pub fn resample_nearest(&self, width: usize, height: usize) -> Result<DepthMap> {
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        if self.is_empty() || width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "cannot resample {}x{} map to {width}x{height}",
                self.width, self.height
            )));
        }
        let src_index = |dst: usize, dst_len: usize, src_len: usize| {
            // ((dst + 0.5) * src_len / dst_len) floored, in exact integer math
            (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
        };
        let cols: Vec<usize> = (0..width)
            .map(|u| src_index(u, width, self.width))
            .collect();
        let mut values = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for v in 0..height {
            let row = src_index(v, height, self.height) * self.width;
            for &col in &cols {
                values.push(self.values[row + col]);
                valid.push(self.valid[row + col]);
            }
        }
        Ok(DepthMap {
            width,
            height,
            values,
            valid,
        })
    }
}

/// Ideal pinhole camera without distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "intrinsics must be finite, got {self:?}"
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Checks that the principal point lies inside a `width` x `height`
    /// image.
    pub fn check_image(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if !(self.cx >= 0.0 && self.cx < width as f64 && self.cy >= 0.0 && self.cy < height as f64)
        {
            return Err(Error::DimensionMismatch {
                expected: format!("principal point inside {width}x{height}"),
                found: format!("cx={} cy={}", self.cx, self.cy),
            });
        }
        Ok(())
    }

    /// Image coordinates `(u, v, z)` of a camera-frame point.
    pub fn project(&self, point: Point3) -> Result<(f64, f64, f64)> {
        let [x, y, z] = point;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cannot project point with z = {z}"
            )));
        }
        Ok((self.fx * x / z + self.cx, self.fy * y / z + self.cy, z))
    }

    /// Camera-frame point seen at pixel `(u, v)` with planar depth `z`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3 {
        [(u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z]
    }
}

/// Unordered set of 3D points in meters, optionally remembering the pixel
/// each point came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    pixels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "point cloud coordinates must be finite, got {p:?}"
            )));
        }
        Ok(PointCloud {
            points,
            pixels: None,
        })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Row-major source pixel index of each point, when produced by
    /// [`backproject`].
    pub fn pixels(&self) -> Option<&[usize]> {
        self.pixels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies `f` to every point.
    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> Result<PointCloud> {
        let mut out = PointCloud::new(self.points.iter().map(|&p| f(p)).collect())?;
        out.pixels = self.pixels.clone();
        Ok(out)
    }

    /// Length of the bounding-box diagonal of both clouds together.
    pub(crate) fn joint_extent(a: &[Point3], b: &[Point3]) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in a.iter().chain(b) {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if lo[0] > hi[0] {
            return 0.0;
        }
        (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Lifts every valid pixel to a 3D point, in row-major order.
pub fn backproject(depth: &DepthMap, intrinsics: &CameraIntrinsics) -> Result<PointCloud> {
    intrinsics.check_image(depth.width(), depth.height())?;
    let n = depth.valid_count();
    let mut points = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n);
    for (i, (&z, &ok)) in depth.values.iter().zip(&depth.valid).enumerate() {
        if !ok {
            continue;
        }
        let u = (i % depth.width) as f64;
        let v = (i / depth.width) as f64;
        points.push(intrinsics.unproject(u, v, z));
        pixels.push(i);
    }
    Ok(PointCloud {
        points,
        pixels: Some(pixels),
    })
}

/// Draws exactly `n` points: uniformly without replacement when the cloud
/// holds at least `n`, with replacement otherwise. A fixed seed always
/// selects the same indices for clouds of the same size.
pub fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::Degenerate("cannot subsample an empty cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if cloud.len() >= n {
        index::sample(&mut rng, cloud.len(), n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..cloud.len())).collect()
    };
    Ok(PointCloud {
        points: picks.iter().map(|&i| cloud.points[i]).collect(),
        pixels: cloud
            .pixels
            .as_ref()
            .map(|px| picks.iter().map(|&i| px[i]).collect()),
    })
}
