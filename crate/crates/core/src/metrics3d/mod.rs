//! Point-cloud metrics: Chamfer distance, Earth Mover's distance,
//! completeness, precision/recall/F-score and point-based IoU.
//!
//! `g` is always the ground-truth cloud and `r` the reconstruction.

pub mod auction;
pub mod hungarian;
mod kdtree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::depth::{subsample, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::summation::sum;

pub use kdtree::NearestNeighborIndex;

/// Largest cloud size accepted by [`emd_exact`].
pub const EXACT_EMD_CAP: usize = 512;

/// The auction starts at `epsilon = extent / INITIAL_EPSILON_DIVISOR`,
/// where `extent` is the bounding-box diagonal of both clouds.
pub const INITIAL_EPSILON_DIVISOR: f64 = 8.0;

/// The auction stops after the first phase whose epsilon is below
/// `threshold / TARGET_EPSILON_DIVISOR`.
pub const TARGET_EPSILON_DIVISOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics3D {
    /// Squared meters; per-direction means or raw sums per config.
    pub chamfer: f64,
    /// Mean per-point transport cost from ground truth to prediction.
    pub emd: f64,
    /// Mean per-point transport cost from prediction to ground truth.
    pub completeness: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub iou: f64,
    pub threshold_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub iou: f64,
}

/// A bijection between two equal-size point sets and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `forward[i]` is the target index matched to source point `i`.
    pub forward: Vec<usize>,
    /// Sum of matched Euclidean distances, meters.
    pub cost: f64,
}

impl Assignment {
    fn from_matching(source: &[Point3], target: &[Point3], forward: Vec<usize>) -> Self {
        let cost = sum(
            forward
                .iter()
                .enumerate()
                .map(|(i, &j)| distance(&source[i], &target[j])),
        );
        Assignment { forward, cost }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Cost per matched pair.
    pub fn mean_cost(&self) -> f64 {
        if self.forward.is_empty() {
            0.0
        } else {
            self.cost / self.forward.len() as f64
        }
    }
}

#[inline]
fn distance(a: &Point3, b: &Point3) -> f64 {
    kdtree::squared_distance(a, b).sqrt()
}

fn require_non_empty(cloud: &PointCloud, role: &str) -> Result<()> {
    if cloud.is_empty() {
        Err(Error::Degenerate(format!("{role} point cloud is empty")))
    } else {
        Ok(())
    }
}

fn nn_squared(query: &[Point3], target: &[Point3]) -> Result<Vec<f64>> {
    let index = NearestNeighborIndex::build(target)?;
    Ok(query
        .par_iter()
        .with_min_len(1024)
        .map(|q| index.nearest_squared_distance(q))
        .collect())
}

/// Euclidean distance from each query point to its nearest target point.
pub fn nn_distances(query: &PointCloud, target: &PointCloud) -> Result<Vec<f64>> {
    require_non_empty(target, "target")?;
    Ok(nn_squared(query.points(), target.points())?
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

/// Squared nearest-neighbor distances in both directions.
struct NearestPairs {
    g_to_r: Vec<f64>,
    r_to_g: Vec<f64>,
}

impl NearestPairs {
    fn compute(g: &PointCloud, r: &PointCloud) -> Result<Self> {
        require_non_empty(g, "ground-truth")?;
        require_non_empty(r, "reconstructed")?;
        Ok(NearestPairs {
            g_to_r: nn_squared(g.points(), r.points())?,
            r_to_g: nn_squared(r.points(), g.points())?,
        })
    }

    fn chamfer(&self, normalized: bool) -> f64 {
        let forward = sum(self.g_to_r.iter().copied());
        let backward = sum(self.r_to_g.iter().copied());
        if normalized {
            forward / self.g_to_r.len() as f64 + backward / self.r_to_g.len() as f64
        } else {
            forward + backward
        }
    }

    fn fscore(&self, t: f64) -> FScore {
        let within =
            |d: &[f64]| d.iter().filter(|&&x| x.sqrt() < t).count() as f64 / d.len() as f64;
        score_from(within(&self.r_to_g), within(&self.g_to_r))
    }
}

fn score_from(precision: f64, recall: f64) -> FScore {
    let s = precision + recall;
    let fscore = if s > 0.0 {
        2.0 * precision * recall / s
    } else {
        0.0
    };
    let union = s - precision * recall;
    let iou = if union > 0.0 {
        precision * recall / union
    } else {
        0.0
    };
    FScore {
        precision,
        recall,
        fscore,
        iou,
    }
}

/// Chamfer distance over squared nearest-neighbor distances, as per-direction
/// means when `normalized`, raw sums otherwise. Symmetric in its arguments.
pub fn chamfer(g: &PointCloud, r: &PointCloud, normalized: bool) -> Result<f64> {
    Ok(NearestPairs::compute(g, r)?.chamfer(normalized))
}

/// Precision, recall, F-score and IoU at threshold `t` (strict `<`).
pub fn fscore_suite(g: &PointCloud, r: &PointCloud, t: f64) -> Result<FScore> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "threshold must be positive, got {t}"
        )));
    }
    Ok(NearestPairs::compute(g, r)?.fscore(t))
}

fn cost_matrix(rows: &[Point3], cols: &[Point3]) -> Vec<f64> {
    let n = cols.len();
    let mut cost = vec![0.0; rows.len() * n];
    cost.par_chunks_mut(n.max(1))
        .zip(rows.par_iter())
        .for_each(|(out, a)| {
            for (c, b) in out.iter_mut().zip(cols) {
                *c = distance(a, b);
            }
        });
    cost
}

/// Optimal bijection from `g` to `r` by the Hungarian method. Limited to
/// equal-size clouds of at most [`EXACT_EMD_CAP`] points.
pub fn emd_exact(g: &PointCloud, r: &PointCloud) -> Result<Assignment> {
    if g.len() != r.len() || g.len() > EXACT_EMD_CAP {
        return Err(Error::ExactSolverLimit {
            left: g.len(),
            right: r.len(),
            cap: EXACT_EMD_CAP,
        });
    }
    let n = g.len();
    let forward = hungarian::solve(&cost_matrix(g.points(), r.points()), n);
    Ok(Assignment::from_matching(g.points(), r.points(), forward))
}

/// Feasible bijection from `source` to `target` found by the
/// epsilon-scaling auction; its cost is never below the optimum and exceeds
/// it by less than `len * threshold / 10`.
pub fn auction_assignment(
    source: &PointCloud,
    target: &PointCloud,
    threshold: f64,
) -> Result<Assignment> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} target points", source.len()),
            found: format!("{}", target.len()),
        });
    }
    require_non_empty(source, "source")?;
    let (s, t) = (source.points(), target.points());
    let n = s.len();
    let extent = PointCloud::joint_extent(s, t);
    if extent == 0.0 {
        // every point coincides; any bijection costs nothing
        return Ok(Assignment::from_matching(s, t, (0..n).collect()));
    }
    let outcome = auction::solve(
        &cost_matrix(s, t),
        n,
        extent / INITIAL_EPSILON_DIVISOR,
        threshold / TARGET_EPSILON_DIVISOR,
    )?;
    Ok(Assignment::from_matching(s, t, outcome.assignment))
}

fn sampled_pair(
    g: &PointCloud,
    r: &PointCloud,
    seed: u64,
    config: &EvalConfig,
) -> Result<(PointCloud, PointCloud)> {
    require_non_empty(g, "ground-truth")?;
    require_non_empty(r, "reconstructed")?;
    // Same seed on both sides: identical clouds yield identical samples.
    Ok((
        subsample(g, config.emd_sample_count, seed)?,
        subsample(r, config.emd_sample_count, seed)?,
    ))
}

/// Approximate EMD: both clouds subsampled to `emd_sample_count` points,
/// then the mean per-point cost of the auction bijection from `g` to `r`.
pub fn emd_approx(g: &PointCloud, r: &PointCloud, seed: u64, config: &EvalConfig) -> Result<f64> {
    let (gs, rs) = sampled_pair(g, r, seed, config)?;
    Ok(auction_assignment(&gs, &rs, config.fscore_threshold_m)?.mean_cost())
}

/// Completeness: the same sampled transport problem solved in the
/// direction `r -> g`, mean per point.
pub fn completeness(
    g: &PointCloud,
    r: &PointCloud,
    seed: u64,
    config: &EvalConfig,
) -> Result<f64> {
    let (gs, rs) = sampled_pair(g, r, seed, config)?;
    Ok(auction_assignment(&rs, &gs, config.fscore_threshold_m)?.mean_cost())
}

/// Full 3D suite of a predicted cloud against the ground-truth cloud.
pub fn metrics_3d(pred: &PointCloud, gt: &PointCloud, config: &EvalConfig) -> Result<Metrics3D> {
    let pairs = NearestPairs::compute(gt, pred)?;
    let t = config.fscore_threshold_m;
    let scores = pairs.fscore(t);
    let (gs, rs) = sampled_pair(gt, pred, config.rng_seed, config)?;
    let emd = auction_assignment(&gs, &rs, t)?.mean_cost();
    let completeness = auction_assignment(&rs, &gs, t)?.mean_cost();
    Ok(Metrics3D {
        chamfer: pairs.chamfer(config.chamfer_normalized),
        emd,
        completeness,
        precision: scores.precision,
        recall: scores.recall,
        fscore: scores.fscore,
        iou: scores.iou,
        threshold_m: t,
    })
}

/// Unweighted, order-independent mean of every field across samples.
pub fn aggregate_3d(records: &[Metrics3D]) -> Result<Metrics3D> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot aggregate an empty list of metrics".into()))?;
    if records.iter().any(|r| r.threshold_m != first.threshold_m) {
        return Err(Error::InvalidInput(
            "records were evaluated at different thresholds".into(),
        ));
    }
    let mean_of = |f: fn(&Metrics3D) -> f64| {
        crate::summation::order_free_mean(&records.iter().map(f).collect::<Vec<_>>())
    };
    Ok(Metrics3D {
        chamfer: mean_of(|m| m.chamfer),
        emd: mean_of(|m| m.emd),
        completeness: mean_of(|m| m.completeness),
        precision: mean_of(|m| m.precision),
        recall: mean_of(|m| m.recall),
        fscore: mean_of(|m| m.fscore),
        iou: mean_of(|m| m.iou),
        threshold_m: first.threshold_m,
    })
}
