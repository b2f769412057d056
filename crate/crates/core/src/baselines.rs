//! Reference predictors that score well on per-pixel metrics without
//! recovering scene structure: a constant plane at the ground-truth median
//! and retrieval of the closest training depth map by absrel.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::metrics2d::metrics_2d;

/// Constant prediction at the lower median of `gt`'s valid depths, with
/// `gt`'s validity mask.
pub fn median_plane(gt: &DepthMap) -> Result<DepthMap> {
    let mut valid: Vec<f64> = gt.valid_values().collect();
    if valid.is_empty() {
        return Err(Error::Degenerate(
            "ground truth has no valid pixel to take a median of".into(),
        ));
    }
    let mid = (valid.len() - 1) / 2;
    let (_, &mut median, _) = valid.select_nth_unstable_by(mid, f64::total_cmp);
    let values = gt
        .valid_mask()
        .iter()
        .map(|&ok| if ok { median } else { 0.0 })
        .collect();
    DepthMap::new(gt.width(), gt.height(), values, gt.valid_mask().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub best_train_id: String,
    /// Position of the winner in the candidate list.
    pub best_index: usize,
    /// absrel of the winner as prediction against the query as ground truth.
    pub best_absrel: f64,
    /// Candidates sharing at least one valid pixel with the query.
    pub candidates_evaluated: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleOptions {
    /// When set, candidates are ranked on maps downsampled by this factor
    /// (nearest neighbor) and only the winner is scored at full
    /// resolution. The winner is then not guaranteed to be the exact
    /// minimizer.
    pub downsample_factor: Option<usize>,
}

fn at_resolution(depth: &DepthMap, width: usize, height: usize) -> Result<Cow<'_, DepthMap>> {
    if depth.width() == width && depth.height() == height {
        Ok(Cow::Borrowed(depth))
    } else {
        Ok(Cow::Owned(depth.resample_nearest(width, height)?))
    }
}

/// absrel of every candidate against `query`, `None` where they share no
/// valid pixel.
fn scan(query: &DepthMap, train: &[(String, DepthMap)], config: &EvalConfig) -> Result<Vec<Option<f64>>> {
    train
        .par_iter()
        .map(|(_, cand)| {
            let cand = at_resolution(cand, query.width(), query.height())?;
            match metrics_2d(&cand, query, config) {
                Ok(m) => Ok(Some(m.absrel)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Lowest absrel, first index among equals.
fn pick(scores: &[Option<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(a) = *s {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((i, a));
            }
        }
    }
    best
}

/// Retrieves the training depth map that, used as the prediction, has the
/// lowest absrel against `query`. Exhaustive; ties go to the lowest index.
/// Candidates are resampled to the query's resolution first.
pub fn oracle_nn(
    query_id: &str,
    query: &DepthMap,
    train: &[(String, DepthMap)],
    config: &EvalConfig,
    options: OracleOptions,
) -> Result<RetrievalResult> {
    if train.is_empty() {
        return Err(Error::InvalidInput("oracle retrieval needs at least one candidate".into()));
    }
    let (best_index, best_absrel, evaluated) = match options.downsample_factor {
        None | Some(0) | Some(1) => {
            let scores = scan(query, train, config)?;
            let evaluated = scores.iter().flatten().count();
            let (i, a) = pick(&scores).ok_or_else(|| no_candidate(query_id))?;
            (i, a, evaluated)
        }
        Some(f) => {
            let small = query.resample_nearest(
                query.width().div_ceil(f),
                query.height().div_ceil(f),
            )?;
            let scores = scan(&small, train, config)?;
            let evaluated = scores.iter().flatten().count();
            let (i, _) = pick(&scores).ok_or_else(|| no_candidate(query_id))?;
            let cand = at_resolution(&train[i].1, query.width(), query.height())?;
            (i, metrics_2d(&cand, query, config)?.absrel, evaluated)
        }
    };
    Ok(RetrievalResult {
        query_id: query_id.to_string(),
        best_train_id: train[best_index].0.clone(),
        best_index,
        best_absrel,
        candidates_evaluated: evaluated,
    })
}

fn no_candidate(query_id: &str) -> Error {
    Error::Degenerate(format!(
        "no training candidate shares a valid pixel with query {query_id}"
    ))
}
