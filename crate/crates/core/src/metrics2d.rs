//! Per-pixel depth metrics: absrel, sqrel, rmse, rmse(log) and ratio
//! accuracy under each configured cutoff.

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::summation::{order_free_mean, sum, Accumulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics2D {
    pub absrel: f64,
    pub sqrel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    /// Fraction of pixels with `max(y/y*, y*/y) < cutoff`, one entry per
    /// cutoff in [`EvalConfig::delta_thresholds`].
    pub delta_acc: Vec<f64>,
    pub valid_pixel_count: u64,
}

/// Evaluates `pred` against `gt` over the pixels valid in both maps.
///
/// Maps must already share a resolution; see
/// [`DepthMap::resample_nearest`].
pub fn metrics_2d(pred: &DepthMap, gt: &DepthMap, config: &EvalConfig) -> Result<Metrics2D> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", gt.width(), gt.height()),
            found: format!("{}x{}", pred.width(), pred.height()),
        });
    }
    let mut abs_rel = Accumulator::new();
    let mut sq_rel = Accumulator::new();
    let mut sq = Accumulator::new();
    let mut sq_log = Accumulator::new();
    let mut under = vec![0u64; config.delta_thresholds.len()];
    let mut count = 0u64;

    let pairs = pred
        .values()
        .iter()
        .zip(pred.valid_mask())
        .zip(gt.values().iter().zip(gt.valid_mask()));
    for ((&y, &pred_ok), (&y_star, &gt_ok)) in pairs {
        if !(pred_ok && gt_ok) {
            continue;
        }
        let diff = y - y_star;
        abs_rel.add(diff.abs() / y_star);
        sq_rel.add(diff * diff / y_star);
        sq.add(diff * diff);
        let log_diff = y.ln() - y_star.ln();
        sq_log.add(log_diff * log_diff);
        let ratio = (y / y_star).max(y_star / y);
        for (n, &cutoff) in under.iter_mut().zip(&config.delta_thresholds) {
            if ratio < cutoff {
                *n += 1;
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Degenerate(
            "prediction and ground truth share no valid pixel".into(),
        ));
    }
    let n = count as f64;
    Ok(Metrics2D {
        absrel: abs_rel.total() / n,
        sqrel: sq_rel.total() / n,
        rmse: (sq.total() / n).sqrt(),
        rmse_log: (sq_log.total() / n).sqrt(),
        delta_acc: under.iter().map(|&k| k as f64 / n).collect(),
        valid_pixel_count: count,
    })
}

fn check_records(records: &[Metrics2D]) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot aggregate an empty list of metrics".into()))?;
    let k = first.delta_acc.len();
    if records.iter().any(|r| r.delta_acc.len() != k) {
        return Err(Error::InvalidInput(
            "records disagree on the number of delta cutoffs".into(),
        ));
    }
    Ok(k)
}

/// Unweighted mean of each field across samples (the headline
/// aggregate). Pixel counts are summed. The result does not depend on the
/// order of `records`.
pub fn aggregate_2d(records: &[Metrics2D]) -> Result<Metrics2D> {
    let k = check_records(records)?;
    let mean_of = |f: &dyn Fn(&Metrics2D) -> f64| {
        order_free_mean(&records.iter().map(f).collect::<Vec<_>>())
    };
    Ok(Metrics2D {
        absrel: mean_of(&|r| r.absrel),
        sqrel: mean_of(&|r| r.sqrel),
        rmse: mean_of(&|r| r.rmse),
        rmse_log: mean_of(&|r| r.rmse_log),
        delta_acc: (0..k).map(|i| mean_of(&|r| r.delta_acc[i])).collect(),
        valid_pixel_count: records.iter().map(|r| r.valid_pixel_count).sum(),
    })
}

/// Pools every pixel of every sample into a single mean, i.e. each sample
/// weighted by its valid pixel count. Root-mean-square fields are pooled
/// before the square root.
pub fn aggregate_2d_pooled(records: &[Metrics2D]) -> Result<Metrics2D> {
    let k = check_records(records)?;
    let total: u64 = records.iter().map(|r| r.valid_pixel_count).sum();
    if total == 0 {
        return Err(Error::Degenerate("no valid pixels to pool".into()));
    }
    let mut sorted: Vec<&Metrics2D> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.absrel
            .total_cmp(&b.absrel)
            .then(a.valid_pixel_count.cmp(&b.valid_pixel_count))
            .then(a.rmse.total_cmp(&b.rmse))
    });
    let n = total as f64;
    let pooled = |f: &dyn Fn(&Metrics2D) -> f64| {
        sum(sorted.iter().map(|r| f(r) * r.valid_pixel_count as f64)) / n
    };
    Ok(Metrics2D {
        absrel: pooled(&|r| r.absrel),
        sqrel: pooled(&|r| r.sqrel),
        rmse: pooled(&|r| r.rmse * r.rmse).sqrt(),
        rmse_log: pooled(&|r| r.rmse_log * r.rmse_log).sqrt(),
        delta_acc: (0..k).map(|i| pooled(&|r| r.delta_acc[i])).collect(),
        valid_pixel_count: total,
    })
}
