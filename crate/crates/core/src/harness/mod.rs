//! Batch evaluation: load, validate, resample, score in 2D, back-project,
//! score in 3D, aggregate.
//!
//! Samples are evaluated on a dedicated worker pool and collected in
//! manifest order, so reports do not depend on scheduling.

pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{median_plane, oracle_nn, OracleOptions, RetrievalResult};
use crate::config::EvalConfig;
use crate::depth::{backproject, CameraIntrinsics, DepthMap};
use crate::error::{Error, Result};
use crate::io::report::Aggregate;
use crate::io::{
    read_depth, read_intrinsics, write_depth_pfm, write_intrinsics, ManifestEntry, MetricRecord,
    Report, SampleManifest, SampleOutcome, StageTimings,
};
use crate::metrics2d::{aggregate_2d, aggregate_2d_pooled, metrics_2d, Metrics2D};
use crate::metrics3d::{aggregate_3d, metrics_3d, Metrics3D};

pub use synth::{generate_synthetic, PredictionKind, SceneKind, SynthParams, SyntheticSample};

pub const MEDIAN_PLANE: &str = "median_plane";
pub const ORACLE_NN: &str = "oracle_nn";

/// Everything an evaluation run needs, validated up front.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub manifest: SampleManifest,
    pub config: EvalConfig,
    pub workers: usize,
    pub include_timings: bool,
}

impl RunPlan {
    pub fn new(manifest: SampleManifest, config: EvalConfig, workers: usize) -> Result<Self> {
        config.validate()?;
        if workers == 0 {
            return Err(Error::InvalidInput("worker count must be at least 1".into()));
        }
        Ok(RunPlan {
            manifest,
            config,
            workers,
            include_timings: false,
        })
    }

    fn png_scale(&self) -> u32 {
        self.manifest
            .png_depth_scale
            .unwrap_or(self.config.png_depth_scale)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Scores `pred` against `gt`, both seen through `intrinsics` at the
/// ground truth's resolution.
///
/// Both maps are clamped to the configured depth range and the prediction
/// is resampled to the ground truth's size. 2D metrics use pixels valid in
/// both; each cloud keeps its own map's validity.
pub fn evaluate_pair(
    pred: &DepthMap,
    gt: &DepthMap,
    intrinsics: &CameraIntrinsics,
    config: &EvalConfig,
) -> Result<(Metrics2D, Metrics3D)> {
    let mut timing = StageTimings::default();
    evaluate_pair_timed(pred, gt, intrinsics, config, &mut timing)
}

fn evaluate_pair_timed(
    pred: &DepthMap,
    gt: &DepthMap,
    intrinsics: &CameraIntrinsics,
    config: &EvalConfig,
    timing: &mut StageTimings,
) -> Result<(Metrics2D, Metrics3D)> {
    let start = Instant::now();
    let gt = gt.apply_validity(config);
    let pred = pred
        .resample_nearest(gt.width(), gt.height())?
        .apply_validity(config);
    let m2 = metrics_2d(&pred, &gt, config)?;
    timing.metrics_2d_ms = elapsed_ms(start);

    let start = Instant::now();
    let gt_cloud = backproject(&gt, intrinsics)?;
    let pred_cloud = backproject(&pred, intrinsics)?;
    timing.backproject_ms = elapsed_ms(start);

    let start = Instant::now();
    let m3 = metrics_3d(&pred_cloud, &gt_cloud, config)?;
    timing.metrics_3d_ms = elapsed_ms(start);
    Ok((m2, m3))
}

enum Prediction<'a> {
    FromManifest,
    MedianPlane,
    Retrieved(&'a [(String, DepthMap)]),
}

struct SampleResult {
    retrieval: Option<RetrievalResult>,
    metrics: (Metrics2D, Metrics3D),
}

fn evaluate_entry(
    entry: &ManifestEntry,
    prediction: &Prediction<'_>,
    plan: &RunPlan,
    oracle: OracleOptions,
    timing: &mut StageTimings,
) -> Result<SampleResult> {
    let config = &plan.config;
    let start = Instant::now();
    let gt = read_depth(&entry.gt_path, plan.png_scale())?;
    let intrinsics = read_intrinsics(&entry.intrinsics_ref)?;
    let (pred, retrieval) = match prediction {
        Prediction::FromManifest => {
            let path = entry.pred_path.as_ref().ok_or_else(|| {
                Error::Manifest(format!("sample {:?} has no pred_path", entry.sample_id))
            })?;
            (read_depth(path, plan.png_scale())?, None)
        }
        Prediction::MedianPlane => (median_plane(&gt.apply_validity(config))?, None),
        Prediction::Retrieved(train) => {
            let query = gt.apply_validity(config);
            let r = oracle_nn(&entry.sample_id, &query, train, config, oracle)?;
            (train[r.best_index].1.clone(), Some(r))
        }
    };
    timing.load_ms = elapsed_ms(start);
    let metrics = evaluate_pair_timed(&pred, &gt, &intrinsics, config, timing)?;
    Ok(SampleResult { retrieval, metrics })
}

fn run(
    plan: &RunPlan,
    prediction: Prediction<'_>,
    oracle: OracleOptions,
    baseline: Option<&str>,
    reference_dataset: Option<String>,
) -> Result<Report> {
    let digest = plan.config.digest();
    let records: Vec<MetricRecord> = plan.pool()?.install(|| {
        plan.manifest
            .entries
            .par_iter()
            .map(|entry| {
                let mut timing = StageTimings::default();
                let result = evaluate_entry(entry, &prediction, plan, oracle, &mut timing);
                let (retrieval, outcome) = match result {
                    Ok(SampleResult {
                        retrieval,
                        metrics: (metrics_2d, metrics_3d),
                    }) => (
                        retrieval,
                        SampleOutcome::Evaluated {
                            metrics_2d,
                            metrics_3d,
                        },
                    ),
                    Err(e) => {
                        log::warn!("sample {} failed: {e}", entry.sample_id);
                        (None, SampleOutcome::Failed { reason: e.to_string() })
                    }
                };
                MetricRecord {
                    sample_id: entry.sample_id.clone(),
                    retrieval,
                    outcome,
                    timing,
                    config_digest: digest.clone(),
                }
            })
            .collect()
    });
    Ok(Report {
        dataset_name: plan.manifest.dataset_name.clone(),
        baseline: baseline.map(str::to_string),
        reference_dataset,
        aggregate: aggregate(&records)?,
        config: plan.config.clone(),
        records,
        include_timings: plan.include_timings,
    })
}

fn aggregate(records: &[MetricRecord]) -> Result<Option<Aggregate>> {
    let (m2, m3): (Vec<Metrics2D>, Vec<Metrics3D>) = records
        .iter()
        .filter_map(|r| match &r.outcome {
            SampleOutcome::Evaluated {
                metrics_2d,
                metrics_3d,
            } => Some((metrics_2d.clone(), metrics_3d.clone())),
            SampleOutcome::Failed { .. } => None,
        })
        .unzip();
    if m2.is_empty() {
        return Ok(None);
    }
    Ok(Some(Aggregate {
        metrics_2d: aggregate_2d(&m2)?,
        metrics_2d_pooled: aggregate_2d_pooled(&m2)?,
        metrics_3d: aggregate_3d(&m3)?,
    }))
}

/// Scores every manifest prediction against its ground truth. Per-sample
/// failures become failed rows; manifest problems abort before any work.
pub fn evaluate(plan: &RunPlan) -> Result<Report> {
    plan.manifest.require_predictions()?;
    run(plan, Prediction::FromManifest, OracleOptions::default(), None, None)
}

/// Scores the median-plane predictor built from each ground truth.
pub fn run_median_plane(plan: &RunPlan) -> Result<Report> {
    run(
        plan,
        Prediction::MedianPlane,
        OracleOptions::default(),
        Some(MEDIAN_PLANE),
        None,
    )
}

/// For each sample of `plan.manifest`, retrieves the ground-truth map of
/// `train` with the lowest absrel and scores it as the prediction.
pub fn run_oracle_nn(
    plan: &RunPlan,
    train: &SampleManifest,
    options: OracleOptions,
) -> Result<Report> {
    let scale = train.png_depth_scale.unwrap_or(plan.config.png_depth_scale);
    let candidates: Vec<(String, DepthMap)> = plan.pool()?.install(|| {
        train
            .entries
            .par_iter()
            .map(|e| {
                let d = read_depth(&e.gt_path, scale)?;
                Ok((e.sample_id.clone(), d.apply_validity(&plan.config)))
            })
            .collect::<Result<_>>()
    })?;
    run(
        plan,
        Prediction::Retrieved(&candidates),
        options,
        Some(ORACLE_NN),
        Some(train.dataset_name.clone()),
    )
}

/// Writes `count` synthetic samples (seeds `seed..seed + count`) as PFM
/// files plus intrinsics and a manifest into `dir`. Returns the manifest
/// path.
pub fn write_synthetic_dataset(
    dir: &Path,
    kind: SceneKind,
    prediction: PredictionKind,
    params: &SynthParams,
    seed: u64,
    count: usize,
) -> Result<PathBuf> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let sample = generate_synthetic(kind, prediction, params, seed + i)?;
        let id = format!("{kind}_{:04}", seed + i);
        let gt = format!("{id}_gt.pfm");
        let pred = format!("{id}_pred.pfm");
        let k = format!("{id}_intrinsics.txt");
        write_depth_pfm(&dir.join(&gt), &sample.gt)?;
        write_depth_pfm(&dir.join(&pred), &sample.pred)?;
        write_intrinsics(&dir.join(&k), &sample.intrinsics)?;
        entries.push(ManifestEntry {
            sample_id: id,
            pred_path: Some(pred.into()),
            gt_path: gt.into(),
            intrinsics_ref: k.into(),
        });
    }
    let manifest = SampleManifest {
        dataset_name: format!("synthetic_{kind}"),
        png_depth_scale: None,
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthParams {
        SynthParams::with_size(64, 48)
    }

    #[test]
    fn pair_of_identical_maps() {
        let s = generate_synthetic(SceneKind::BoxRoom, PredictionKind::Copy, &small(), 0).unwrap();
        let (m2, m3) = evaluate_pair(&s.pred, &s.gt, &s.intrinsics, &EvalConfig::default()).unwrap();
        assert_eq!(m2.absrel, 0.0);
        assert_eq!(m3.chamfer, 0.0);
        assert_eq!(m3.fscore, 1.0);
        assert!(m3.emd <= 1e-9);
    }

    #[test]
    fn prediction_resampled_to_gt() {
        let s = generate_synthetic(SceneKind::Plane, PredictionKind::Copy, &small(), 0).unwrap();
        let small_pred = DepthMap::constant(16, 12, 3.0).unwrap();
        let (m2, m3) = evaluate_pair(&small_pred, &s.gt, &s.intrinsics, &EvalConfig::default()).unwrap();
        assert_eq!(m2.valid_pixel_count, 64 * 48);
        assert_eq!(m3.fscore, 1.0);
    }

    #[test]
    fn median_plane_on_two_layers() {
        // lower median is the near layer, so the far half errs by 2/4
        let s = generate_synthetic(SceneKind::TwoLayer, PredictionKind::MedianPlane, &small(), 0).unwrap();
        let (m2, m3) = evaluate_pair(&s.pred, &s.gt, &s.intrinsics, &EvalConfig::default()).unwrap();
        assert_eq!(m2.absrel, 0.25);
        assert_eq!(m3.fscore, 0.5);
    }

    #[test]
    fn zero_workers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_synthetic_dataset(dir.path(), SceneKind::Plane, PredictionKind::Copy, &small(), 0, 1).unwrap();
        let manifest = SampleManifest::load(&m).unwrap();
        assert!(RunPlan::new(manifest, EvalConfig::default(), 0).is_err());
    }
}
