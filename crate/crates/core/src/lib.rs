//! Evaluation of monocular depth predictions with per-pixel 2D metrics and
//! point-cloud 3D metrics.
//!
//! Depth maps are back-projected through a pinhole camera
//! ([`depth::backproject`]) and compared as point clouds with Chamfer
//! distance, Earth Mover's distance, completeness, F-score and point-based
//! IoU ([`metrics3d`]), alongside absrel, rmse and ratio accuracy
//! ([`metrics2d`]). [`baselines`] provides the median-plane and oracle
//! nearest-neighbour reference predictors, [`io`] the file formats and
//! [`harness`] the batch evaluation driver.

pub mod baselines;
pub mod config;
pub mod depth;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics2d;
pub mod metrics3d;
pub mod summation;

pub use baselines::{median_plane, oracle_nn, OracleOptions, RetrievalResult};
pub use config::EvalConfig;
pub use depth::{backproject, subsample, CameraIntrinsics, DepthMap, Point3, PointCloud};
pub use error::{Error, Result};
pub use harness::{evaluate, evaluate_pair, run_median_plane, run_oracle_nn, RunPlan};
pub use io::{write_report, Report, ReportFormat, SampleManifest};
pub use metrics2d::{aggregate_2d, aggregate_2d_pooled, metrics_2d, Metrics2D};
pub use metrics3d::{
    chamfer, completeness, emd_approx, emd_exact, fscore_suite, metrics_3d, nn_distances,
    Assignment, FScore, Metrics3D, NearestNeighborIndex,
};
