//! Machine-readable evaluation reports.
//!
//! Every number is rounded to 9 significant digits and written in its
//! shortest round-trip form, and fields are emitted in a fixed order, so
//! identical runs produce byte-identical files.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::RetrievalResult;
use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::metrics2d::Metrics2D;
use crate::metrics3d::Metrics3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidInput(format!(
                "unknown report format {other:?}, expected json or csv"
            ))),
        }
    }
}

/// Wall-clock time spent in each stage of one sample, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub load_ms: f64,
    pub metrics_2d_ms: f64,
    pub backproject_ms: f64,
    pub metrics_3d_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    Evaluated {
        metrics_2d: Metrics2D,
        metrics_3d: Metrics3D,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub sample_id: String,
    pub retrieval: Option<RetrievalResult>,
    pub outcome: SampleOutcome,
    pub timing: StageTimings,
    pub config_digest: String,
}

impl MetricRecord {
    pub fn is_failed(&self) -> bool {
        matches!(self.outcome, SampleOutcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Per-sample metrics averaged over samples.
    pub metrics_2d: Metrics2D,
    /// All valid pixels of all samples pooled into one mean.
    pub metrics_2d_pooled: Metrics2D,
    pub metrics_3d: Metrics3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub dataset_name: String,
    /// Baseline predictor that produced the predictions, if any.
    pub baseline: Option<String>,
    /// Dataset the oracle retrieval drew its candidates from.
    pub reference_dataset: Option<String>,
    pub config: EvalConfig,
    pub records: Vec<MetricRecord>,
    /// `None` when every sample failed.
    pub aggregate: Option<Aggregate>,
    /// Timings vary between runs; they are left out unless requested.
    pub include_timings: bool,
}

impl Report {
    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_failed()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&JsonReport::from(self))?;
        text.push('\n');
        Ok(text)
    }

    pub fn to_csv(&self) -> Result<String> {
        let k = self.config.delta_thresholds.len();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<String> = [
            "sample_id",
            "status",
            "baseline",
            "best_train_id",
            "best_absrel",
            "candidates_evaluated",
            "absrel",
            "sqrel",
            "rmse",
            "rmse_log",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=k).map(|i| format!("delta_{i}")));
        header.extend(
            [
                "valid_pixel_count",
                "chamfer",
                "emd",
                "completeness",
                "precision",
                "recall",
                "fscore",
                "iou",
                "threshold_m",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        if self.include_timings {
            header.extend(
                ["load_ms", "metrics_2d_ms", "backproject_ms", "metrics_3d_ms"]
                    .iter()
                    .map(|s| s.to_string()),
            );
        }
        header.extend(["config_digest".to_string(), "error".to_string()]);
        w.write_record(&header).map_err(csv_err)?;

        let baseline = self.baseline.clone().unwrap_or_default();
        let digest = self.config.digest();
        for r in &self.records {
            let mut row = vec![
                r.sample_id.clone(),
                if r.is_failed() { "failed" } else { "ok" }.to_string(),
                baseline.clone(),
            ];
            match &r.retrieval {
                Some(q) => row.extend([
                    q.best_train_id.clone(),
                    num(q.best_absrel),
                    q.candidates_evaluated.to_string(),
                ]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            let error = match &r.outcome {
                SampleOutcome::Evaluated {
                    metrics_2d,
                    metrics_3d,
                } => {
                    push_metrics(&mut row, metrics_2d, metrics_3d);
                    String::new()
                }
                SampleOutcome::Failed { reason } => {
                    row.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS + k));
                    reason.clone()
                }
            };
            if self.include_timings {
                let t = &r.timing;
                row.extend([t.load_ms, t.metrics_2d_ms, t.backproject_ms, t.metrics_3d_ms].map(num));
            }
            row.extend([r.config_digest.clone(), error]);
            w.write_record(&row).map_err(csv_err)?;
        }

        let mut row = vec!["AGGREGATE".to_string(), String::new(), baseline];
        row.extend([String::new(), String::new(), String::new()]);
        match &self.aggregate {
            Some(a) => push_metrics(&mut row, &a.metrics_2d, &a.metrics_3d),
            None => row.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS + k)),
        }
        if self.include_timings {
            row.extend(std::iter::repeat_n(String::new(), 4));
        }
        row.extend([digest, String::new()]);
        w.write_record(&row).map_err(csv_err)?;

        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Metric columns besides the delta cutoffs.
const METRIC_COLUMNS: usize = 13;

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn push_metrics(row: &mut Vec<String>, m2: &Metrics2D, m3: &Metrics3D) {
    row.extend([m2.absrel, m2.sqrel, m2.rmse, m2.rmse_log].map(num));
    row.extend(m2.delta_acc.iter().map(|&d| num(d)));
    row.push(m2.valid_pixel_count.to_string());
    row.extend(
        [
            m3.chamfer,
            m3.emd,
            m3.completeness,
            m3.precision,
            m3.recall,
            m3.fscore,
            m3.iou,
            m3.threshold_m,
        ]
        .map(num),
    );
}

/// Rounds to 9 significant digits. Non-finite values pass through.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Shortest text that round-trips the 9-digit rounding of `x`.
fn num(x: f64) -> String {
    match serde_json::Number::from_f64(round_sig9(x)) {
        Some(n) => n.to_string(),
        None => "NaN".to_string(),
    }
}

/// Serializes an `f64` rounded to 9 significant digits, `null` if not
/// finite.
fn ser_sig9<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(round_sig9(*x))
    } else {
        s.serialize_none()
    }
}

fn ser_sig9_vec<S: serde::Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&(x.is_finite().then(|| round_sig9(*x))))?;
    }
    seq.end()
}

#[derive(Serialize)]
struct JsonMetrics2D<'a> {
    #[serde(serialize_with = "ser_sig9")]
    absrel: f64,
    #[serde(serialize_with = "ser_sig9")]
    sqrel: f64,
    #[serde(serialize_with = "ser_sig9")]
    rmse: f64,
    #[serde(serialize_with = "ser_sig9")]
    rmse_log: f64,
    #[serde(serialize_with = "ser_sig9_vec")]
    delta_acc: &'a [f64],
    valid_pixel_count: u64,
}

impl<'a> From<&'a Metrics2D> for JsonMetrics2D<'a> {
    fn from(m: &'a Metrics2D) -> Self {
        JsonMetrics2D {
            absrel: m.absrel,
            sqrel: m.sqrel,
            rmse: m.rmse,
            rmse_log: m.rmse_log,
            delta_acc: &m.delta_acc,
            valid_pixel_count: m.valid_pixel_count,
        }
    }
}

#[derive(Serialize)]
struct JsonMetrics3D {
    #[serde(serialize_with = "ser_sig9")]
    chamfer: f64,
    #[serde(serialize_with = "ser_sig9")]
    emd: f64,
    #[serde(serialize_with = "ser_sig9")]
    completeness: f64,
    #[serde(serialize_with = "ser_sig9")]
    precision: f64,
    #[serde(serialize_with = "ser_sig9")]
    recall: f64,
    #[serde(serialize_with = "ser_sig9")]
    fscore: f64,
    #[serde(serialize_with = "ser_sig9")]
    iou: f64,
    #[serde(serialize_with = "ser_sig9")]
    threshold_m: f64,
}

impl From<&Metrics3D> for JsonMetrics3D {
    fn from(m: &Metrics3D) -> Self {
        JsonMetrics3D {
            chamfer: m.chamfer,
            emd: m.emd,
            completeness: m.completeness,
            precision: m.precision,
            recall: m.recall,
            fscore: m.fscore,
            iou: m.iou,
            threshold_m: m.threshold_m,
        }
    }
}

#[derive(Serialize)]
struct JsonRetrieval<'a> {
    best_train_id: &'a str,
    #[serde(serialize_with = "ser_sig9")]
    best_absrel: f64,
    candidates_evaluated: usize,
}

#[derive(Serialize)]
struct JsonTimings {
    #[serde(serialize_with = "ser_sig9")]
    load_ms: f64,
    #[serde(serialize_with = "ser_sig9")]
    metrics_2d_ms: f64,
    #[serde(serialize_with = "ser_sig9")]
    backproject_ms: f64,
    #[serde(serialize_with = "ser_sig9")]
    metrics_3d_ms: f64,
}

#[derive(Serialize)]
struct JsonSample<'a> {
    sample_id: &'a str,
    status: &'static str,
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    retrieval: Option<JsonRetrieval<'a>>,
    metrics_2d: Option<JsonMetrics2D<'a>>,
    metrics_3d: Option<JsonMetrics3D>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<JsonTimings>,
    config_digest: &'a str,
}

#[derive(Serialize)]
struct JsonAggregate<'a> {
    samples_evaluated: usize,
    samples_failed: usize,
    metrics_2d: JsonMetrics2D<'a>,
    metrics_2d_pooled: JsonMetrics2D<'a>,
    metrics_3d: JsonMetrics3D,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    dataset_name: &'a str,
    baseline: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_dataset: Option<&'a str>,
    config: &'a EvalConfig,
    config_digest: String,
    samples: Vec<JsonSample<'a>>,
    aggregate: Option<JsonAggregate<'a>>,
}

impl<'a> From<&'a Report> for JsonReport<'a> {
    fn from(r: &'a Report) -> Self {
        let failed = r.failed_count();
        JsonReport {
            dataset_name: &r.dataset_name,
            baseline: r.baseline.as_deref(),
            reference_dataset: r.reference_dataset.as_deref(),
            config: &r.config,
            config_digest: r.config.digest(),
            samples: r
                .records
                .iter()
                .map(|rec| {
                    let (status, error, m2, m3) = match &rec.outcome {
                        SampleOutcome::Evaluated {
                            metrics_2d,
                            metrics_3d,
                        } => ("ok", None, Some(metrics_2d.into()), Some(metrics_3d.into())),
                        SampleOutcome::Failed { reason } => {
                            ("failed", Some(reason.as_str()), None, None)
                        }
                    };
                    JsonSample {
                        sample_id: &rec.sample_id,
                        status,
                        error,
                        retrieval: rec.retrieval.as_ref().map(|q| JsonRetrieval {
                            best_train_id: &q.best_train_id,
                            best_absrel: q.best_absrel,
                            candidates_evaluated: q.candidates_evaluated,
                        }),
                        metrics_2d: m2,
                        metrics_3d: m3,
                        timing_ms: r.include_timings.then_some(JsonTimings {
                            load_ms: rec.timing.load_ms,
                            metrics_2d_ms: rec.timing.metrics_2d_ms,
                            backproject_ms: rec.timing.backproject_ms,
                            metrics_3d_ms: rec.timing.metrics_3d_ms,
                        }),
                        config_digest: &rec.config_digest,
                    }
                })
                .collect(),
            aggregate: r.aggregate.as_ref().map(|a| JsonAggregate {
                samples_evaluated: r.records.len() - failed,
                samples_failed: failed,
                metrics_2d: (&a.metrics_2d).into(),
                metrics_2d_pooled: (&a.metrics_2d_pooled).into(),
                metrics_3d: (&a.metrics_3d).into(),
            }),
        }
    }
}

/// Writes `report` to `path` in the requested format.
pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::InvalidInput("refusing to write a report with no samples".into()));
    }
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
