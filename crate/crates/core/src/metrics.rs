//! Pixel, volume and compliance metrics of predicted structures.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{assemble_and_solve, compliance, FemError, StaticProblem};
use crate::model::{DensityField, DesignDomain, Grid, ProblemSpec};
use crate::sampler::SplitLabel;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("degenerate ground truth: {0}")]
    DegenerateGroundTruth(String),
    #[error("sample ids differ: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

fn same_shape(y: &Grid<f64>, yhat: &Grid<f64>) -> Result<(), MetricsError> {
    if y.shape() != yhat.shape() {
        return Err(MetricsError::ShapeMismatch(y.shape(), yhat.shape()));
    }
    Ok(())
}

/// Mean absolute error over the grid elements.
pub fn mae(y: &Grid<f64>, yhat: &Grid<f64>) -> Result<f64, MetricsError> {
    same_shape(y, yhat)?;
    let s: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / y.len() as f64)
}

/// Mean squared error over the grid elements.
pub fn mse(y: &Grid<f64>, yhat: &Grid<f64>) -> Result<f64, MetricsError> {
    same_shape(y, yhat)?;
    let s: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / y.len() as f64)
}

pub fn volume_fraction(y: &Grid<f64>) -> f64 {
    y.mean()
}

/// Signed relative volume error `sum(yhat - y) / sum(y)`.
pub fn re_vf(y: &Grid<f64>, yhat: &Grid<f64>) -> Result<f64, MetricsError> {
    same_shape(y, yhat)?;
    let total: f64 = y.sum();
    if total <= 0.0 {
        return Err(MetricsError::DegenerateGroundTruth("sum of densities is zero".into()));
    }
    let diff: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| b - a).sum();
    Ok(diff / total)
}

/// How a prediction is fed to the compliance re-analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplianceMode {
    /// Grayscale densities as predicted.
    #[default]
    Grayscale,
    /// Prediction thresholded at 0.5 first; the ground truth is unchanged.
    Binarized,
}

/// Compliances `(C(y), C(yhat))` of both designs under the problem's load.
pub fn compliance_pair(
    y: &DensityField,
    yhat: &DensityField,
    spec: &ProblemSpec,
    domain: &DesignDomain,
    penal: f64,
    mode: ComplianceMode,
) -> Result<(f64, f64), MetricsError> {
    same_shape(y.values(), yhat.values())?;
    let problem = StaticProblem::from_spec(spec, domain);
    let binarized;
    let pred = match mode {
        ComplianceMode::Grayscale => yhat,
        ComplianceMode::Binarized => {
            binarized = yhat.binarized();
            &binarized
        }
    };
    let c = |d: &DensityField| -> Result<f64, MetricsError> {
        let u = assemble_and_solve(d, &problem, domain, penal)?;
        Ok(compliance(d, &u, domain, penal))
    };
    Ok((c(y)?, c(pred)?))
}

/// Relative compliance error `(C(yhat) - C(y)) / C(y)`.
pub fn re_c(
    y: &DensityField,
    yhat: &DensityField,
    spec: &ProblemSpec,
    domain: &DesignDomain,
    penal: f64,
    mode: ComplianceMode,
) -> Result<f64, MetricsError> {
    let (c, chat) = compliance_pair(y, yhat, spec, domain, penal, mode)?;
    relative_compliance(c, chat)
}

fn relative_compliance(c: f64, chat: f64) -> Result<f64, MetricsError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(MetricsError::DegenerateGroundTruth(format!("compliance {c}")));
    }
    Ok((chat - c) / c)
}

/// One ground-truth sample of an evaluation batch.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub sample_id: u64,
    pub spec: ProblemSpec,
    pub density: DensityField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub penal: f64,
    pub mode: ComplianceMode,
    /// Width of the RE^VF and RE^C histogram bins.
    pub bin_width: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            penal: 2.0,
            mode: ComplianceMode::Grayscale,
            bin_width: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: u64,
    pub mae: f64,
    pub mse: f64,
    pub re_vf: f64,
    pub re_c: f64,
    pub compliance_truth: f64,
    pub compliance_pred: f64,
}

/// Counts per bin `[lower, lower + width)`, ascending, empty bins omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub count: usize,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, bin_width: f64) -> Self {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for v in values {
            *counts.entry((v / bin_width).floor() as i64).or_default() += 1;
        }
        Self {
            bin_width,
            bins: counts
                .into_iter()
                .map(|(k, count)| HistogramBin {
                    lower: k as f64 * bin_width,
                    count,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: Option<SplitLabel>,
    pub count: usize,
    pub mae: f64,
    pub mse: f64,
    pub re_vf: f64,
    pub re_c: f64,
    pub options: EvalOptions,
    pub histogram_re_vf: Histogram,
    pub histogram_re_c: Histogram,
    /// Sorted by sample id.
    pub samples: Vec<SampleMetrics>,
}

impl MetricsReport {
    /// Builds aggregates from per-sample rows, independent of their order.
    pub fn from_samples(
        mut samples: Vec<SampleMetrics>,
        split: Option<SplitLabel>,
        options: EvalOptions,
    ) -> Self {
        samples.sort_by_key(|s| s.sample_id);
        let n = samples.len();
        let mean = |f: fn(&SampleMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                samples.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            split,
            count: n,
            mae: mean(|s| s.mae),
            mse: mean(|s| s.mse),
            re_vf: mean(|s| s.re_vf),
            re_c: mean(|s| s.re_c),
            options,
            histogram_re_vf: Histogram::new(samples.iter().map(|s| s.re_vf), options.bin_width),
            histogram_re_c: Histogram::new(samples.iter().map(|s| s.re_c), options.bin_width),
            samples,
        }
    }

    pub fn sorted_re_vf(&self) -> Vec<f64> {
        sorted(self.samples.iter().map(|s| s.re_vf))
    }

    pub fn sorted_re_c(&self) -> Vec<f64> {
        sorted(self.samples.iter().map(|s| s.re_c))
    }

    /// One comma-separated row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sample_id,mae,mse,re_vf,re_c,compliance_truth,compliance_pred")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.sample_id, s.mae, s.mse, s.re_vf, s.re_c, s.compliance_truth, s.compliance_pred
            )?;
        }
        Ok(())
    }

    /// `rank,re_vf,re_c` with each column sorted ascending on its own.
    pub fn write_sorted_series<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rank,re_vf,re_c")?;
        for (k, (a, b)) in self.sorted_re_vf().iter().zip(self.sorted_re_c()).enumerate() {
            writeln!(out, "{k},{a:e},{b:e}")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Scores predictions against ground truth. Both sides must carry exactly the
/// same sample ids.
pub fn evaluate_batch(
    predictions: &BTreeMap<u64, DensityField>,
    truth: &[GroundTruth],
    domain: &DesignDomain,
    split: Option<SplitLabel>,
    options: EvalOptions,
) -> Result<MetricsReport, MetricsError> {
    let truth_ids: BTreeSet<u64> = truth.iter().map(|t| t.sample_id).collect();
    if truth_ids.len() != truth.len() {
        return Err(MetricsError::IdMismatch("duplicate ground-truth ids".into()));
    }
    let pred_ids: BTreeSet<u64> = predictions.keys().copied().collect();
    if truth_ids != pred_ids {
        let missing: Vec<_> = truth_ids.difference(&pred_ids).take(5).collect();
        let extra: Vec<_> = pred_ids.difference(&truth_ids).take(5).collect();
        return Err(MetricsError::IdMismatch(format!(
            "missing predictions for {missing:?}, unexpected predictions {extra:?}"
        )));
    }
    let samples = truth
        .par_iter()
        .map(|t| {
            let pred = &predictions[&t.sample_id];
            let (y, yhat) = (t.density.values(), pred.values());
            let (c, chat) =
                compliance_pair(&t.density, pred, &t.spec, domain, options.penal, options.mode)?;
            Ok(SampleMetrics {
                sample_id: t.sample_id,
                mae: mae(y, yhat)?,
                mse: mse(y, yhat)?,
                re_vf: re_vf(y, yhat)?,
                re_c: relative_compliance(c, chat)?,
                compliance_truth: c,
                compliance_pred: chat,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(MetricsReport::from_samples(samples, split, options))
}
