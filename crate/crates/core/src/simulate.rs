//! A synthetic noisy predictor for comparing decode strategies without a model.
//!
//! At step `k` the simulated model emits the target perturbed by
//! `N(0, tau_k^2)` per endpoint and predicts offsets back to the target with
//! error `N(0, eps_k^2)`. Everything is snapped to the 0.1 s text grid so the
//! sequences survive a serialize/parse round trip unchanged.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{decode_with, fix_up, DecodeOptions, DecodeStrategy};
use crate::error::{DecodeError, ValidationError};
use crate::metrics::{EvalPair, EvalReport, ReportAccumulator};
use crate::rng::sample_rng;
use crate::segment::{from_tenths, to_tenths, validate_sample, GroundingSample, RefinementSequence, RefinementStep, TimeSegment};

/// Per-step error model of the simulated predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorModel {
    /// Std (seconds) of the emitted segment endpoints at each step.
    pub step_error_stds: Vec<f64>,
    /// Std (seconds) of the predicted offsets at each step.
    pub offset_error_stds: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PredictorModel {
    /// `tau = {5, 3, 1, 0.3}` with offset errors equal to the segment errors.
    fn default() -> Self {
        let tau = vec![5.0, 3.0, 1.0, 0.3];
        Self {
            offset_error_stds: tau.clone(),
            step_error_stds: tau,
            seed: 0,
        }
    }
}

impl PredictorModel {
    pub fn noiseless(steps: usize) -> Self {
        Self {
            step_error_stds: vec![0.0; steps],
            offset_error_stds: vec![0.0; steps],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let k = self.step_error_stds.len();
        if k == 0 {
            return Err(StudyError::Model("at least one step is required".into()));
        }
        if self.offset_error_stds.len() != k {
            return Err(StudyError::Model(format!(
                "{k} step error stds but {} offset error stds",
                self.offset_error_stds.len()
            )));
        }
        if self
            .step_error_stds
            .iter()
            .chain(&self.offset_error_stds)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(StudyError::Model("error stds must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.step_error_stds.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("invalid predictor model: {0}")]
    Model(String),
    #[error("no samples to simulate")]
    Empty,
    #[error("sample {index}: {source}")]
    InvalidSample {
        index: usize,
        #[source]
        source: ValidationError,
    },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

fn normal<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        std * rng.sample::<f64, _>(StandardNormal)
    }
}

/// One simulated model output for `sample`. Expects a valid model.
pub fn simulate_prediction<R: Rng + ?Sized>(
    sample: &GroundingSample,
    model: &PredictorModel,
    rng: &mut R,
) -> RefinementSequence {
    let target = sample.target;
    let limit = to_tenths(sample.duration_s());
    let steps = model
        .step_error_stds
        .iter()
        .zip(&model.offset_error_stds)
        .map(|(&tau, &eps)| {
            let s = to_tenths(target.start_s + normal(rng, tau)).clamp(0, limit);
            let e = to_tenths(target.end_s + normal(rng, tau)).clamp(0, limit);
            let (s, e) = (s.min(e), s.max(e));
            let os = to_tenths(target.start_s + normal(rng, eps)) - s;
            let oe = to_tenths(target.end_s + normal(rng, eps)) - e;
            RefinementStep {
                seg: TimeSegment {
                    start_s: from_tenths(s),
                    end_s: from_tenths(e),
                },
                offset_start_s: from_tenths(os),
                offset_end_s: from_tenths(oe),
            }
        })
        .collect();
    RefinementSequence::new(steps).expect("model has at least one step")
}

/// The auxiliary-head stand-in: target plus `N(0, eps_K^2)` per endpoint.
pub fn simulate_aux<R: Rng + ?Sized>(sample: &GroundingSample, model: &PredictorModel, rng: &mut R) -> TimeSegment {
    let eps = *model.offset_error_stds.last().expect("model has at least one step");
    let t = sample.target;
    fix_up((t.start_s + normal(rng, eps), t.end_s + normal(rng, eps))).segment
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub strategy: DecodeStrategy,
    pub report: EvalReport,
    /// Per-sample IoU in input order.
    #[serde(skip)]
    pub ious: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
}

/// Mean and standard error of a paired per-sample IoU difference, in mIoU
/// percentage points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedGap {
    pub mean: f64,
    pub std_err: f64,
}

impl StudyOutcome {
    pub fn report(&self, strategy: DecodeStrategy) -> Option<&EvalReport> {
        self.row(strategy).map(|r| &r.report)
    }

    fn row(&self, strategy: DecodeStrategy) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    /// `mIoU(a) - mIoU(b)` with the standard error of the paired difference.
    pub fn paired_gap(&self, a: DecodeStrategy, b: DecodeStrategy) -> Option<PairedGap> {
        let (a, b) = (self.row(a)?, self.row(b)?);
        let n = a.ious.len();
        if n < 2 {
            return None;
        }
        let diffs: Vec<f64> = a.ious.iter().zip(&b.ious).map(|(x, y)| 100.0 * (x - y)).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(PairedGap {
            mean,
            std_err: (var / n as f64).sqrt(),
        })
    }

    /// JSON object `strategy -> report` in row order.
    pub fn to_json(&self) -> serde_json::Value {
        let map = self
            .rows
            .iter()
            .map(|r| (r.strategy.name().to_string(), serde_json::to_value(r.report).expect("report serializes")))
            .collect::<serde_json::Map<_, _>>();
        serde_json::Value::Object(map)
    }

    /// Plain-text comparison table, one row per strategy.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12}{}\n", "strategy", EvalReport::TABLE_HEADER);
        for row in &self.rows {
            out.push_str(&format!("{:<12}{}\n", row.strategy.name(), row.report.table_row()));
        }
        out
    }
}

/// Simulates every sample once and scores each strategy on the same
/// simulated output.
pub fn run_study(
    samples: &[GroundingSample],
    model: &PredictorModel,
    strategies: &[DecodeStrategy],
    options: DecodeOptions,
) -> Result<StudyOutcome, StudyError> {
    model.validate()?;
    if samples.is_empty() {
        return Err(StudyError::Empty);
    }
    let per_sample: Vec<Vec<EvalPair>> = samples
        .par_iter()
        .enumerate()
        .map(|(index, sample)| {
            validate_sample(sample.clone()).map_err(|source| StudyError::InvalidSample { index, source })?;
            let mut rng = sample_rng(model.seed, index as u64);
            let seq = simulate_prediction(sample, model, &mut rng);
            let aux = simulate_aux(sample, model, &mut rng);
            strategies
                .iter()
                .map(|&strategy| {
                    let decoded = decode_with(&seq, strategy, Some(&aux), options)?;
                    Ok(EvalPair::new(Some(decoded.segment), sample.target))
                })
                .collect::<Result<Vec<_>, StudyError>>()
        })
        .collect::<Result<_, _>>()?;

    let rows = strategies
        .iter()
        .enumerate()
        .map(|(j, &strategy)| {
            let mut acc = ReportAccumulator::default();
            let mut ious = Vec::with_capacity(samples.len());
            for pairs in &per_sample {
                acc.push(&pairs[j]);
                ious.push(pairs[j].iou());
            }
            StudyRow {
                strategy,
                report: acc.finish().expect("samples are non-empty"),
                ious,
            }
        })
        .collect();
    Ok(StudyOutcome { rows })
}
