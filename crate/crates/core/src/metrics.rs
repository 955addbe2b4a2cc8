//! Temporal-grounding metrics: IoU, Recall@1 at IoU thresholds, and mIoU.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::segment::TimeSegment;

/// Recall thresholds reported by [`build_report`].
pub const THRESHOLDS: [f64; 3] = [0.3, 0.5, 0.7];

/// Intersection length over covered length.
///
/// Two identical points score 1; two distinct points score 0.
pub fn iou(a: &TimeSegment, b: &TimeSegment) -> f64 {
    let inter = (a.end_s.min(b.end_s) - a.start_s.max(b.start_s)).max(0.0);
    let union = a.length() + b.length() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else if a == b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPair {
    /// `None` when the model output could not be parsed or decoded.
    pub prediction: Option<TimeSegment>,
    pub ground_truth: TimeSegment,
}

impl EvalPair {
    pub fn new(prediction: Option<TimeSegment>, ground_truth: TimeSegment) -> Self {
        Self {
            prediction,
            ground_truth,
        }
    }

    /// IoU of the pair; an absent prediction scores 0.
    pub fn iou(&self) -> f64 {
        self.prediction.map_or(0.0, |p| iou(&p, &self.ground_truth))
    }
}

pub fn recall_at(pairs: &[EvalPair], threshold: f64) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MetricsError::BadThreshold);
    }
    let hits = pairs
        .iter()
        .filter(|p| p.prediction.is_some() && p.iou() >= threshold)
        .count();
    Ok(100.0 * hits as f64 / pairs.len() as f64)
}

pub fn mean_iou(pairs: &[EvalPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * pairs.iter().map(EvalPair::iou).sum::<f64>() / pairs.len() as f64)
}

/// Running totals behind an [`EvalReport`]. Accumulators over disjoint
/// partitions can be merged in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReportAccumulator {
    n: usize,
    absent: usize,
    hits: [usize; 3],
    iou_sum: f64,
}

impl ReportAccumulator {
    pub fn push(&mut self, pair: &EvalPair) {
        self.n += 1;
        match pair.prediction {
            None => self.absent += 1,
            Some(_) => {
                let v = pair.iou();
                for (hit, t) in self.hits.iter_mut().zip(THRESHOLDS) {
                    if v >= t {
                        *hit += 1;
                    }
                }
                self.iou_sum += v;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.absent += other.absent;
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        self.iou_sum += other.iou_sum;
        self
    }

    pub fn finish(&self) -> Result<EvalReport, MetricsError> {
        if self.n == 0 {
            return Err(MetricsError::Empty);
        }
        let n = self.n as f64;
        let pct = |c: usize| 100.0 * c as f64 / n;
        Ok(EvalReport {
            r_at_03: pct(self.hits[0]),
            r_at_05: pct(self.hits[1]),
            r_at_07: pct(self.hits[2]),
            miou: 100.0 * self.iou_sum / n,
            n: self.n,
            failure_rate: self.absent as f64 / n,
        })
    }
}

/// Table-1 style grounding report. Percentages are kept unrounded; the
/// `Display` impl rounds to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "r@0.3")]
    pub r_at_03: f64,
    #[serde(rename = "r@0.5")]
    pub r_at_05: f64,
    #[serde(rename = "r@0.7")]
    pub r_at_07: f64,
    pub miou: f64,
    pub n: usize,
    pub failure_rate: f64,
}

impl EvalReport {
    /// Recall at one of [`THRESHOLDS`].
    pub fn r_at(&self, threshold: f64) -> Option<f64> {
        THRESHOLDS
            .iter()
            .position(|t| *t == threshold)
            .map(|i| [self.r_at_03, self.r_at_05, self.r_at_07][i])
    }

    pub const TABLE_HEADER: &'static str = "  R@0.3   R@0.5   R@0.7    mIoU       n  fail";

    /// One aligned row matching [`Self::TABLE_HEADER`].
    pub fn table_row(&self) -> String {
        format!(
            "{:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>7} {:>5.3}",
            self.r_at_03, self.r_at_05, self.r_at_07, self.miou, self.n, self.failure_rate
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::TABLE_HEADER)?;
        write!(f, "{}", self.table_row())
    }
}

pub fn build_report(pairs: &[EvalPair]) -> Result<EvalReport, MetricsError> {
    let mut acc = ReportAccumulator::default();
    for p in pairs {
        acc.push(p);
    }
    acc.finish()
}
