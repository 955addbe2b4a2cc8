//! Temporal-perception losses.
//!
//! The auxiliary head is a linear map from the hidden state of a `<refine>`
//! token to a `(start, end)` pair. It is supervised with a distance loss over
//! the `|S|` supervised positions,
//!
//! ```text
//! L_seg = 1/(2|S|) * sum_i (d(s^_i, s_i) + d(e^_i, e_i))   d = |.| or (.)^2
//!       + w/|S| * sum_i (1 - GIoU(S^_i, S_i))             *_giou kinds only
//! ```
//!
//! and the total loss is `CE + lambda * L_seg`. Gradients of `L_seg`
//! through the head are closed form; there is no autodiff here.

use serde::{Deserialize, Serialize};

use crate::error::LossError;
use crate::segment::TimeSegment;

pub const DEFAULT_LAMBDA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    L1,
    L1Giou,
    L2,
    L2Giou,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [Self::L1, Self::L1Giou, Self::L2, Self::L2Giou];

    fn squared(self) -> bool {
        matches!(self, Self::L2 | Self::L2Giou)
    }

    fn has_giou(self) -> bool {
        matches!(self, Self::L1Giou | Self::L2Giou)
    }
}

/// Units of the auxiliary head's regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxTargetUnits {
    #[default]
    Seconds,
    /// Targets divided by the video duration.
    FractionOfDuration,
}

/// Which `<refine>` tokens carry an auxiliary prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxSupervision {
    #[default]
    AllRefinePositions,
    LastOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub lambda: f64,
    /// Weight of the GIoU term relative to the distance term.
    pub giou_weight: f64,
    pub target_units: AuxTargetUnits,
    pub supervision: AuxSupervision,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::L1,
            lambda: DEFAULT_LAMBDA,
            giou_weight: 1.0,
            target_units: AuxTargetUnits::Seconds,
            supervision: AuxSupervision::AllRefinePositions,
        }
    }
}

/// Step indices (0-based) that are preceded by a `<refine>` token and so
/// receive an auxiliary prediction. A one-step sequence has none.
pub fn supervised_steps(steps: usize, supervision: AuxSupervision) -> Vec<usize> {
    match supervision {
        AuxSupervision::AllRefinePositions => (1..steps).collect(),
        AuxSupervision::LastOnly if steps > 1 => vec![steps - 1],
        AuxSupervision::LastOnly => Vec::new(),
    }
}

/// The regression target for `target` in the requested units.
pub fn aux_target(target: &TimeSegment, duration_s: f64, units: AuxTargetUnits) -> (f64, f64) {
    match units {
        AuxTargetUnits::Seconds => (target.start_s, target.end_s),
        AuxTargetUnits::FractionOfDuration => (target.start_s / duration_s, target.end_s / duration_s),
    }
}

/// Weight matrix (2 x d, row 0 predicts the start) and bias of the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxHeadParams {
    pub weights: [Vec<f64>; 2],
    pub bias: [f64; 2],
}

impl AuxHeadParams {
    pub fn new(weights: [Vec<f64>; 2], bias: [f64; 2]) -> Result<Self, LossError> {
        if weights[0].len() != weights[1].len() {
            return Err(LossError::DimensionMismatch {
                expected: weights[0].len(),
                got: weights[1].len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: [vec![0.0; dim], vec![0.0; dim]],
            bias: [0.0; 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    fn check(&self, h: &[f64]) -> Result<(), LossError> {
        if h.len() != self.dim() || self.weights[1].len() != self.dim() {
            return Err(LossError::DimensionMismatch {
                expected: self.dim(),
                got: h.len(),
            });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw head output `weights * h + bias`; may be negative or inverted.
pub fn aux_forward(h: &[f64], params: &AuxHeadParams) -> Result<(f64, f64), LossError> {
    params.check(h)?;
    Ok((
        dot(&params.weights[0], h) + params.bias[0],
        dot(&params.weights[1], h) + params.bias[1],
    ))
}

/// 1D generalized IoU of a raw prediction against `gt`, with the
/// prediction's endpoints sorted first.
pub fn giou_1d(pred: (f64, f64), gt: &TimeSegment) -> f64 {
    let (a1, a2) = (pred.0.min(pred.1), pred.0.max(pred.1));
    giou_sorted(a1, a2, gt.start_s, gt.end_s).0
}

/// GIoU of `[a1, a2]` vs `[b1, b2]` (both sorted) and its partials with
/// respect to `a1` and `a2`.
fn giou_sorted(a1: f64, a2: f64, b1: f64, b2: f64) -> (f64, f64, f64) {
    let cover = a2.max(b2) - a1.min(b1);
    if cover <= 0.0 {
        // Both are the same point.
        return (1.0, 0.0, 0.0);
    }
    let overlap = a2.min(b2) - a1.max(b1);
    let (inter, di1, di2) = if overlap > 0.0 {
        (overlap, if a1 > b1 { -1.0 } else { 0.0 }, if a2 < b2 { 1.0 } else { 0.0 })
    } else {
        (0.0, 0.0, 0.0)
    };
    let union = (a2 - a1) + (b2 - b1) - inter;
    let du1 = -1.0 - di1;
    let du2 = 1.0 - di2;
    let dc1 = if a1 < b1 { -1.0 } else { 0.0 };
    let dc2 = if a2 > b2 { 1.0 } else { 0.0 };

    // giou = inter/union - 1 + union/cover
    let (iou, diou1, diou2) = if union > 0.0 {
        let u2 = union * union;
        (
            inter / union,
            di1 / union - inter * du1 / u2,
            di2 / union - inter * du2 / u2,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let c2 = cover * cover;
    let g = iou - 1.0 + union / cover;
    let dg1 = diou1 + du1 / cover - union * dc1 / c2;
    let dg2 = diou2 + du2 / cover - union * dc2 / c2;
    (g, dg1, dg2)
}

fn check_lists(pred: &[(f64, f64)], gt: &[TimeSegment]) -> Result<(), LossError> {
    if pred.len() != gt.len() {
        return Err(LossError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(())
}

/// Segment loss with the GIoU term (if any) weighted 1.
pub fn segment_loss(pred: &[(f64, f64)], gt: &[TimeSegment], kind: LossKind) -> Result<f64, LossError> {
    segment_loss_weighted(pred, gt, kind, 1.0)
}

pub fn segment_loss_weighted(
    pred: &[(f64, f64)],
    gt: &[TimeSegment],
    kind: LossKind,
    giou_weight: f64,
) -> Result<f64, LossError> {
    check_lists(pred, gt)?;
    let n = pred.len() as f64;
    let dist = |r: f64| if kind.squared() { r * r } else { r.abs() };
    let distance: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| dist(p.0 - g.start_s) + dist(p.1 - g.end_s))
        .sum();
    let mut loss = distance / (2.0 * n);
    if kind.has_giou() {
        let penalty: f64 = pred.iter().zip(gt).map(|(p, g)| 1.0 - giou_1d(*p, g)).sum();
        loss += giou_weight * penalty / n;
    }
    Ok(loss)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Partial derivatives of [`segment_loss_weighted`] with respect to each
/// predicted endpoint. `|x|` uses subgradient 0 at `x = 0`.
pub fn segment_loss_grad(
    pred: &[(f64, f64)],
    gt: &[TimeSegment],
    kind: LossKind,
    giou_weight: f64,
) -> Result<Vec<(f64, f64)>, LossError> {
    check_lists(pred, gt)?;
    let n = pred.len() as f64;
    let ddist = |r: f64| if kind.squared() { 2.0 * r } else { sign(r) };
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let mut ds = ddist(p.0 - g.start_s) / (2.0 * n);
            let mut de = ddist(p.1 - g.end_s) / (2.0 * n);
            if kind.has_giou() {
                let swapped = p.0 > p.1;
                let (a1, a2) = if swapped { (p.1, p.0) } else { (p.0, p.1) };
                let (_, g1, g2) = giou_sorted(a1, a2, g.start_s, g.end_s);
                let (gs, ge) = if swapped { (g2, g1) } else { (g1, g2) };
                ds -= giou_weight * gs / n;
                de -= giou_weight * ge / n;
            }
            (ds, de)
        })
        .collect())
}

/// Mean token cross-entropy using a shifted log-sum-exp.
pub fn cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64, LossError> {
    if logits.len() != labels.len() {
        return Err(LossError::LengthMismatch {
            pred: logits.len(),
            gt: labels.len(),
        });
    }
    if logits.is_empty() {
        return Err(LossError::Empty);
    }
    let mut total = 0.0;
    for (row, (z, &label)) in logits.iter().zip(labels).enumerate() {
        if label >= z.len() {
            return Err(LossError::LabelOutOfRange {
                row,
                label,
                classes: z.len(),
            });
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[label];
    }
    Ok(total / logits.len() as f64)
}

/// `cross_entropy + lambda * segment_loss`.
pub fn combined_loss(
    logits: &[Vec<f64>],
    labels: &[usize],
    aux_preds: &[(f64, f64)],
    gt: &[TimeSegment],
    config: &LossConfig,
) -> Result<f64, LossError> {
    if config.lambda < 0.0 {
        return Err(LossError::NegativeLambda);
    }
    let ce = cross_entropy(logits, labels)?;
    let seg = segment_loss_weighted(aux_preds, gt, config.kind, config.giou_weight)?;
    Ok(ce + config.lambda * seg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxGradients {
    pub d_weights: [Vec<f64>; 2],
    pub d_bias: [f64; 2],
    /// One gradient per input hidden state.
    pub d_h: Vec<Vec<f64>>,
}

/// Gradients of `segment_loss(aux_forward(h), gt)` for a single position.
pub fn aux_gradients(
    h: &[f64],
    params: &AuxHeadParams,
    gt: &TimeSegment,
    kind: LossKind,
) -> Result<AuxGradients, LossError> {
    aux_gradients_batch(&[h.to_vec()], params, std::slice::from_ref(gt), kind, 1.0)
}

/// Gradients of the segment loss over several supervised positions sharing
/// one head.
pub fn aux_gradients_batch(
    hs: &[Vec<f64>],
    params: &AuxHeadParams,
    gt: &[TimeSegment],
    kind: LossKind,
    giou_weight: f64,
) -> Result<AuxGradients, LossError> {
    let preds = hs
        .iter()
        .map(|h| aux_forward(h, params))
        .collect::<Result<Vec<_>, _>>()?;
    let dpred = segment_loss_grad(&preds, gt, kind, giou_weight)?;

    let d = params.dim();
    let mut d_weights = [vec![0.0; d], vec![0.0; d]];
    let mut d_bias = [0.0; 2];
    let mut d_h = Vec::with_capacity(hs.len());
    for (h, (gs, ge)) in hs.iter().zip(dpred) {
        let up = [gs, ge];
        for r in 0..2 {
            d_bias[r] += up[r];
            for (w, x) in d_weights[r].iter_mut().zip(h) {
                *w += up[r] * x;
            }
        }
        d_h.push(
            (0..d)
                .map(|j| params.weights[0][j] * gs + params.weights[1][j] * ge)
                .collect(),
        );
    }
    Ok(AuxGradients {
        d_weights,
        d_bias,
        d_h,
    })
}
