#![allow(dead_code)]

use rand::Rng;
use timerefine::rng::sample_rng;
use timerefine::{GroundingSample, TimeSegment};

/// Random samples with 0.1 s-aligned targets inside videos of 20-200 s.
pub fn fixture(n: usize, seed: u64) -> Vec<GroundingSample> {
    let mut rng = sample_rng(seed, u64::MAX);
    (0..n)
        .map(|i| {
            let duration_tenths: i64 = rng.random_range(200..=2000);
            let start: i64 = rng.random_range(0..duration_tenths - 10);
            let end: i64 = rng.random_range(start + 10..=duration_tenths);
            GroundingSample::new(
                format!("video_{i:05}"),
                duration_tenths as f64 / 10.0,
                format!("query number {i}"),
                TimeSegment::new(start as f64 / 10.0, end as f64 / 10.0).unwrap(),
            )
        })
        .collect()
}

/// Length of the 1 ms cells covered by `a` and `b` (both on the 0.1 s grid),
/// counted cell by cell.
pub fn brute_force_iou(a: &TimeSegment, b: &TimeSegment) -> f64 {
    let ms = |t: f64| (t * 1000.0).round() as i64;
    let (a0, a1, b0, b1) = (ms(a.start_s), ms(a.end_s), ms(b.start_s), ms(b.end_s));
    let (mut inter, mut union) = (0u64, 0u64);
    for cell in a0.min(b0)..a1.max(b1) {
        let in_a = a0 <= cell && cell < a1;
        let in_b = b0 <= cell && cell < b1;
        inter += (in_a && in_b) as u64;
        union += (in_a || in_b) as u64;
    }
    if union == 0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    inter as f64 / union as f64
}

use timerefine::losses::{aux_forward, aux_gradients_batch, segment_loss_weighted, AuxHeadParams, LossKind};

/// A random head, hidden states and targets for a gradient check.
pub struct GradCase {
    pub params: AuxHeadParams,
    pub hs: Vec<Vec<f64>>,
    pub gt: Vec<TimeSegment>,
}

/// Distance from the nearest kink of the loss surface for `case`.
fn kink_margin(case: &GradCase, kind: LossKind) -> f64 {
    let mut margin = f64::INFINITY;
    for (h, g) in case.hs.iter().zip(&case.gt) {
        let (s, e) = aux_forward(h, &case.params).unwrap();
        if matches!(kind, LossKind::L1 | LossKind::L1Giou) {
            margin = margin.min((s - g.start_s).abs()).min((e - g.end_s).abs());
        }
        if matches!(kind, LossKind::L1Giou | LossKind::L2Giou) {
            let (a1, a2) = (s.min(e), s.max(e));
            for d in [a1 - g.start_s, a2 - g.end_s, a1 - g.end_s, a2 - g.start_s, a2 - a1] {
                margin = margin.min(d.abs());
            }
        }
    }
    margin
}

/// Draws a random case at least 1e-2 away from any kink.
pub fn grad_case<R: Rng>(rng: &mut R, kind: LossKind) -> GradCase {
    loop {
        let dim = rng.random_range(1..=8);
        let positions = rng.random_range(1..=4);
        let gt: Vec<TimeSegment> = (0..positions)
            .map(|_| {
                let s = rng.random_range(0.0..60.0);
                TimeSegment::new(s, s + rng.random_range(1.0..30.0)).unwrap()
            })
            .collect();
        let row = |rng: &mut R| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let weights = [row(rng), row(rng)];
        let bias = [
            gt[0].start_s + rng.random_range(-8.0..8.0),
            gt[0].end_s + rng.random_range(-8.0..8.0),
        ];
        let hs = (0..positions).map(|_| row(rng)).collect();
        let case = GradCase {
            params: AuxHeadParams::new(weights, bias).unwrap(),
            hs,
            gt,
        };
        if kink_margin(&case, kind) > 1e-2 {
            return case;
        }
    }
}

fn loss_at(case: &GradCase, params: &AuxHeadParams, hs: &[Vec<f64>], kind: LossKind) -> f64 {
    let preds: Vec<(f64, f64)> = hs.iter().map(|h| aux_forward(h, params).unwrap()).collect();
    segment_loss_weighted(&preds, &case.gt, kind, 1.0).unwrap()
}

/// Magnitude below which a gradient entry is compared against this floor
/// instead of itself. Central differences of an O(10) loss carry roughly
/// 1e-10 of rounding noise, so relative error is undefined for entries that
/// are exactly zero (e.g. cancelling L1 signs).
pub const REL_FLOOR: f64 = 1e-5;

/// Largest elementwise relative error between the analytic gradient and
/// central finite differences with step `step`.
pub fn max_grad_rel_error(case: &GradCase, kind: LossKind, step: f64) -> f64 {
    let analytic = aux_gradients_batch(&case.hs, &case.params, &case.gt, kind, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |a: f64, numeric: f64| {
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    };
    let central = |plus: f64, minus: f64| (plus - minus) / (2.0 * step);

    for r in 0..2 {
        for j in 0..case.params.dim() {
            let mut p = case.params.clone();
            p.weights[r][j] += step;
            let plus = loss_at(case, &p, &case.hs, kind);
            p.weights[r][j] -= 2.0 * step;
            let minus = loss_at(case, &p, &case.hs, kind);
            check(analytic.d_weights[r][j], central(plus, minus));
        }
        let mut p = case.params.clone();
        p.bias[r] += step;
        let plus = loss_at(case, &p, &case.hs, kind);
        p.bias[r] -= 2.0 * step;
        let minus = loss_at(case, &p, &case.hs, kind);
        check(analytic.d_bias[r], central(plus, minus));
    }
    for i in 0..case.hs.len() {
        for j in 0..case.params.dim() {
            let mut hs = case.hs.clone();
            hs[i][j] += step;
            let plus = loss_at(case, &case.params, &hs, kind);
            hs[i][j] -= 2.0 * step;
            let minus = loss_at(case, &case.params, &hs, kind);
            check(analytic.d_h[i][j], central(plus, minus));
        }
    }
    worst
}
