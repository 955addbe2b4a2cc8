//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use timerefine::decode::{decode, DecodeOptions, DecodeStrategy};
use timerefine::grammar::{parse, serialize};
use timerefine::losses::{cross_entropy, LossKind};
use timerefine::metrics::{build_report, iou, recall_at, EvalPair};
use timerefine::rng::sample_rng;
use timerefine::segment::quantize;
use timerefine::seqgen::{generate_dataset, sample_offsets, SeqGenConfig};
use timerefine::simulate::{run_study, PredictorModel};
use timerefine::{NoiseSchedule, RefinementSequence, RefinementStep, TimeSegment};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_sequence<R: Rng>(rng: &mut R) -> RefinementSequence {
    let k = rng.random_range(1..=8);
    let steps = (0..k)
        .map(|_| {
            let s: i64 = rng.random_range(0..20_000);
            let e = s + rng.random_range(0..10_000);
            let t = |v: i64| v as f64 / 10.0;
            RefinementStep::new(
                TimeSegment::new(t(s), t(e)).unwrap(),
                t(rng.random_range(-5_000..=5_000)),
                t(rng.random_range(-5_000..=5_000)),
            )
            .unwrap()
        })
        .collect();
    RefinementSequence::new(steps).unwrap()
}

/// parse(serialize(s)) == [s] for 10,000 random sequences in under 5 s.
fn grammar_round_trip() -> Outcome {
    let mut rng = sample_rng(1001, 0);
    let started = Instant::now();
    let failures = (0..10_000)
        .filter(|_| {
            let seq = random_sequence(&mut rng);
            parse(&serialize(&seq)).sequences != [seq]
        })
        .count();
    let elapsed = started.elapsed();
    check(
        failures == 0 && elapsed < Duration::from_secs(5),
        format!("{failures} failures in 10000, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// s_k + o_k == target at 0.1 s resolution for every step of 10,000
/// sequences under {5,3,1,0}.
fn offset_sum_invariant() -> Outcome {
    let schedule = NoiseSchedule::default();
    let samples = common::fixture(10_000, 2002);
    let mut violations = 0;
    let mut steps = 0;
    for (i, s) in samples.iter().enumerate() {
        let drawn = sample_offsets(&s.target, &schedule, s.duration_s(), 100, &mut sample_rng(2002, i as u64));
        for step in drawn.sequence.steps() {
            steps += 1;
            let (cs, ce) = step.corrected();
            if quantize(cs) != quantize(s.target.start_s) || quantize(ce) != quantize(s.target.end_s) {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations over {steps} steps"))
}

/// No out-of-bounds or inverted step over 100,000 sequences on 10 s
/// videos with sigmas {20,12,4,0}.
fn bounds_and_resampling() -> Outcome {
    let schedule = NoiseSchedule::fixed(&[20.0, 12.0, 4.0, 0.0]).unwrap();
    let duration = 10.0;
    let mut rng = sample_rng(3003, 0);
    let mut violations = 0;
    let mut clamped = 0;
    let n = 100_000;
    for _ in 0..n {
        let a: i64 = rng.random_range(0..=100);
        let b: i64 = rng.random_range(0..=100);
        let target = TimeSegment::new(a.min(b) as f64 / 10.0, a.max(b) as f64 / 10.0).unwrap();
        let drawn = sample_offsets(&target, &schedule, duration, 100, &mut rng);
        clamped += drawn.clamped as usize;
        violations += drawn
            .sequence
            .steps()
            .iter()
            .filter(|st| st.seg.start_s < 0.0 || st.seg.end_s > duration || st.seg.start_s > st.seg.end_s)
            .count();
    }
    check(
        violations == 0,
        format!(
            "{violations} violations; clamp-diagnostic rate {:.4}% ({clamped}/{n})",
            100.0 * clamped as f64 / n as f64
        ),
    )
}

/// 10^6 draws at sigma = 5 s: std within 2% of 5, mean within 0.02 s.
fn noise_calibration() -> Outcome {
    let schedule = NoiseSchedule::fixed(&[5.0]).unwrap();
    let target = TimeSegment::new(5_000.0, 5_050.0).unwrap();
    let mut rng = sample_rng(4004, 0);
    let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0u64);
    for _ in 0..500_000 {
        let step = *sample_offsets(&target, &schedule, 10_000.0, 100, &mut rng).sequence.first();
        for v in [step.offset_start_s, step.offset_end_s] {
            sum += v;
            sum_sq += v * v;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    let std = ((sum_sq - n as f64 * mean * mean) / (n - 1) as f64).sqrt();
    check(
        (std - 5.0).abs() <= 0.02 * 5.0 && mean.abs() <= 0.02,
        format!("{n} draws: std {std:.4}, mean {mean:+.4}"),
    )
}

/// IoU vs a 1 ms-grid brute-force counter on 1,000 pairs; recall
/// monotonicity on 100 random evaluation sets.
fn metric_oracle() -> Outcome {
    let mut rng = sample_rng(5005, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let mut seg = || {
            let s: i64 = rng.random_range(0..1_200);
            TimeSegment::new(s as f64 / 10.0, (s + rng.random_range(0..600)) as f64 / 10.0).unwrap()
        };
        let (a, b) = (seg(), seg());
        worst = worst.max((iou(&a, &b) - common::brute_force_iou(&a, &b)).abs());
    }
    let mut monotone_failures = 0;
    for _ in 0..100 {
        let pairs: Vec<EvalPair> = (0..rng.random_range(1..200))
            .map(|_| {
                let gs: f64 = rng.random_range(0.0..100.0);
                let gt = TimeSegment::new(gs, gs + rng.random_range(0.5..40.0)).unwrap();
                let pred = rng.random_bool(0.9).then(|| {
                    let ps = (gs + rng.random_range(-15.0..15.0)).max(0.0);
                    TimeSegment::new(ps, ps + rng.random_range(0.0..40.0)).unwrap()
                });
                EvalPair::new(pred, gt)
            })
            .collect();
        let r = [0.3, 0.5, 0.7].map(|t| recall_at(&pairs, t).unwrap());
        if !(r[0] >= r[1] && r[1] >= r[2]) {
            monotone_failures += 1;
        }
    }
    check(
        worst <= 1e-3 && monotone_failures == 0,
        format!("max |iou - brute force| {worst:.2e}; {monotone_failures} monotonicity failures in 100 sets"),
    )
}

/// Analytic head gradients vs central differences (step 1e-5, rel. error
/// < 1e-4) on 100 configurations per loss kind; CE shift invariance to 1e-8.
fn gradient_checks() -> Outcome {
    let mut rng = sample_rng(6006, 0);
    let mut details = Vec::new();
    let mut ok = true;
    for kind in LossKind::ALL {
        let worst = (0..100)
            .map(|_| common::max_grad_rel_error(&common::grad_case(&mut rng, kind), kind, 1e-5))
            .fold(0.0, f64::max);
        ok &= worst < 1e-4;
        details.push(format!("{kind:?} {worst:.1e}"));
    }
    let mut ce_worst: f64 = 0.0;
    for _ in 0..100 {
        let (m, v) = (rng.random_range(1..8), rng.random_range(2..12));
        let logits: Vec<Vec<f64>> = (0..m).map(|_| (0..v).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..v)).collect();
        let shifted: Vec<Vec<f64>> = logits
            .iter()
            .map(|row| {
                let c = rng.random_range(-100.0..100.0);
                row.iter().map(|x| x + c).collect()
            })
            .collect();
        let diff = (cross_entropy(&logits, &labels).unwrap() - cross_entropy(&shifted, &labels).unwrap()).abs();
        ce_worst = ce_worst.max(diff);
    }
    ok &= ce_worst < 1e-8;
    details.push(format!("CE shift {ce_worst:.1e}"));
    check(ok, details.join(", "))
}

/// Last-step decoding beats first-step decoding by > 3 SE over 10,000
/// simulated samples; a predictor exact at the final step with exact offsets
/// scores 100.0 everywhere.
fn simulation_ordering() -> Outcome {
    let samples = common::fixture(10_000, 7007);
    let model = PredictorModel {
        seed: 7007,
        ..PredictorModel::default()
    };
    let study = run_study(
        &samples,
        &model,
        &[DecodeStrategy::FirstStep, DecodeStrategy::LastStep],
        DecodeOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let gap = study
        .paired_gap(DecodeStrategy::LastStep, DecodeStrategy::FirstStep)
        .expect("both strategies present");
    let first = study.report(DecodeStrategy::FirstStep).unwrap().miou;
    let last = study.report(DecodeStrategy::LastStep).unwrap().miou;

    let exact = PredictorModel {
        step_error_stds: vec![5.0, 3.0, 1.0, 0.0],
        offset_error_stds: vec![0.0; 4],
        seed: 7007,
    };
    let perfect = run_study(&samples, &exact, &DecodeStrategy::ALL, DecodeOptions::default()).map_err(|e| e.to_string())?;
    let all_hundred = perfect.rows.iter().all(|row| {
        let r = row.report;
        [r.r_at_03, r.r_at_05, r.r_at_07, r.miou]
            .iter()
            .all(|v| format!("{v:.1}") == "100.0")
    });
    check(
        gap.mean > 3.0 * gap.std_err && all_hundred,
        format!(
            "mIoU first {first:.1} -> last {last:.1}, gap {:.2} = {:.1} SE; noiseless-final all 100.0: {all_hundred}",
            gap.mean,
            gap.mean / gap.std_err
        ),
    )
}

/// generate -> parse -> decode(last_step) -> eval on 100 samples gives
/// mIoU 100.0 with no failures.
fn pipeline_identity() -> Outcome {
    let samples = common::fixture(100, 8008);
    let config = SeqGenConfig {
        seed: 8008,
        ..Default::default()
    };
    let generated = generate_dataset(samples, &config);
    let pairs: Vec<EvalPair> = generated
        .samples
        .iter()
        .map(|ts| {
            let pred = parse(&ts.answer_text)
                .sequences
                .first()
                .and_then(|seq| decode(seq, DecodeStrategy::LastStep, None).ok())
                .map(|d| d.segment);
            EvalPair::new(pred, ts.sample.target)
        })
        .collect();
    let report = build_report(&pairs).map_err(|e| e.to_string())?;
    check(
        report.n == 100 && format!("{:.1}", report.miou) == "100.0" && report.failure_rate == 0.0,
        format!(
            "n {}, mIoU {:.1}, failure_rate {}, skipped {}",
            report.n,
            report.miou,
            report.failure_rate,
            generated.skipped.len()
        ),
    )
}

/// Worked examples: the two-step refinement ending at 18.0-24.0 with
/// offsets +0.6/-0.2, the (10, 20, +2, -3) step, and an IoU of 0.95.
fn micro_examples() -> Outcome {
    let text = "<seg_start> 15.0s to 27.5s <offset> +4.0s and -1.5s <refine> 18.0s to 24.0s <offset> +0.6s and -0.2s <seg_end>";
    let two_step = parse(text)
        .sequences
        .first()
        .and_then(|s| decode(s, DecodeStrategy::LastStep, None).ok())
        .map(|d| d.segment.quantized());
    let two_step_ok = two_step == Some(TimeSegment::new(18.6, 23.8).unwrap());

    let offsets = RefinementSequence::new(vec![RefinementStep::new(TimeSegment::new(10.0, 20.0).unwrap(), 2.0, -3.0).unwrap()]).unwrap();
    let offsets_ok = decode(&offsets, DecodeStrategy::LastStep, None).unwrap().segment == TimeSegment::new(12.0, 17.0).unwrap();

    let gt = TimeSegment::new(0.0, 20.0).unwrap();
    let pred = TimeSegment::new(0.0, 19.0).unwrap();
    let pair = [EvalPair::new(Some(pred), gt)];
    let iou_ok = (iou(&pred, &gt) - 0.95).abs() < 1e-12 && recall_at(&pair, 0.7) == Ok(100.0);

    check(
        two_step_ok && offsets_ok && iou_ok,
        format!("refinement text -> {two_step:?}; (10,20,+2,-3) ok: {offsets_ok}; IoU 0.95 passes 0.7: {iou_ok}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1 grammar round trip", grammar_round_trip),
        ("AC2 offset-sum invariant", offset_sum_invariant),
        ("AC3 bounds and resampling", bounds_and_resampling),
        ("AC4 noise calibration", noise_calibration),
        ("AC5 metric oracle", metric_oracle),
        ("AC6 gradient checks", gradient_checks),
        ("AC7 simulated decode ordering", simulation_ordering),
        ("AC8 end-to-end pipeline identity", pipeline_identity),
        ("AC9 worked examples", micro_examples),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {name} ({:.2} s): {detail}", t.elapsed().as_secs_f64());
        failed += outcome.is_err() as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
