//! Training-sequence generation.
//!
//! For each refinement step `k` the start and end offsets are drawn
//! independently from `N(0, sigma_k^2)` and the step's segment is the target
//! minus those offsets. Segments are snapped to the 0.1 s grid and the
//! offsets recomputed from the snapped values, so `s_k + o_k^s` reproduces
//! the target exactly at text resolution. A step whose snapped segment falls
//! outside `[0, duration]` or is inverted is redrawn whole.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::grammar::{self, format_segment};
use crate::metrics::iou;
use crate::rng::sample_rng;
use crate::segment::{
    from_tenths, to_tenths, validate_sample, GroundingSample, NoiseSchedule, RefinementSequence, RefinementStep,
    TimeSegment,
};

/// Marker used by the IoU-prediction answer format.
pub const IOU: &str = "<iou>";

pub const DEFAULT_MAX_RESAMPLES: u32 = 100;

/// Which refinement task the answer text encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementVariant {
    /// Segment followed by offsets to the target at every step.
    #[default]
    OffsetPrediction,
    /// Segment followed by its IoU against the target at every step.
    IouPrediction,
    /// Plain `start to end` answer.
    NoRefinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeqGenConfig {
    pub schedule: NoiseSchedule,
    pub variant: RefinementVariant,
    pub seed: u64,
    pub max_resamples: u32,
}

impl Default for SeqGenConfig {
    fn default() -> Self {
        Self {
            schedule: NoiseSchedule::default(),
            variant: RefinementVariant::default(),
            seed: 0,
            max_resamples: DEFAULT_MAX_RESAMPLES,
        }
    }
}

/// A generated sequence plus whether any step had to be clamped after
/// exhausting its resample budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    pub sequence: RefinementSequence,
    pub clamped: bool,
}

/// Draws one refinement sequence for `target` on a video of `duration_s`.
///
/// `target` must lie within `[0, duration_s]`; `max_resamples` is clamped to
/// at least 1.
pub fn sample_offsets<R: Rng + ?Sized>(
    target: &TimeSegment,
    schedule: &NoiseSchedule,
    duration_s: f64,
    max_resamples: u32,
    rng: &mut R,
) -> SampledSequence {
    let target_s = to_tenths(target.start_s);
    let target_e = to_tenths(target.end_s);
    // Bounds are checked at text resolution.
    let limit = to_tenths(duration_s);
    let attempts = max_resamples.max(1);

    let mut clamped = false;
    let mut steps = Vec::with_capacity(schedule.steps());
    for k in 0..schedule.steps() {
        let sigma = schedule.sigma_seconds(k, duration_s);
        let (s, e) = if sigma == 0.0 {
            (target_s, target_e)
        } else {
            let mut accepted = None;
            let mut last = (target_s, target_e);
            for _ in 0..attempts {
                let os: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let oe: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let s = to_tenths(target.start_s - os);
                let e = to_tenths(target.end_s - oe);
                last = (s, e);
                if 0 <= s && s <= e && e <= limit {
                    accepted = Some((s, e));
                    break;
                }
            }
            accepted.unwrap_or_else(|| {
                clamped = true;
                let (s, e) = (last.0.clamp(0, limit), last.1.clamp(0, limit));
                (s.min(e), s.max(e))
            })
        };
        let seg = TimeSegment {
            start_s: from_tenths(s),
            end_s: from_tenths(e),
        };
        steps.push(RefinementStep {
            seg,
            offset_start_s: from_tenths(target_s - s),
            offset_end_s: from_tenths(target_e - e),
        });
    }
    SampledSequence {
        sequence: RefinementSequence::new(steps).expect("schedule is non-empty and steps are in bounds"),
        clamped,
    }
}

/// One model-ready training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub sample: GroundingSample,
    pub answer_text: String,
    pub sequence: RefinementSequence,
    /// Ground truth for the auxiliary head, one per refinement block.
    pub aux_targets: Vec<TimeSegment>,
    pub clamped: bool,
}

/// Builds the answer text for `sample` using the configured variant.
pub fn generate_training_sample<R: Rng + ?Sized>(
    sample: GroundingSample,
    config: &SeqGenConfig,
    rng: &mut R,
) -> Result<TrainingSample, ValidationError> {
    let sample = validate_sample(sample)?.sample;
    let target = sample.target;
    let (sequence, clamped, answer_text) = match config.variant {
        RefinementVariant::NoRefinement => {
            let q = target.quantized();
            let seq = RefinementSequence::new(vec![RefinementStep {
                seg: q,
                offset_start_s: 0.0,
                offset_end_s: 0.0,
            }])?;
            (seq, false, format_segment(&q))
        }
        RefinementVariant::OffsetPrediction => {
            let drawn = sample_offsets(&target, &config.schedule, sample.duration_s(), config.max_resamples, rng);
            let text = grammar::serialize(&drawn.sequence);
            (drawn.sequence, drawn.clamped, text)
        }
        RefinementVariant::IouPrediction => {
            let drawn = sample_offsets(&target, &config.schedule, sample.duration_s(), config.max_resamples, rng);
            let text = serialize_iou_block(&drawn.sequence, &target);
            (drawn.sequence, drawn.clamped, text)
        }
    };
    Ok(TrainingSample {
        sample,
        answer_text,
        sequence,
        aux_targets: vec![target],
        clamped,
    })
}

/// `<seg_start> A to B <iou> V <refine> ... <seg_end>` with V to one decimal.
pub fn serialize_iou_block(seq: &RefinementSequence, target: &TimeSegment) -> String {
    let body = seq
        .steps()
        .iter()
        .map(|step| format!("{} {IOU} {:.1}", format_segment(&step.seg), iou(&step.seg, target)))
        .collect::<Vec<_>>()
        .join(&format!(" {} ", grammar::REFINE));
    format!("{} {body} {}", grammar::SEG_START, grammar::SEG_END)
}

/// A sample that was dropped during dataset generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub index: usize,
    pub reason: ValidationError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratedDataset {
    pub samples: Vec<TrainingSample>,
    pub skipped: Vec<Skipped>,
}

impl GeneratedDataset {
    pub fn clamped_count(&self) -> usize {
        self.samples.iter().filter(|s| s.clamped).count()
    }
}

/// Generates one training sample per input, in input order.
///
/// Sample `i` draws from the stream `(config.seed, i)`, so the output does
/// not depend on the rayon thread count.
pub fn generate_dataset<I>(samples: I, config: &SeqGenConfig) -> GeneratedDataset
where
    I: IntoIterator<Item = GroundingSample>,
{
    let inputs: Vec<GroundingSample> = samples.into_iter().collect();
    let results: Vec<Result<TrainingSample, ValidationError>> = inputs
        .into_par_iter()
        .enumerate()
        .map(|(index, sample)| {
            let mut rng = sample_rng(config.seed, index as u64);
            generate_training_sample(sample, config, &mut rng)
        })
        .collect();

    let mut out = GeneratedDataset::default();
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(sample) => out.samples.push(sample),
            Err(reason) => out.skipped.push(Skipped { index, reason }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse;
    use crate::segment::quantize;

    fn seg(s: f64, e: f64) -> TimeSegment {
        TimeSegment::new(s, e).unwrap()
    }

    #[test]
    fn zero_noise_schedule_reproduces_target() {
        let schedule = NoiseSchedule::fixed(&[0.0; 4]).unwrap();
        let drawn = sample_offsets(&seg(10.0, 20.0), &schedule, 60.0, 100, &mut sample_rng(1, 0));
        assert_eq!(drawn.sequence.len(), 4);
        for step in drawn.sequence.steps() {
            assert_eq!(step.to_array(), [10.0, 20.0, 0.0, 0.0]);
        }
        assert!(!drawn.clamped);
    }

    #[test]
    fn final_zero_sigma_step_has_zero_offsets() {
        let mut rng = sample_rng(3, 0);
        for _ in 0..200 {
            let drawn = sample_offsets(&seg(31.3, 47.9), &NoiseSchedule::default(), 120.0, 100, &mut rng);
            let last = drawn.sequence.last();
            assert_eq!((last.offset_start_s, last.offset_end_s), (0.0, 0.0));
            assert_eq!((last.seg.start_s, last.seg.end_s), (31.3, 47.9));
        }
    }

    #[test]
    fn offset_example_maps_to_target() {
        let step = RefinementStep::new(seg(10.0, 20.0), 2.0, -3.0).unwrap();
        assert_eq!(step.corrected(), (12.0, 17.0));
    }

    #[test]
    fn offsets_sum_to_target_for_off_grid_targets() {
        let target = seg(6.93, 14.27);
        let mut rng = sample_rng(9, 0);
        for _ in 0..500 {
            let drawn = sample_offsets(&target, &NoiseSchedule::default(), 40.0, 100, &mut rng);
            for step in drawn.sequence.steps() {
                let (s, e) = step.corrected();
                assert_eq!(quantize(s), quantize(target.start_s));
                assert_eq!(quantize(e), quantize(target.end_s));
            }
        }
    }

    #[test]
    fn clamps_after_resample_budget() {
        // A huge sigma on a short video makes every draw fall out of bounds.
        let schedule = NoiseSchedule::fixed(&[1e6]).unwrap();
        let drawn = sample_offsets(&seg(1.0, 2.0), &schedule, 3.0, 1, &mut sample_rng(0, 0));
        assert!(drawn.clamped);
        let step = drawn.sequence.first();
        assert!(0.0 <= step.seg.start_s && step.seg.start_s <= step.seg.end_s && step.seg.end_s <= 3.0);
        assert_eq!(step.corrected().0, 1.0);
        assert_eq!(quantize(step.corrected().1), 2.0);
    }

    #[test]
    fn fraction_mode_scales_with_duration() {
        let schedule = NoiseSchedule::fraction_of_duration(&[0.2, 0.0]).unwrap();
        let mut rng = sample_rng(5, 0);
        let n = 4000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let d = sample_offsets(&seg(500.0, 520.0), &schedule, 1000.0, 100, &mut rng);
            sum_sq += d.sequence.first().offset_start_s.powi(2);
        }
        let std = (sum_sq / n as f64).sqrt();
        assert!((std - 200.0).abs() < 10.0, "std {std}");
    }

    #[test]
    fn no_refinement_answer() {
        let config = SeqGenConfig {
            variant: RefinementVariant::NoRefinement,
            ..Default::default()
        };
        let ts = generate_training_sample(
            GroundingSample::new("v", 100.0, "breakfast", seg(20.0, 90.0)),
            &config,
            &mut sample_rng(0, 0),
        )
        .unwrap();
        assert_eq!(ts.answer_text, "20.0 to 90.0");
        assert_eq!(ts.aux_targets, vec![seg(20.0, 90.0)]);
    }

    #[test]
    fn iou_block_format() {
        let seq = RefinementSequence::new(vec![
            RefinementStep::new(seg(10.0, 20.0), 2.0, 2.0).unwrap(),
            RefinementStep::new(seg(12.0, 22.0), 0.0, 0.0).unwrap(),
        ])
        .unwrap();
        let target = seg(12.0, 22.0);
        assert!((iou(&seg(10.0, 20.0), &target) - 0.667).abs() < 5e-4);
        assert_eq!(
            serialize_iou_block(&seq, &target),
            "<seg_start> 10.0 to 20.0 <iou> 0.7 <refine> 12.0 to 22.0 <iou> 1.0 <seg_end>"
        );
    }

    #[test]
    fn offset_answer_parses_back() {
        let config = SeqGenConfig::default();
        let ts = generate_training_sample(
            GroundingSample::new("v", 60.0, "q", seg(12.5, 33.1)),
            &config,
            &mut sample_rng(11, 0),
        )
        .unwrap();
        assert_eq!(parse(&ts.answer_text).sequences, vec![ts.sequence.clone()]);
        let last = ts.sequence.last();
        assert_eq!((last.offset_start_s, last.offset_end_s), (0.0, 0.0));
    }

    #[test]
    fn invalid_sample_is_rejected() {
        let bad = GroundingSample::new("v", 15.0, "q", seg(10.0, 20.0));
        let err = generate_training_sample(bad, &SeqGenConfig::default(), &mut sample_rng(0, 0)).unwrap_err();
        assert_eq!(err, ValidationError::TargetExceedsDuration);
    }

    #[test]
    fn dataset_skips_and_reports() {
        let samples = vec![
            GroundingSample::new("a", 30.0, "q", seg(1.0, 2.0)),
            GroundingSample::new("b", 15.0, "q", seg(10.0, 20.0)),
            GroundingSample::new("c", 30.0, "q", seg(3.0, 9.0)),
        ];
        let out = generate_dataset(samples, &SeqGenConfig::default());
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.skipped, vec![Skipped { index: 1, reason: ValidationError::TargetExceedsDuration }]);
        assert!(generate_dataset(Vec::new(), &SeqGenConfig::default()).samples.is_empty());
    }

    #[test]
    fn dataset_is_independent_of_thread_count() {
        let samples: Vec<_> = (0..64)
            .map(|i| GroundingSample::new(format!("v{i}"), 50.0, "q", seg(i as f64 * 0.5, 20.0 + i as f64 * 0.3)))
            .collect();
        let config = SeqGenConfig {
            seed: 42,
            ..Default::default()
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| generate_dataset(samples.clone(), &config))
        };
        let single = run(1);
        assert_eq!(single, run(4));
        assert_eq!(single, run(7));
    }
}
