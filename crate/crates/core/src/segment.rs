//! Domain types shared by every stage of the pipeline.
//!
//! All times are real-valued seconds. The canonical text resolution is
//! 0.1 s; see [`quantize`] and [`to_tenths`].

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Canonical serialization resolution in seconds.
pub const RESOLUTION_S: f64 = 0.1;

/// Rounds a time to the nearest 0.1 s.
pub fn quantize(t: f64) -> f64 {
    from_tenths(to_tenths(t))
}

/// Converts seconds to an integer count of tenths, rounding half away from zero.
pub fn to_tenths(t: f64) -> i64 {
    (t * 10.0).round() as i64
}

/// Converts an integer count of tenths back to seconds.
pub fn from_tenths(tenths: i64) -> f64 {
    // `0.0` rather than `-0.0` keeps formatting stable.
    if tenths == 0 {
        0.0
    } else {
        tenths as f64 / 10.0
    }
}

/// A closed time interval `[start_s, end_s]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TimeSegment {
    pub start_s: f64,
    pub end_s: f64,
}

impl TimeSegment {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, ValidationError> {
        let seg = Self { start_s, end_s };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !self.start_s.is_finite() || !self.end_s.is_finite() {
            return Err(ValidationError::NonFinite);
        }
        if self.start_s < 0.0 || self.end_s < 0.0 {
            return Err(ValidationError::NegativeTime);
        }
        if self.start_s > self.end_s {
            return Err(ValidationError::StartAfterEnd);
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_point(&self) -> bool {
        self.start_s == self.end_s
    }

    /// Both endpoints rounded to the canonical 0.1 s grid.
    pub fn quantized(&self) -> Self {
        Self {
            start_s: quantize(self.start_s),
            end_s: quantize(self.end_s),
        }
    }
}

impl TryFrom<[f64; 2]> for TimeSegment {
    type Error = ValidationError;

    fn try_from([s, e]: [f64; 2]) -> Result<Self, Self::Error> {
        Self::new(s, e)
    }
}

impl From<TimeSegment> for [f64; 2] {
    fn from(seg: TimeSegment) -> Self {
        [seg.start_s, seg.end_s]
    }
}

/// One coarse-to-fine step: a segment estimate plus the offsets that map it
/// onto the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementStep {
    pub seg: TimeSegment,
    pub offset_start_s: f64,
    pub offset_end_s: f64,
}

impl RefinementStep {
    pub fn new(seg: TimeSegment, offset_start_s: f64, offset_end_s: f64) -> Result<Self, ValidationError> {
        let step = Self {
            seg,
            offset_start_s,
            offset_end_s,
        };
        step.validate()?;
        Ok(step)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.seg.validate()?;
        if !self.offset_start_s.is_finite() || !self.offset_end_s.is_finite() {
            return Err(ValidationError::NonFinite);
        }
        Ok(())
    }

    /// `(s + o^s, e + o^e)` without clamping.
    pub fn corrected(&self) -> (f64, f64) {
        (
            self.seg.start_s + self.offset_start_s,
            self.seg.end_s + self.offset_end_s,
        )
    }

    /// Flat `[s, e, o_s, o_e]` form used by the JSONL outputs.
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.seg.start_s,
            self.seg.end_s,
            self.offset_start_s,
            self.offset_end_s,
        ]
    }

    pub fn from_array([s, e, os, oe]: [f64; 4]) -> Result<Self, ValidationError> {
        Self::new(TimeSegment::new(s, e)?, os, oe)
    }
}

/// An ordered, non-empty list of refinement steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSequence {
    steps: Vec<RefinementStep>,
}

impl RefinementSequence {
    pub fn new(steps: Vec<RefinementStep>) -> Result<Self, ValidationError> {
        if steps.is_empty() {
            return Err(ValidationError::EmptySequence);
        }
        for step in &steps {
            step.validate()?;
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[RefinementStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> &RefinementStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &RefinementStep {
        &self.steps[self.steps.len() - 1]
    }

    pub fn into_steps(self) -> Vec<RefinementStep> {
        self.steps
    }

    pub fn to_arrays(&self) -> Vec<[f64; 4]> {
        self.steps.iter().map(RefinementStep::to_array).collect()
    }

    pub fn from_arrays(arrays: &[[f64; 4]]) -> Result<Self, ValidationError> {
        let steps = arrays
            .iter()
            .map(|a| RefinementStep::from_array(*a))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(steps)
    }
}

impl Serialize for RefinementSequence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_arrays().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RefinementSequence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let arrays = Vec::<[f64; 4]>::deserialize(deserializer)?;
        Self::from_arrays(&arrays).map_err(serde::de::Error::custom)
    }
}

/// How the schedule's sigmas are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Sigmas are standard deviations in seconds.
    #[default]
    FixedSeconds,
    /// Sigmas are multiplied by the video duration.
    FractionOfDuration,
}

/// Per-step Gaussian standard deviations, one per refinement step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    mode: ScheduleMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    sigmas: Vec<f64>,
    #[serde(default)]
    mode: ScheduleMode,
}

impl TryFrom<RawSchedule> for NoiseSchedule {
    type Error = ValidationError;

    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        Self::new(raw.sigmas, raw.mode)
    }
}

impl From<NoiseSchedule> for RawSchedule {
    fn from(s: NoiseSchedule) -> Self {
        RawSchedule {
            sigmas: s.sigmas,
            mode: s.mode,
        }
    }
}

impl NoiseSchedule {
    pub fn new(sigmas: Vec<f64>, mode: ScheduleMode) -> Result<Self, ValidationError> {
        if sigmas.is_empty() {
            return Err(ValidationError::EmptySchedule);
        }
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(ValidationError::NegativeSigma);
        }
        if sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(ValidationError::IncreasingSigmas);
        }
        Ok(Self { sigmas, mode })
    }

    pub fn fixed(sigmas: &[f64]) -> Result<Self, ValidationError> {
        Self::new(sigmas.to_vec(), ScheduleMode::FixedSeconds)
    }

    pub fn fraction_of_duration(fractions: &[f64]) -> Result<Self, ValidationError> {
        Self::new(fractions.to_vec(), ScheduleMode::FractionOfDuration)
    }

    /// Four steps with standard deviations {5, 3, 1, 0} seconds.
    pub fn default_fixed() -> Self {
        Self {
            sigmas: vec![5.0, 3.0, 1.0, 0.0],
            mode: ScheduleMode::FixedSeconds,
        }
    }

    /// The same schedule with every sigma multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ValidationError> {
        Self::new(self.sigmas.iter().map(|s| s * factor).collect(), self.mode)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len()
    }

    /// Standard deviation in seconds for step `k` on a video of `duration_s`.
    pub fn sigma_seconds(&self, k: usize, duration_s: f64) -> f64 {
        match self.mode {
            ScheduleMode::FixedSeconds => self.sigmas[k],
            ScheduleMode::FractionOfDuration => self.sigmas[k] * duration_s,
        }
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::default_fixed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration_s: f64,
}

/// One query against one video with its ground-truth segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingSample {
    pub video: VideoMeta,
    pub query: String,
    pub target: TimeSegment,
}

impl GroundingSample {
    pub fn new(video_id: impl Into<String>, duration_s: f64, query: impl Into<String>, target: TimeSegment) -> Self {
        Self {
            video: VideoMeta {
                video_id: video_id.into(),
                duration_s,
            },
            query: query.into(),
            target,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.video.duration_s
    }
}

/// Non-fatal findings from [`validate_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleWarning {
    ZeroLengthTarget,
}

impl std::fmt::Display for SampleWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleWarning::ZeroLengthTarget => f.write_str("zero-length target segment"),
        }
    }
}

/// A sample that passed validation, with any warning-level findings.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub sample: GroundingSample,
    pub warnings: Vec<SampleWarning>,
}

/// Checks every sample invariant. The sample is returned unchanged.
pub fn validate_sample(sample: GroundingSample) -> Result<Validated, ValidationError> {
    let duration = sample.video.duration_s;
    if !duration.is_finite() {
        return Err(ValidationError::NonFinite);
    }
    if duration <= 0.0 {
        return Err(ValidationError::NonPositiveDuration);
    }
    sample.target.validate()?;
    if sample.target.end_s > duration {
        return Err(ValidationError::TargetExceedsDuration);
    }
    let mut warnings = Vec::new();
    if sample.target.is_point() {
        warnings.push(SampleWarning::ZeroLengthTarget);
    }
    Ok(Validated { sample, warnings })
}
