//! Final-segment decoding from a refinement sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::segment::{RefinementSequence, RefinementStep, TimeSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStrategy {
    /// First step's segment (offsets applied unless disabled in [`DecodeOptions`]).
    FirstStep,
    /// Final step's segment plus its offsets.
    LastStep,
    /// The auxiliary head's prediction as-is.
    AuxHead,
    /// Per-endpoint mean of `LastStep` and `AuxHead`.
    Merged,
}

impl DecodeStrategy {
    pub const ALL: [DecodeStrategy; 4] = [Self::FirstStep, Self::LastStep, Self::AuxHead, Self::Merged];

    pub fn name(self) -> &'static str {
        match self {
            Self::FirstStep => "first_step",
            Self::LastStep => "last_step",
            Self::AuxHead => "aux_head",
            Self::Merged => "merged",
        }
    }

    pub fn needs_aux(self) -> bool {
        matches!(self, Self::AuxHead | Self::Merged)
    }
}

impl fmt::Display for DecodeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecodeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown decode strategy `{s}` (expected first_step, last_step, aux_head or merged)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeOptions {
    /// Whether `FirstStep` adds the step-0 offsets.
    pub first_step_offsets: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            first_step_offsets: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub segment: TimeSegment,
    /// Set when the raw result was negative or inverted and had to be fixed up.
    pub adjusted: bool,
}

pub fn decode(
    seq: &RefinementSequence,
    strategy: DecodeStrategy,
    aux: Option<&TimeSegment>,
) -> Result<Decoded, DecodeError> {
    decode_with(seq, strategy, aux, DecodeOptions::default())
}

pub fn decode_with(
    seq: &RefinementSequence,
    strategy: DecodeStrategy,
    aux: Option<&TimeSegment>,
    options: DecodeOptions,
) -> Result<Decoded, DecodeError> {
    let steps = seq.steps();
    if steps.is_empty() {
        return Err(DecodeError::EmptySequence);
    }
    let aux_pair = || {
        aux.map(|a| (a.start_s, a.end_s))
            .ok_or(DecodeError::MissingAux(strategy.name()))
    };
    let raw = match strategy {
        DecodeStrategy::LastStep => seq.last().corrected(),
        DecodeStrategy::FirstStep if options.first_step_offsets => seq.first().corrected(),
        DecodeStrategy::FirstStep => raw_segment(seq.first()),
        DecodeStrategy::AuxHead => aux_pair()?,
        DecodeStrategy::Merged => {
            let (s, e) = seq.last().corrected();
            let (as_, ae) = aux_pair()?;
            ((s + as_) / 2.0, (e + ae) / 2.0)
        }
    };
    Ok(fix_up(raw))
}

fn raw_segment(step: &RefinementStep) -> (f64, f64) {
    (step.seg.start_s, step.seg.end_s)
}

/// Clamps to `[0, inf)` and swaps inverted endpoints.
pub fn fix_up((s, e): (f64, f64)) -> Decoded {
    let (cs, ce) = (s.max(0.0), e.max(0.0));
    let adjusted = cs != s || ce != e || cs > ce;
    Decoded {
        segment: TimeSegment {
            start_s: cs.min(ce),
            end_s: cs.max(ce),
        },
        adjusted,
    }
}
