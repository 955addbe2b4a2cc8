//! Iterative time refinement for LLM-based video temporal grounding.
//!
//! Instead of answering a grounding query with a single `start to end`
//! pair, a model is trained to emit a coarse segment, the offsets that
//! correct it, and then further refined segments:
//!
//! ```text
//! <seg_start> 15.0 to 27.5 <offset> 4.0 and -1.5 <refine> 18.0 to 24.0 <offset> 0.6 and -0.2 <seg_end>
//! ```
//!
//! This crate covers everything around the model:
//!
//! - [`seqgen`] turns ground-truth segments into such training sequences
//!   using a decreasing Gaussian noise schedule.
//! - [`grammar`] serializes and (leniently) parses the control-token text.
//! - [`decode`] reduces a parsed sequence to one final segment.
//! - [`losses`] holds the auxiliary regression head, its losses and
//!   closed-form gradients.
//! - [`metrics`] computes IoU, Recall@1 and mIoU.
//! - [`ingest`] reads Charades-STA, ActivityNet Captions and the canonical
//!   JSONL format.
//! - [`simulate`] runs decode-strategy studies against a synthetic noisy
//!   predictor.

pub mod decode;
pub mod error;
pub mod grammar;
pub mod ingest;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod segment;
pub mod seqgen;
pub mod simulate;

pub use decode::{decode, decode_with, DecodeOptions, DecodeStrategy, Decoded};
pub use error::{DecodeError, IngestError, LossError, MetricsError, ValidationError};
pub use grammar::{embed_in_answer, parse, serialize, ParseOutcome};
pub use metrics::{build_report, iou, mean_iou, recall_at, EvalPair, EvalReport};
pub use segment::{
    quantize, validate_sample, GroundingSample, NoiseSchedule, RefinementSequence, RefinementStep, ScheduleMode,
    TimeSegment, VideoMeta,
};
pub use seqgen::{generate_dataset, generate_training_sample, sample_offsets, RefinementVariant, SeqGenConfig, TrainingSample};
pub use simulate::{run_study, simulate_prediction, PredictorModel, StudyOutcome};
