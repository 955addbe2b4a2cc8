//! Run configuration: one JSON file, overridden by command-line flags.
//!
//! Seed precedence is `--seed`, then the file's `seed`, then the
//! `TIMEREFINE_SEED` environment variable, then 0.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timerefine::decode::{DecodeOptions, DecodeStrategy};
use timerefine::losses::LossConfig;
use timerefine::seqgen::{RefinementVariant, SeqGenConfig, DEFAULT_MAX_RESAMPLES};
use timerefine::simulate::PredictorModel;
use timerefine::NoiseSchedule;

use crate::error::CliError;

pub const SEED_ENV: &str = "TIMEREFINE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Jsonl,
    Charades,
    Anet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeqGenSection {
    pub schedule: Option<NoiseSchedule>,
    pub variant: Option<RefinementVariant>,
    pub max_resamples: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub strategy: Option<DecodeStrategy>,
    pub first_step_offsets: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub input: Option<PathBuf>,
    pub input_format: Option<InputFormat>,
    pub durations: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub aux: Option<PathBuf>,
}

/// The on-disk configuration file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub seqgen: SeqGenSection,
    pub decode: DecodeSection,
    pub loss: LossConfig,
    pub model: Option<PredictorModel>,
    pub paths: PathsSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(seed) = flag.or(self.seed) {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    pub fn seqgen(&self, seed: u64) -> SeqGenConfig {
        SeqGenConfig {
            schedule: self.seqgen.schedule.clone().unwrap_or_default(),
            variant: self.seqgen.variant.unwrap_or_default(),
            seed,
            max_resamples: self.seqgen.max_resamples.unwrap_or(DEFAULT_MAX_RESAMPLES),
        }
    }

    /// The predictor model for `simulate`. Its own seed applies only when no
    /// run seed is given by flag, file or environment.
    pub fn model(&self, file: Option<PredictorModel>, flag: Option<u64>) -> Result<PredictorModel, CliError> {
        let mut model = file.or_else(|| self.model.clone()).unwrap_or_default();
        if flag.is_some() || self.seed.is_some() || std::env::var_os(SEED_ENV).is_some() {
            model.seed = self.seed(flag)?;
        }
        Ok(model)
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            first_step_offsets: self
                .decode
                .first_step_offsets
                .unwrap_or(DecodeOptions::default().first_step_offsets),
        }
    }

    pub fn strategy(&self, flag: Option<DecodeStrategy>) -> DecodeStrategy {
        flag.or(self.decode.strategy).unwrap_or(DecodeStrategy::LastStep)
    }
}

/// Fully resolved settings, printed by `timerefine config`.
#[derive(Debug, Serialize)]
pub struct Effective {
    pub seqgen: SeqGenConfig,
    pub decode_strategy: DecodeStrategy,
    pub decode: DecodeOptions,
    pub loss: LossConfig,
    pub model: PredictorModel,
}
