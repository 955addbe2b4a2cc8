//! Annotation readers and the canonical JSONL exchange format.
//!
//! Readers never abort on a single bad record: the record is skipped and a
//! [`RecordIssue`] explains why. Recoverable oddities (clamped overshoot,
//! missing duration) are kept and reported as warnings.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::IngestError;
use crate::segment::{validate_sample, GroundingSample, TimeSegment, VideoMeta};

/// A skipped record or a warning about a kept one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordIssue {
    /// 1-based line number for line formats, video id for ActivityNet.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub samples: Vec<GroundingSample>,
    pub skipped: Vec<RecordIssue>,
    pub warnings: Vec<RecordIssue>,
}

impl Ingested {
    fn skip(&mut self, location: impl ToString, message: impl Into<String>) {
        self.skipped.push(RecordIssue {
            location: location.to_string(),
            message: message.into(),
        });
    }

    fn warn(&mut self, location: impl ToString, message: impl Into<String>) {
        self.warnings.push(RecordIssue {
            location: location.to_string(),
            message: message.into(),
        });
    }
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a `video_id -> duration` JSON object, the sidecar for Charades-STA.
pub fn read_durations(path: &Path) -> Result<HashMap<String, f64>, IngestError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| IngestError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads Charades-STA lines `VIDEO_ID START END##sentence`.
///
/// Videos missing from `durations` fall back to `max(START, END)` with a
/// warning.
pub fn read_charades_sta(path: &Path, durations: &HashMap<String, f64>) -> Result<Ingested, IngestError> {
    Ok(parse_charades_sta(&read_to_string(path)?, durations))
}

pub fn parse_charades_sta(text: &str, durations: &HashMap<String, f64>) -> Ingested {
    let mut out = Ingested::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = format!("line {}", i + 1);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((head, sentence)) = line.split_once("##") else {
            out.skip(lineno, "missing `##` separator");
            continue;
        };
        let fields: Vec<&str> = head.split_whitespace().collect();
        let [video_id, start, end] = fields[..] else {
            out.skip(lineno, format!("expected `VIDEO_ID START END`, found `{head}`"));
            continue;
        };
        let (Ok(start), Ok(end)) = (start.parse::<f64>(), end.parse::<f64>()) else {
            out.skip(lineno, "unparsable start/end time");
            continue;
        };
        let duration = match durations.get(video_id) {
            Some(d) => *d,
            None => {
                let fallback = start.max(end);
                out.warn(&lineno, format!("no duration for `{video_id}`; using {fallback}"));
                fallback
            }
        };
        let mut target = TimeSegment { start_s: start, end_s: end };
        if end > duration && start <= duration && duration > 0.0 {
            out.warn(&lineno, format!("end {end} exceeds duration {duration}; clamped"));
            target.end_s = duration;
        }
        let sample = GroundingSample::new(video_id, duration, sentence.trim(), target);
        match validate_sample(sample) {
            Ok(v) => out.samples.push(v.sample),
            Err(e) => out.skip(lineno, e.to_string()),
        }
    }
    out
}

/// Reads an ActivityNet Captions split: a JSON object keyed by video id with
/// `duration`, `timestamps` and a parallel `sentences` list.
pub fn read_activitynet_captions(path: &Path) -> Result<Ingested, IngestError> {
    let text = read_to_string(path)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| IngestError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let Value::Object(videos) = root else {
        return Err(IngestError::Format {
            path: path.display().to_string(),
            message: "top level is not a JSON object".into(),
        });
    };
    Ok(parse_activitynet_videos(videos))
}

#[derive(Deserialize)]
struct AnetVideo {
    duration: f64,
    timestamps: Vec<[f64; 2]>,
    sentences: Vec<String>,
}

fn parse_activitynet_videos(videos: serde_json::Map<String, Value>) -> Ingested {
    let mut out = Ingested::default();
    for (video_id, entry) in videos {
        let video: AnetVideo = match serde_json::from_value(entry) {
            Ok(v) => v,
            Err(e) => {
                out.skip(&video_id, format!("malformed entry: {e}"));
                continue;
            }
        };
        if video.timestamps.len() != video.sentences.len() {
            out.skip(
                &video_id,
                format!(
                    "{} timestamps but {} sentences",
                    video.timestamps.len(),
                    video.sentences.len()
                ),
            );
            continue;
        }
        for (j, ([s, e], sentence)) in video.timestamps.into_iter().zip(video.sentences).enumerate() {
            let location = format!("{video_id}[{j}]");
            let (cs, ce) = (s.clamp(0.0, video.duration), e.clamp(0.0, video.duration));
            if (cs, ce) != (s, e) {
                out.warn(&location, format!("[{s}, {e}] clamped to [0, {}]", video.duration));
            }
            let sample = GroundingSample::new(
                video_id.as_str(),
                video.duration,
                sentence.trim(),
                TimeSegment { start_s: cs, end_s: ce },
            );
            match validate_sample(sample) {
                Ok(v) => out.samples.push(v.sample),
                Err(err) => out.skip(location, err.to_string()),
            }
        }
    }
    out
}

/// One line of the canonical JSONL format. Field order is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub video_id: String,
    pub duration_s: f64,
    pub query: String,
    pub segment: [f64; 2],
}

impl From<&GroundingSample> for DatasetRecord {
    fn from(s: &GroundingSample) -> Self {
        Self {
            video_id: s.video.video_id.clone(),
            duration_s: s.video.duration_s,
            query: s.query.clone(),
            segment: [s.target.start_s, s.target.end_s],
        }
    }
}

impl From<DatasetRecord> for GroundingSample {
    fn from(r: DatasetRecord) -> Self {
        GroundingSample {
            video: VideoMeta {
                video_id: r.video_id,
                duration_s: r.duration_s,
            },
            query: r.query,
            target: TimeSegment {
                start_s: r.segment[0],
                end_s: r.segment[1],
            },
        }
    }
}

pub fn read_jsonl(path: &Path) -> Result<Ingested, IngestError> {
    Ok(parse_jsonl(&read_to_string(path)?))
}

pub fn parse_jsonl(text: &str) -> Ingested {
    let mut out = Ingested::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = format!("line {}", i + 1);
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                out.skip(lineno, format!("invalid record: {e}"));
                continue;
            }
        };
        match validate_sample(record.into()) {
            Ok(v) => out.samples.push(v.sample),
            Err(e) => out.skip(lineno, e.to_string()),
        }
    }
    out
}

/// Serializes one sample as a JSONL line (without the newline).
pub fn to_jsonl_line(sample: &GroundingSample) -> String {
    serde_json::to_string(&DatasetRecord::from(sample)).expect("record serialization is infallible")
}

pub fn write_jsonl<'a, I>(path: &Path, samples: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = &'a GroundingSample>,
{
    let write_err = |source| IngestError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(write_err)?;
    let mut w = BufWriter::new(file);
    for sample in samples {
        writeln!(w, "{}", to_jsonl_line(sample)).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}
