use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timerefine::decode::{decode_with, DecodeOptions, DecodeStrategy};
use timerefine::ingest::{self, Ingested};
use timerefine::metrics::{build_report, EvalPair};
use timerefine::seqgen::generate_dataset;
use timerefine::simulate::{run_study, PredictorModel};
use timerefine::{parse, GroundingSample, ParseOutcome, RefinementSequence, TimeSegment};

use crate::config::{Effective, InputFormat, RunConfig};
use crate::error::CliError;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `body` to `path`, or to standard output when `path` is `None`.
fn write_output(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = BufWriter::new(file);
            w.write_all(body.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(path, e))
        }
        None => io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.ok_or_else(|| CliError::Config(format!("missing {what}")))
}

fn report_issues(ingested: &Ingested, source: &Path) {
    for issue in &ingested.skipped {
        eprintln!("skip {}: {issue}", source.display());
    }
    for issue in &ingested.warnings {
        eprintln!("warning {}: {issue}", source.display());
    }
}

/// Reads ground truth from JSONL and refuses partially valid files, since
/// line alignment with predictions would silently break.
fn read_ground_truth(path: &Path) -> Result<Vec<GroundingSample>, CliError> {
    let ingested = ingest::read_jsonl(path)?;
    if let Some(first) = ingested.skipped.first() {
        return Err(CliError::Config(format!(
            "{}: {} invalid ground-truth record(s), first at {first}",
            path.display(),
            ingested.skipped.len()
        )));
    }
    Ok(ingested.samples)
}

#[derive(Serialize)]
struct GeneratedRecord<'a> {
    video_id: &'a str,
    query: &'a str,
    answer_text: &'a str,
    target: [f64; 2],
    steps: Vec<[f64; 4]>,
}

pub struct GenerateArgs {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub durations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn generate(cfg: &RunConfig, args: GenerateArgs) -> Result<(), CliError> {
    let input = require(args.input.or_else(|| cfg.paths.input.clone()), "--input")?;
    let format = args.format.or(cfg.paths.input_format).unwrap_or_default();
    let durations_path = args.durations.or_else(|| cfg.paths.durations.clone());
    let out = args.out.or_else(|| cfg.paths.output.clone());
    let seqgen = cfg.seqgen(cfg.seed(args.seed)?);

    let ingested = match format {
        InputFormat::Jsonl => ingest::read_jsonl(&input)?,
        InputFormat::Anet => ingest::read_activitynet_captions(&input)?,
        InputFormat::Charades => {
            let durations = match &durations_path {
                Some(p) => ingest::read_durations(p)?,
                None => Default::default(),
            };
            ingest::read_charades_sta(&input, &durations)?
        }
    };
    report_issues(&ingested, &input);

    let dataset = generate_dataset(ingested.samples, &seqgen);
    for skip in &dataset.skipped {
        eprintln!("skip sample {}: {}", skip.index, skip.reason);
    }
    let mut body = String::new();
    for ts in &dataset.samples {
        let record = GeneratedRecord {
            video_id: &ts.sample.video.video_id,
            query: &ts.sample.query,
            answer_text: &ts.answer_text,
            target: ts.sample.target.into(),
            steps: ts.sequence.to_arrays(),
        };
        body.push_str(&serde_json::to_string(&record).expect("record serializes"));
        body.push('\n');
    }
    write_output(out.as_deref(), &body)?;
    eprintln!(
        "generated {} sample(s); skipped {} on read, {} on generation; clamped {}; K={} sigmas={:?} mode={:?} variant={:?} seed={} lambda={}",
        dataset.samples.len(),
        ingested.skipped.len(),
        dataset.skipped.len(),
        dataset.clamped_count(),
        seqgen.schedule.steps(),
        seqgen.schedule.sigmas(),
        seqgen.schedule.mode(),
        seqgen.variant,
        seqgen.seed,
        cfg.loss.lambda,
    );
    Ok(())
}

/// One line of `parse` output.
#[derive(Serialize, Deserialize)]
struct ParsedRecord {
    line: usize,
    sequences: Vec<RefinementSequence>,
    diagnostics: Vec<timerefine::grammar::Diagnostic>,
    unparsed_spans: Vec<[usize; 2]>,
}

impl ParsedRecord {
    fn new(line: usize, outcome: ParseOutcome) -> Self {
        Self {
            line,
            sequences: outcome.sequences,
            diagnostics: outcome.diagnostics,
            unparsed_spans: outcome.unparsed_spans.into_iter().map(|r| [r.start, r.end]).collect(),
        }
    }
}

pub fn parse_texts(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = read_text(input)?;
    let mut body = String::new();
    let (mut lines, mut empty) = (0, 0);
    for (i, line) in text.lines().enumerate() {
        let record = ParsedRecord::new(i + 1, parse(line));
        lines += 1;
        empty += record.sequences.is_empty() as usize;
        body.push_str(&serde_json::to_string(&record).expect("record serializes"));
        body.push('\n');
    }
    write_output(out, &body)?;
    eprintln!("parsed {lines} line(s); {empty} without a valid block");
    Ok(())
}

/// Reads optional per-line auxiliary predictions: `[s, e]` or `null`.
fn read_aux(path: Option<&Path>) -> Result<Option<Vec<Option<TimeSegment>>>, CliError> {
    let Some(path) = path else { return Ok(None) };
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<Option<TimeSegment>>(line)
                .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

#[derive(Serialize)]
struct DecodedRecord {
    line: usize,
    segment: Option<TimeSegment>,
    adjusted: bool,
    multi_block: bool,
    error: Option<String>,
}

struct DecodeResult {
    segment: Option<TimeSegment>,
    adjusted: bool,
    multi_block: bool,
    error: Option<String>,
}

/// Decodes the first block of a parsed line.
fn decode_first(
    sequences: &[RefinementSequence],
    strategy: DecodeStrategy,
    aux: Option<&TimeSegment>,
    options: DecodeOptions,
) -> DecodeResult {
    let multi_block = sequences.len() > 1;
    let Some(seq) = sequences.first() else {
        return DecodeResult {
            segment: None,
            adjusted: false,
            multi_block,
            error: Some("no refinement block".into()),
        };
    };
    match decode_with(seq, strategy, aux, options) {
        Ok(d) => DecodeResult {
            segment: Some(d.segment),
            adjusted: d.adjusted,
            multi_block,
            error: None,
        },
        Err(e) => DecodeResult {
            segment: None,
            adjusted: false,
            multi_block,
            error: Some(e.to_string()),
        },
    }
}

fn aux_at(aux: &Option<Vec<Option<TimeSegment>>>, i: usize) -> Option<&TimeSegment> {
    aux.as_ref().and_then(|a| a.get(i)).and_then(Option::as_ref)
}

pub fn decode_parsed(
    input: &Path,
    strategy: DecodeStrategy,
    aux_path: Option<&Path>,
    options: DecodeOptions,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = read_text(input)?;
    let aux = read_aux(aux_path)?;
    let mut body = String::new();
    let (mut ok, mut failed) = (0, 0);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ParsedRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Config(format!("{} line {}: {e}", input.display(), i + 1)))?;
        let r = decode_first(&parsed.sequences, strategy, aux_at(&aux, i), options);
        if r.error.is_some() {
            failed += 1;
        } else {
            ok += 1;
        }
        let record = DecodedRecord {
            line: parsed.line,
            segment: r.segment,
            adjusted: r.adjusted,
            multi_block: r.multi_block,
            error: r.error,
        };
        body.push_str(&serde_json::to_string(&record).expect("record serializes"));
        body.push('\n');
    }
    write_output(out, &body)?;
    eprintln!("decoded {ok} record(s) with {strategy}; {failed} error(s)");
    Ok(())
}

pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub strategy: DecodeStrategy,
    pub aux: Option<PathBuf>,
    pub options: DecodeOptions,
    pub out: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let preds = read_text(&args.pred)?;
    let pred_lines: Vec<&str> = preds.lines().collect();
    let gt = read_ground_truth(&args.gt)?;
    if pred_lines.len() != gt.len() {
        return Err(CliError::Config(format!(
            "{} prediction line(s) but {} ground-truth record(s)",
            pred_lines.len(),
            gt.len()
        )));
    }
    let aux = read_aux(args.aux.as_deref())?;
    let (mut multi, mut adjusted) = (0, 0);
    let pairs: Vec<EvalPair> = pred_lines
        .iter()
        .zip(&gt)
        .enumerate()
        .map(|(i, (line, sample))| {
            let r = decode_first(&parse(line).sequences, args.strategy, aux_at(&aux, i), args.options);
            multi += r.multi_block as usize;
            adjusted += r.adjusted as usize;
            EvalPair::new(r.segment, sample.target)
        })
        .collect();
    let report = build_report(&pairs).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_output(Some(out), &format!("{json}\n"))?;
    }
    println!("{report}");
    eprintln!(
        "evaluated {} pair(s) with {}; {multi} multi-block answer(s) used their first block; {adjusted} adjusted",
        report.n, args.strategy
    );
    Ok(())
}

pub struct SimulateArgs {
    pub gt: PathBuf,
    pub model: Option<PredictorModel>,
    pub strategies: Vec<DecodeStrategy>,
    pub seed: Option<u64>,
    pub options: DecodeOptions,
    pub out: Option<PathBuf>,
}

pub fn load_model(path: &Path) -> Result<PredictorModel, CliError> {
    let text = read_text(path)?;
    let model: PredictorModel =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    model.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(model)
}

pub fn simulate(cfg: &RunConfig, args: SimulateArgs) -> Result<(), CliError> {
    let samples = read_ground_truth(&args.gt)?;
    let model = cfg.model(args.model, args.seed)?;
    let strategies = if args.strategies.is_empty() {
        DecodeStrategy::ALL.to_vec()
    } else {
        args.strategies
    };
    let study = run_study(&samples, &model, &strategies, args.options).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&study.to_json()).expect("study serializes");
        write_output(Some(out), &format!("{json}\n"))?;
    }
    print!("{}", study.table());
    eprintln!("simulated {} sample(s) with seed {}", samples.len(), model.seed);
    Ok(())
}

pub fn show_config(cfg: &RunConfig, seed: Option<u64>) -> Result<(), CliError> {
    let model = cfg.model(None, seed)?;
    let effective = Effective {
        seqgen: cfg.seqgen(cfg.seed(seed)?),
        decode_strategy: cfg.strategy(None),
        decode: cfg.decode_options(),
        loss: cfg.loss,
        model,
    };
    println!("{}", serde_json::to_string_pretty(&effective).expect("config serializes"));
    Ok(())
}
