//! Text codec for refinement blocks.
//!
//! Canonical form (see `docs/grammar.md` for the EBNF):
//!
//! ```text
//! <seg_start> 15.0 to 27.5 <offset> 4.0 and -1.5 <refine> 19.0 to 26.0 <offset> -0.4 and 0.0 <seg_end>
//! ```
//!
//! [`serialize`] always emits that form. [`parse`] is lenient: it accepts an
//! `s` suffix on numbers, an explicit `+` sign, integers, and arbitrary
//! whitespace, and it never fails. Anything it cannot use is reported as a
//! diagnostic or an unparsed span.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::segment::{quantize, RefinementSequence, RefinementStep, TimeSegment};

pub const SEG_START: &str = "<seg_start>";
pub const OFFSET: &str = "<offset>";
pub const REFINE: &str = "<refine>";
pub const SEG_END: &str = "<seg_end>";

/// Formats a time with one decimal and no `-0.0`.
pub fn format_time(t: f64) -> String {
    format!("{:.1}", quantize(t))
}

/// `"A to B"` at canonical resolution.
pub fn format_segment(seg: &TimeSegment) -> String {
    format!("{} to {}", format_time(seg.start_s), format_time(seg.end_s))
}

fn format_step(step: &RefinementStep) -> String {
    format!(
        "{} {OFFSET} {} and {}",
        format_segment(&step.seg),
        format_time(step.offset_start_s),
        format_time(step.offset_end_s)
    )
}

pub fn serialize(seq: &RefinementSequence) -> String {
    let body = seq
        .steps()
        .iter()
        .map(format_step)
        .collect::<Vec<_>>()
        .join(&format!(" {REFINE} "));
    format!("{SEG_START} {body} {SEG_END}")
}

/// Joins `prefix`, the serialized block and `suffix` with single spaces,
/// skipping empty parts.
pub fn embed_in_answer(prefix: &str, seq: &RefinementSequence, suffix: &str) -> String {
    let block = serialize(seq);
    [prefix, block.as_str(), suffix]
        .into_iter()
        .filter(|part| !part.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Byte offset into the parsed text.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub sequences: Vec<RefinementSequence>,
    pub diagnostics: Vec<Diagnostic>,
    /// Byte ranges of non-blank text outside any accepted block.
    pub unparsed_spans: Vec<Range<usize>>,
}

impl ParseOutcome {
    fn note(&mut self, position: usize, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            position,
            message: message.into(),
        });
    }

    fn unparsed(&mut self, text: &str, span: Range<usize>) {
        if !text[span.clone()].trim().is_empty() {
            self.unparsed_spans.push(span);
        }
    }
}

/// Extracts every well-formed block from arbitrary text.
pub fn parse(text: &str) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut cursor = 0;
    loop {
        let Some(open) = find_from(text, SEG_START, cursor) else {
            flag_stray_ends(text, cursor..text.len(), &mut out);
            out.unparsed(text, cursor..text.len());
            break;
        };
        flag_stray_ends(text, cursor..open, &mut out);
        out.unparsed(text, cursor..open);

        let body_start = open + SEG_START.len();
        let close = find_from(text, SEG_END, body_start);
        let reopen = find_from(text, SEG_START, body_start);
        match (close, reopen) {
            (close, Some(inner)) if close.is_none_or(|c| inner < c) => {
                out.note(open, "nested <seg_start> before <seg_end>; block discarded");
                out.unparsed(text, open..inner);
                cursor = inner;
            }
            (None, _) => {
                out.note(open, "unterminated block: missing <seg_end>");
                out.unparsed(text, open..text.len());
                break;
            }
            (Some(close), _) => {
                let block_end = close + SEG_END.len();
                match parse_block(&text[body_start..close], body_start) {
                    Ok(seq) => out.sequences.push(seq),
                    Err(diag) => {
                        out.diagnostics.push(diag);
                        out.unparsed(text, open..block_end);
                    }
                }
                cursor = block_end;
            }
        }
    }
    if out.sequences.is_empty() && out.diagnostics.is_empty() {
        out.note(0, "no <seg_start> block found");
    }
    out
}

fn find_from(text: &str, needle: &str, from: usize) -> Option<usize> {
    text[from..].find(needle).map(|i| i + from)
}

fn flag_stray_ends(text: &str, span: Range<usize>, out: &mut ParseOutcome) {
    for (i, _) in text[span.clone()].match_indices(SEG_END) {
        out.note(span.start + i, "stray <seg_end> without <seg_start>");
    }
}

fn parse_block(body: &str, base: usize) -> Result<RefinementSequence, Diagnostic> {
    let mut steps = Vec::new();
    let mut piece_start = 0;
    let mut pieces = Vec::new();
    for (i, _) in body.match_indices(REFINE) {
        pieces.push((piece_start, &body[piece_start..i]));
        piece_start = i + REFINE.len();
    }
    pieces.push((piece_start, &body[piece_start..]));

    if pieces.len() == 1 && body.trim().is_empty() {
        return Err(Diagnostic {
            position: base,
            message: "empty block".into(),
        });
    }
    for (index, (offset, piece)) in pieces.into_iter().enumerate() {
        let position = base + offset;
        let step = parse_step(piece).map_err(|message| Diagnostic {
            position,
            message: format!("{message} (step {index})"),
        })?;
        steps.push(step);
    }
    // parse_step validates every step, so the sequence is valid.
    RefinementSequence::new(steps).map_err(|e| Diagnostic {
        position: base,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy)]
enum Expect {
    Number,
    Word(&'static str),
}

const STEP_SHAPE: [Expect; 7] = [
    Expect::Number,
    Expect::Word("to"),
    Expect::Number,
    Expect::Word(OFFSET),
    Expect::Number,
    Expect::Word("and"),
    Expect::Number,
];

fn parse_step(piece: &str) -> Result<RefinementStep, String> {
    let spaced = piece.replace(OFFSET, &format!(" {OFFSET} "));
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let mut numbers = Vec::with_capacity(4);
    for (tok, expect) in tokens.iter().zip(STEP_SHAPE.iter()) {
        match expect {
            Expect::Number => match parse_number(tok) {
                Some(v) => numbers.push(v),
                None => return Err(format!("expected a number, found `{tok}`")),
            },
            Expect::Word(w) => {
                if tok != w {
                    return Err(format!("expected `{w}`, found `{tok}`"));
                }
            }
        }
    }
    if tokens.len() < STEP_SHAPE.len() {
        return Err("incomplete step".into());
    }
    if tokens.len() > STEP_SHAPE.len() {
        return Err(format!("unexpected trailing `{}`", tokens[STEP_SHAPE.len()]));
    }
    let seg = TimeSegment::new(numbers[0], numbers[1]).map_err(|e| format!("invalid segment: {e}"))?;
    RefinementStep::new(seg, numbers[2], numbers[3]).map_err(|e| format!("invalid step: {e}"))
}

/// `[+-]? digits ('.' digits)? 's'?`
fn parse_number(tok: &str) -> Option<f64> {
    let tok = tok.strip_suffix('s').unwrap_or(tok);
    let (negative, digits) = match tok.as_bytes().first()? {
        b'+' => (false, &tok[1..]),
        b'-' => (true, &tok[1..]),
        _ => (false, tok),
    };
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || frac.is_some_and(|f| !all_digits(f)) {
        return None;
    }
    let value: f64 = digits.parse().ok()?;
    Some(if negative { -value } else { value })
}
