//! Text trace formats and witness output.
//!
//! Simple format, one event per line:
//!
//! ```text
//! T1 acq l
//! T1 w x @Main.java:12   # optional location, then comment
//! ```
//!
//! Std format: `T2|r(x)|L7`, op names case-insensitive.

use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::trace::{build_trace, BuildOptions, EventId, Op, RawEvent, Trace, TraceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Simple,
    Std,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(TraceFormat::Simple),
            "std" => Ok(TraceFormat::Std),
            other => Err(format!("unknown trace format '{other}' (expected simple or std)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("parse error at line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. } => Some(*line),
            ParseError::Trace(TraceError::Malformed { line, .. }) => Some(*line),
            _ => None,
        }
    }
}

fn syntax(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn is_thread_name(s: &str) -> bool {
    s.len() > 1 && s.starts_with('T') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '#' | '@' | '|' | '(' | ')'))
}

fn parse_simple_line(text: &str, line: usize) -> Result<Option<RawEvent>, ParseError> {
    let text = text.split('#').next().unwrap_or("");
    let mut toks = text.split_whitespace();
    let Some(thread) = toks.next() else {
        return Ok(None);
    };
    if !is_thread_name(thread) {
        return Err(syntax(line, format!("bad thread name '{thread}'")));
    }
    let op_tok = toks.next().ok_or_else(|| syntax(line, "missing op"))?;
    let op = match op_tok {
        "r" => Op::Read,
        "w" => Op::Write,
        "acq" => Op::Acquire,
        "rel" => Op::Release,
        "fork" => Op::Fork,
        "join" => Op::Join,
        other => return Err(syntax(line, format!("unknown op '{other}'"))),
    };
    let target = toks.next().ok_or_else(|| syntax(line, "missing target"))?;
    if !is_name(target) {
        return Err(syntax(line, format!("bad target '{target}'")));
    }
    if matches!(op, Op::Fork | Op::Join) && !is_thread_name(target) {
        return Err(syntax(line, format!("bad thread name '{target}'")));
    }
    let location = match toks.next() {
        None => None,
        Some(tok) => match tok.strip_prefix('@') {
            Some(loc) if is_name(loc) => Some(loc.to_string()),
            _ => return Err(syntax(line, format!("expected @location, found '{tok}'"))),
        },
    };
    if let Some(extra) = toks.next() {
        return Err(syntax(line, format!("unexpected '{extra}'")));
    }
    Ok(Some(RawEvent {
        thread: thread.to_string(),
        op,
        target: target.to_string(),
        location,
        line,
    }))
}

fn parse_std_line(text: &str, line: usize) -> Result<Option<RawEvent>, ParseError> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let parts: Vec<&str> = text.split('|').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(syntax(line, "expected <thread>|<op>(<target>)|<location>"));
    }
    let thread = parts[0];
    if !is_name(thread) {
        return Err(syntax(line, format!("bad thread name '{thread}'")));
    }
    let body = parts[1];
    let open = body.find('(').ok_or_else(|| syntax(line, "missing '(' after op"))?;
    let inner = body[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| syntax(line, "missing ')' after target"))?;
    let op = Op::parse(body[..open].trim()).ok_or_else(|| syntax(line, format!("unknown op '{}'", &body[..open])))?;
    let target = inner.trim();
    if !is_name(target) {
        return Err(syntax(line, format!("bad target '{target}'")));
    }
    let location = match parts.get(2) {
        None | Some(&"") => None,
        Some(loc) if is_name(loc) => Some(loc.to_string()),
        Some(loc) => return Err(syntax(line, format!("bad location '{loc}'"))),
    };
    Ok(Some(RawEvent {
        thread: thread.to_string(),
        op,
        target: target.to_string(),
        location,
        line,
    }))
}

/// Parse input into raw events without validating trace structure.
pub fn parse_raw(input: &[u8], format: TraceFormat) -> Result<Vec<RawEvent>, ParseError> {
    let mut out = Vec::new();
    for (i, bytes) in input.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);
        let text = std::str::from_utf8(bytes).map_err(|_| syntax(line, "invalid UTF-8"))?;
        let ev = match format {
            TraceFormat::Simple => parse_simple_line(text, line)?,
            TraceFormat::Std => parse_std_line(text, line)?,
        };
        out.extend(ev);
    }
    if out.is_empty() {
        return Err(syntax(0, "empty trace"));
    }
    Ok(out)
}

pub fn parse(input: &[u8], format: TraceFormat, opts: BuildOptions) -> Result<Trace, ParseError> {
    let raw = parse_raw(input, format)?;
    Ok(build_trace(&raw, opts)?)
}

/// Parse simple-format text with default options.
pub fn parse_str(text: &str) -> Result<Trace, ParseError> {
    parse(text.as_bytes(), TraceFormat::Simple, BuildOptions::default())
}

pub fn read_file(path: &Path, format: TraceFormat, opts: BuildOptions) -> Result<Trace, ParseError> {
    let bytes = std::fs::read(path)?;
    parse(&bytes, format, opts)
}

/// Simple-format line for one event, without annotation.
pub fn format_event(t: &Trace, e: EventId) -> String {
    let ev = t.event(e);
    let mut s = format!("{} {} {}", t.thread_name(ev.thread), ev.op.mnemonic(), t.target_name(e));
    if let Some(loc) = t.location_name(ev.location) {
        s.push_str(" @");
        s.push_str(loc);
    }
    s
}

/// Write a sequence of events in simple format, one line each, annotated
/// with the event's index in the original trace. Init writes are skipped.
pub fn emit_witness<W: Write + ?Sized>(t: &Trace, seq: &[EventId], sink: &mut W) -> io::Result<()> {
    for &e in seq {
        if t.is_init(e) {
            continue;
        }
        writeln!(sink, "{} # e{}", format_event(t, e), t.event(e).index)?;
    }
    Ok(())
}

/// Write raw events in the simple format.
pub fn emit_raw<W: Write + ?Sized>(raw: &[RawEvent], sink: &mut W) -> io::Result<()> {
    for r in raw {
        write!(sink, "{} {} {}", r.thread, r.op.mnemonic(), r.target)?;
        match &r.location {
            Some(loc) => writeln!(sink, " @{loc}")?,
            None => writeln!(sink)?,
        }
    }
    Ok(())
}

/// Write the whole input part of a trace in simple format.
pub fn emit_trace<W: Write + ?Sized>(t: &Trace, sink: &mut W) -> io::Result<()> {
    let all: Vec<EventId> = (0..t.len() as EventId).collect();
    emit_witness(t, &all, sink)
}
