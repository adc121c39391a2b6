//! TAL (time-stamped annotation list) grammar.
//!
//! One annotation-signal chunk holds zero or more TALs followed by `0x00`
//! padding:
//!
//! ```text
//! TAL   := onset [ 0x15 duration ] ( 0x14 text )+ 0x14 0x00
//! onset := ('+' | '-') decimal seconds
//! ```
//!
//! Every data record's chunk starts with a timekeeping TAL whose text is
//! empty; empty texts are skipped, so only real annotations come back.

use super::{AnnotationEvent, EdfError, Result};

const DURATION_SEP: u8 = 0x15;
const TEXT_SEP: u8 = 0x14;
const TAL_END: u8 = 0x00;

/// Parses one chunk, appending its non-empty annotations to `out`.
pub fn parse_chunk(chunk: &[u8], out: &mut Vec<AnnotationEvent>) -> Result<()> {
    let mut i = 0;
    while i < chunk.len() && chunk[i] != TAL_END {
        i = parse_tal(chunk, i, out)?;
    }
    // Everything after the last TAL must be zero padding.
    if let Some(bad) = chunk[i..].iter().position(|&b| b != TAL_END) {
        return Err(EdfError::MalformedTal(format!(
            "non-zero byte 0x{:02x} inside trailing padding at offset {}",
            chunk[i + bad],
            i + bad
        )));
    }
    Ok(())
}

/// Parses the TAL starting at `start`; returns the index just past its
/// `0x00` terminator.
fn parse_tal(chunk: &[u8], start: usize, out: &mut Vec<AnnotationEvent>) -> Result<usize> {
    let mut i = start;

    let onset_end = scan(chunk, i, &[DURATION_SEP, TEXT_SEP]).ok_or_else(|| {
        EdfError::MalformedTal(format!("onset at offset {i} has no 0x14 terminator"))
    })?;
    let onset_seconds = parse_onset(&chunk[i..onset_end])?;
    i = onset_end;

    let mut duration_seconds = 0.0;
    if chunk[i] == DURATION_SEP {
        let dur_end = scan(chunk, i + 1, &[TEXT_SEP]).ok_or_else(|| {
            EdfError::MalformedTal(format!("duration at offset {i} has no 0x14 terminator"))
        })?;
        let raw = String::from_utf8_lossy(&chunk[i + 1..dur_end]);
        duration_seconds = raw.trim().parse::<f64>().ok().filter(|d| d.is_finite() && *d >= 0.0)
            .ok_or_else(|| {
                EdfError::MalformedTal(format!("unparseable duration {raw:?}"))
            })?;
        i = dur_end;
    }

    // One or more 0x14-terminated texts, then the 0x00 terminator.
    let mut saw_text_field = false;
    loop {
        if chunk[i] != TEXT_SEP {
            return Err(EdfError::MalformedTal(format!(
                "expected 0x14 at offset {i}, found 0x{:02x}",
                chunk[i]
            )));
        }
        i += 1;
        if i < chunk.len() && chunk[i] == TAL_END && saw_text_field {
            return Ok(i + 1);
        }
        let text_end = scan(chunk, i, &[TEXT_SEP]).ok_or_else(|| {
            EdfError::MalformedTal(format!("annotation text at offset {i} has no 0x14 terminator"))
        })?;
        if chunk[i..text_end].contains(&TAL_END) {
            return Err(EdfError::MalformedTal(format!(
                "0x00 inside annotation text at offset {i}"
            )));
        }
        let text = String::from_utf8_lossy(&chunk[i..text_end]).into_owned();
        if !text.is_empty() {
            out.push(AnnotationEvent { onset_seconds, duration_seconds, text });
        }
        saw_text_field = true;
        i = text_end;
    }
}

/// Index of the next byte in `stops` at or after `from`, or None if the
/// chunk ends first.
fn scan(chunk: &[u8], from: usize, stops: &[u8]) -> Option<usize> {
    (from..chunk.len()).find(|&j| stops.contains(&chunk[j]))
}

fn parse_onset(raw: &[u8]) -> Result<f64> {
    let s = String::from_utf8_lossy(raw);
    let valid_sign = s.starts_with('+') || s.starts_with('-');
    let value: Option<f64> = s.parse().ok();
    match value {
        Some(v) if valid_sign && v.is_finite() => Ok(v),
        _ => Err(EdfError::NonNumericOnset(s.into_owned())),
    }
}

/// Encodes one TAL. Non-negative onsets get the explicit `+` EDF+ requires;
/// a zero duration is omitted entirely.
pub fn encode_tal(onset_seconds: f64, duration_seconds: f64, texts: &[&str]) -> Vec<u8> {
    let mut buf = Vec::new();
    if onset_seconds >= 0.0 {
        buf.push(b'+');
    }
    buf.extend_from_slice(onset_seconds.to_string().as_bytes());
    if duration_seconds > 0.0 {
        buf.push(DURATION_SEP);
        buf.extend_from_slice(duration_seconds.to_string().as_bytes());
    }
    for text in texts {
        buf.push(TEXT_SEP);
        buf.extend_from_slice(text.as_bytes());
    }
    buf.push(TEXT_SEP);
    buf.push(TAL_END);
    buf
}

/// The timekeeping TAL that must open every record's chunk: the record's
/// start time with an empty text.
pub fn encode_timekeeping(record_onset_seconds: f64) -> Vec<u8> {
    encode_tal(record_onset_seconds, 0.0, &[""])
}
