//! Pulls a JSON document out of a free-form model reply.
//!
//! Candidate selection:
//! 1. the body of the first complete fenced code block (```` ``` ````);
//! 2. otherwise balanced `{...}` / `[...]` spans scanned left to right, with
//!    string literals and escapes respected. The first span that parses is
//!    returned; if none parses, the error of the first span is reported. An
//!    unterminated span runs to the end of the text and is parsed as is.
//!
//! Candidates are parsed strictly with `serde_json`.

use serde_json::Value;
use thiserror::Error;

use crate::value_spec::CodecError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("reply contains no structured document")]
    NoCandidate,
    /// `offset` counts characters from the start of the whole reply.
    #[error("structured document is malformed at character {offset}: {message}")]
    Parse { offset: usize, message: String },
}

pub fn extract_structured(content: &str) -> Result<Value, ExtractError> {
    if let Some((start, body)) = first_fenced_block(content) {
        return parse_candidate(content, start, body);
    }

    let mut first_error = None;
    let mut from = 0;
    while let Some((start, end)) = next_span(content, from) {
        match parse_candidate(content, start, &content[start..end]) {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
        from = end;
    }
    Err(first_error.unwrap_or(ExtractError::NoCandidate))
}

fn parse_candidate(content: &str, start: usize, candidate: &str) -> Result<Value, ExtractError> {
    if candidate.trim().is_empty() {
        return Err(ExtractError::NoCandidate);
    }
    serde_json::from_str(candidate).map_err(|e| {
        let inner = match crate::value_spec::codec_parse_error(candidate, &e) {
            CodecError::Parse { offset, .. } => offset,
            CodecError::Schema { .. } => 0,
        };
        ExtractError::Parse {
            offset: content[..start].chars().count() + inner,
            message: e.to_string(),
        }
    })
}

/// Returns the byte offset and text of the first fenced block's body.
fn first_fenced_block(content: &str) -> Option<(usize, &str)> {
    let open = content.find("```")?;
    let after_ticks = open + 3;
    // The rest of the opening line is the info string (e.g. `json`).
    let body_start = {
        let nl = content[after_ticks..].find('\n')?;
        after_ticks + nl + 1
    };
    let close = content[body_start..].find("```")?;
    Some((body_start, &content[body_start..body_start + close]))
}

/// Finds the next `{`/`[` at or after `from` and the end of its balanced span
/// (exclusive). Unterminated spans end at the end of `content`.
fn next_span(content: &str, from: usize) -> Option<(usize, usize)> {
    let bytes = content.as_bytes();
    let start = from + content[from..].find(['{', '['])?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, i + 1));
                }
            }
            _ => {}
        }
    }
    Some((start, content.len()))
}
