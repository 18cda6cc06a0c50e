//! Canonical document encoding.
//!
//! Documents are JSON with a fixed field order (struct declaration order, or
//! sorted keys for maps), two-space indentation and a trailing newline. Wire
//! messages use the compact single-line form.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("wire line must not contain a newline")]
    EmbeddedNewline,
}

pub fn encode<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    out.push('\n');
    out
}

pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T, CodecError> {
    Ok(serde_json::from_str(text)?)
}

/// One wire line, newline-terminated.
pub fn encode_line<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string(value).expect("in-memory serialization cannot fail");
    out.push('\n');
    out
}

pub fn decode_line<T: DeserializeOwned>(line: &str) -> Result<T, CodecError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.contains('\n') {
        return Err(CodecError::EmbeddedNewline);
    }
    Ok(serde_json::from_str(body)?)
}
