//! Flattening rules for multi-valued columns on flat-file surfaces.

use thiserror::Error;

/// Separator between values of one multi-valued CSV cell.
pub const DELIMITER: &str = "; ";

/// What a delimiter occurrence inside a single value is rewritten to.
const DELIMITER_REWRITE: &str = ", ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("value {0:?} contains the multi-value delimiter")]
    ContainsDelimiter(String),
    #[error("value {0:?} contains a line break")]
    ContainsNewline(String),
    #[error("empty value in multi-valued field")]
    Empty,
}

pub fn join_multivalue<S: AsRef<str>>(items: &[S]) -> Result<String, JoinError> {
    for item in items {
        let item = item.as_ref();
        if item.is_empty() {
            return Err(JoinError::Empty);
        }
        if item.contains(DELIMITER) {
            return Err(JoinError::ContainsDelimiter(item.to_string()));
        }
        if item.contains(['\n', '\r']) {
            return Err(JoinError::ContainsNewline(item.to_string()));
        }
    }
    Ok(items.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(DELIMITER))
}

pub fn split_multivalue(cell: &str) -> Vec<String> {
    if cell.is_empty() {
        return Vec::new();
    }
    cell.split(DELIMITER).map(str::to_string).collect()
}

/// Normalizes one source text value.
///
/// Without `preserve_newlines` every whitespace run collapses to one space, the
/// ends are trimmed, and delimiter occurrences become `", "`. With it (claims
/// only) line structure is kept: line endings become `\n` and each line loses
/// its trailing whitespace.
pub fn sanitize_field(raw: &str, preserve_newlines: bool) -> String {
    if preserve_newlines {
        let normalized = raw.replace("\r\n", "\n").replace('\r', "\n");
        return normalized.split('\n').map(str::trim_end).collect::<Vec<_>>().join("\n");
    }
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    if out.contains(DELIMITER) {
        out = out.replace(DELIMITER, DELIMITER_REWRITE);
    }
    out
}
