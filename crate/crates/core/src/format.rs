//! Shared plumbing for the plain-text `key=value` file grammars.
//!
//! Every text format in this crate uses the same line rules: `#` starts a
//! comment that runs to the end of the line, blank lines are ignored, and
//! every other line must be `key=value` with surrounding whitespace trimmed.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Error raised while reading or parsing any of the interchange formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<FormatError>,
    },
}

impl FormatError {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        FormatError::Line {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        FormatError::Invalid(message.into())
    }

    /// Attach a file path to a parse error.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            e @ FormatError::Io { .. } | e @ FormatError::InFile { .. } => e,
            other => FormatError::InFile {
                path: path.to_path_buf(),
                source: Box::new(other),
            },
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest decimal degree string that parses back to `radians` exactly,
/// so `12°` is written as `12` rather than `12.000000000000002`.
pub(crate) fn degrees(radians: f64) -> String {
    let deg = radians.to_degrees();
    (0..17)
        .map(|p| format!("{deg:.p$}"))
        .map(|s| if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s })
        .find(|s| s.parse::<f64>().is_ok_and(|d| d.to_radians() == radians))
        .unwrap_or_else(|| deg.to_string())
}

/// One `key=value` entry with its 1-based source line.
#[derive(Debug, Clone)]
pub(crate) struct Entry<'a> {
    pub line: usize,
    pub key: &'a str,
    pub value: &'a str,
}

/// Strip a trailing `#` comment and surrounding whitespace.
pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Split text into `key=value` entries. Duplicate keys are rejected.
pub(crate) fn parse_entries(text: &str) -> Result<Vec<Entry<'_>>, FormatError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| FormatError::line(i + 1, format!("expected key=value, got `{line}`")))?;
        let key = key.trim();
        if !seen.insert(key) {
            return Err(FormatError::line(i + 1, format!("duplicate key `{key}`")));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: value.trim(),
        });
    }
    Ok(out)
}

impl Entry<'_> {
    pub fn parse<T: FromStr>(&self) -> Result<T, FormatError> {
        self.value.parse().map_err(|_| {
            FormatError::line(
                self.line,
                format!("`{}`: cannot parse `{}`", self.key, self.value),
            )
        })
    }

    pub fn floats<const N: usize>(&self) -> Result<[f64; N], FormatError> {
        let parsed = parse_floats(self.value).map_err(|m| FormatError::line(self.line, m))?;
        parsed.try_into().map_err(|v: Vec<f64>| {
            FormatError::line(
                self.line,
                format!("`{}`: expected {N} numbers, got {}", self.key, v.len()),
            )
        })
    }
}

/// Parse whitespace-separated finite floats.
pub(crate) fn parse_floats(text: &str) -> Result<Vec<f64>, String> {
    text.split_whitespace()
        .map(|tok| match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("invalid number `{tok}`")),
        })
        .collect()
}

/// Accumulates required keys so a format can report the first missing one.
pub(crate) fn require<T>(value: Option<T>, key: &str) -> Result<T, FormatError> {
    value.ok_or_else(|| FormatError::invalid(format!("missing key `{key}`")))
}
