//! Method-trace recordings.
//!
//! UTF-8 CSV with the header
//! `name,invocation_count,inclusive_time_us,exclusive_time_us`, one file
//! per feature scenario named `<feature>.<scenario>.trace.csv`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRACE_HEADER: [&str; 4] = ["name", "invocation_count", "inclusive_time_us", "exclusive_time_us"];
pub const TRACE_SUFFIX: &str = ".trace.csv";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unexpected header `{found}`, expected `{}`", TRACE_HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: inclusive time {inclusive} is below exclusive time {exclusive}")]
    Times { line: u64, inclusive: u64, exclusive: u64 },
    #[error("trace has no entries")]
    Empty,
    #[error("trace file name `{0}` is not `<feature>.<scenario>.trace.csv`")]
    FileName(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub method_name: String,
    pub invocation_count: u64,
    pub inclusive_time_us: u64,
    pub exclusive_time_us: u64,
}

/// Entries in execution order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecording {
    pub feature: String,
    pub scenario: Option<String>,
    pub entries: Vec<TraceEntry>,
}

#[derive(Deserialize)]
struct Row {
    name: String,
    invocation_count: String,
    inclusive_time_us: String,
    exclusive_time_us: String,
}

pub fn parse_trace(feature: &str, text: &str) -> Result<TraceRecording, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| TraceError::Row { line: 1, message: e.to_string() })?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(TraceError::Header { found: header.iter().collect::<Vec<_>>().join(",") });
    }
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| TraceError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = entries.len() as u64 + 2;
        let num = |field: &str, v: &str| -> Result<u64, TraceError> {
            v.parse().map_err(|_| TraceError::Row { line, message: format!("{field} is not a non-negative integer: `{v}`") })
        };
        let invocation_count = num("invocation_count", &row.invocation_count)?;
        if invocation_count == 0 {
            return Err(TraceError::Row { line, message: "invocation_count must be positive".into() });
        }
        let inclusive = num("inclusive_time_us", &row.inclusive_time_us)?;
        let exclusive = num("exclusive_time_us", &row.exclusive_time_us)?;
        if inclusive < exclusive {
            return Err(TraceError::Times { line, inclusive, exclusive });
        }
        if row.name.is_empty() {
            return Err(TraceError::Row { line, message: "empty method name".into() });
        }
        entries.push(TraceEntry {
            method_name: row.name,
            invocation_count,
            inclusive_time_us: inclusive,
            exclusive_time_us: exclusive,
        });
    }
    if entries.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(TraceRecording { feature: feature.to_string(), scenario: None, entries })
}

/// Split `<feature>.<scenario>.trace.csv` into feature and scenario.
pub fn trace_file_name(name: &str) -> Option<(&str, &str)> {
    let stem = name.strip_suffix(TRACE_SUFFIX)?;
    let (feature, scenario) = stem.split_once('.')?;
    (!feature.is_empty() && !scenario.is_empty()).then_some((feature, scenario))
}

pub fn read_trace_file(path: &Path) -> Result<TraceRecording, TraceError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (feature, scenario) = trace_file_name(&name).ok_or_else(|| TraceError::FileName(name.clone()))?;
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    let mut rec = parse_trace(feature, &text)?;
    rec.scenario = Some(scenario.to_string());
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "name,invocation_count,inclusive_time_us,exclusive_time_us\n";

    #[test]
    fn parses_rows() {
        let t = parse_trace("push", &format!("{HEADER}Stack.push,3,1200,400\nStack.lock,3,100,100\n")).unwrap();
        assert_eq!(
            t.entries[0],
            TraceEntry { method_name: "Stack.push".into(), invocation_count: 3, inclusive_time_us: 1200, exclusive_time_us: 400 }
        );
        assert_eq!(t.entries.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_trace("f", HEADER), Err(TraceError::Empty)));
        assert!(matches!(parse_trace("f", &format!("{HEADER}A.b,1,5,9\n")), Err(TraceError::Times { line: 2, .. })));
        assert!(matches!(parse_trace("f", "method,count\nA.b,1\n"), Err(TraceError::Header { .. })));
        assert!(matches!(parse_trace("f", &format!("{HEADER}A.b,x,5,1\n")), Err(TraceError::Row { line: 2, .. })));
        assert!(matches!(parse_trace("f", &format!("{HEADER}A.b,0,5,1\n")), Err(TraceError::Row { .. })));
        assert!(parse_trace("f", &format!("{HEADER}A.b,1,5\n")).is_err());
    }

    #[test]
    fn file_names() {
        assert_eq!(trace_file_name("lock.basic.trace.csv"), Some(("lock", "basic")));
        assert_eq!(trace_file_name("lock.a.b.trace.csv"), Some(("lock", "a.b")));
        assert_eq!(trace_file_name("lock.trace.csv"), None);
        assert_eq!(trace_file_name("lock.basic.csv"), None);
    }
}
