//! JSON-lines reading and writing with an optional provenance header line.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Key of the first-line object that carries [`OutputHeader`].
pub const HEADER_KEY: &str = "psl_header";

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl OutputHeader {
    /// One-line comment form used at the top of TSV files.
    pub fn as_comment(&self) -> String {
        format!(
            "# {} {} command={} config_hash={} seed={}",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    psl_header: &'a OutputHeader,
}

pub fn write_jsonl<'a, W, T, I>(
    mut out: W,
    header: Option<&OutputHeader>,
    items: I,
) -> Result<(), JsonlError>
where
    W: Write,
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(h) = header {
        serde_json::to_writer(&mut out, &HeaderLine { psl_header: h })
            .map_err(|e| JsonlError::Json { line: 1, source: e })?;
        out.write_all(b"\n")?;
    }
    for (i, item) in items.into_iter().enumerate() {
        serde_json::to_writer(&mut out, item).map_err(|e| JsonlError::Json {
            line: i + 1,
            source: e,
        })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn is_header(line: &str) -> bool {
    line.trim_start()
        .strip_prefix('{')
        .map(|rest| rest.trim_start().starts_with(&format!("\"{HEADER_KEY}\"")))
        .unwrap_or(false)
}

/// Reads one record per non-blank line, skipping header lines.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || is_header(&line) {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| JsonlError::Json {
            line: i + 1,
            source: e,
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Returns the header of a JSONL stream, if its first line carries one.
pub fn read_header<R: BufRead>(mut input: R) -> Result<Option<OutputHeader>, JsonlError> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    if !is_header(&first) {
        return Ok(None);
    }
    #[derive(Deserialize)]
    struct Line {
        psl_header: OutputHeader,
    }
    let line: Line =
        serde_json::from_str(&first).map_err(|e| JsonlError::Json { line: 1, source: e })?;
    Ok(Some(line.psl_header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
        b: String,
    }

    fn header() -> OutputHeader {
        OutputHeader {
            tool: "psl".into(),
            version: "0.1.0".into(),
            command: "test".into(),
            config_hash: "abc".into(),
            seed: 7,
        }
    }

    #[test]
    fn header_is_skipped_on_read() {
        let rows = vec![Row { a: 1, b: "x".into() }, Row { a: 2, b: "y".into() }];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, Some(&header()), &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"psl_header\":"));
        let back: Vec<Row> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, rows);
        assert_eq!(read_header(&buf[..]).unwrap(), Some(header()));
    }

    #[test]
    fn bad_line_reports_line_number() {
        let input = b"{\"a\":1,\"b\":\"x\"}\n\nnot json\n";
        let err = read_jsonl::<Row, _>(&input[..]).unwrap_err();
        assert!(matches!(err, JsonlError::Json { line: 3, .. }), "{err}");
    }
}
