//! JSONL wire formats and atomic file writes.
//!
//! Every multi-record file is JSON Lines: one object per line, no framing.
//! Writers go through a same-directory temp file plus rename so readers
//! never observe a half-written file.

use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::ComparisonGraph;
use crate::solver::ModelKind;

fn file_err(path: &Path, e: std::io::Error) -> Error {
    Error::File { path: path.display().to_string(), message: e.to_string() }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| file_err(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| file_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Serializes records one per line. Key order is the struct field order,
/// so identical records always produce identical bytes.
pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    atomic_write(path, &jsonl_bytes(items)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Writes via a sibling temp file and rename. Concurrent writers of the
/// same path are not supported; distinct paths never interfere.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| file_err(parent, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| file_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| file_err(&tmp, e))?;
        f.sync_all().map_err(|e| file_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| file_err(path, e))
}

/// Graph wire format: `{"n": 5, "edges": [[0,1],[1,2]]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphRecord {
    pub fn from_graph(g: &ComparisonGraph) -> Self {
        Self { n: g.n(), edges: g.edges().collect() }
    }

    pub fn into_graph(self) -> Result<ComparisonGraph> {
        ComparisonGraph::from_edges(self.n, self.edges)
    }
}

/// Fitted Elo wire format, one record per query.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EloRecord {
    pub query_id: String,
    pub elos: Vec<f64>,
    pub model: ModelKind,
    pub converged: bool,
    pub iterations: usize,
}

/// Graded relevance judgment for evaluation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QrelRecord {
    pub query_id: String,
    pub doc_id: String,
    pub rel: f64,
}

/// Predicted pointwise score for evaluation or failure mining.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreRecord {
    pub query_id: String,
    pub doc_id: String,
    pub score: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PreferenceRecord;

    #[test]
    fn jsonl_round_trips_preference_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prefs.jsonl");
        let records = vec![
            PreferenceRecord { query_id: "q1".into(), i: 0, j: 1, p: 0.8, weight: 1.0 },
            PreferenceRecord { query_id: "q1".into(), i: 1, j: 2, p: 0.25, weight: 2.0 },
        ];
        write_jsonl(&path, &records).unwrap();
        let back: Vec<PreferenceRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, records);
        assert!(!path.with_extension("jsonl.tmp").exists());
    }

    #[test]
    fn blank_lines_are_skipped_and_bad_lines_name_their_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"n\":2,\"edges\":[[0,1]]}\n\nnot json\n").unwrap();
        let err = read_jsonl::<GraphRecord>(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_files_name_their_path() {
        let err = read_jsonl::<GraphRecord>(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.jsonl"), "{err}");
        assert_eq!(err.kind_slug(), "file");
    }

    #[test]
    fn graph_records_round_trip() {
        let g = crate::graphs::sample_random_pairs(6, 7, 3).unwrap();
        let rec = GraphRecord::from_graph(&g);
        let json = serde_json::to_string(&rec).unwrap();
        let back: GraphRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_graph().unwrap(), g);
    }

    #[test]
    fn jsonl_bytes_are_stable_across_calls() {
        let records = vec![QrelRecord { query_id: "q".into(), doc_id: "d".into(), rel: 2.0 }];
        assert_eq!(jsonl_bytes(&records).unwrap(), jsonl_bytes(&records).unwrap());
        let text = String::from_utf8(jsonl_bytes(&records).unwrap()).unwrap();
        assert_eq!(text, "{\"query_id\":\"q\",\"doc_id\":\"d\",\"rel\":2.0}\n");
    }
}
