//! JSONL ingestion and emission.
//!
//! One JSON object per line everywhere. Blank lines are skipped; unknown keys
//! are ignored with a one-time warning per key so files can grow fields
//! without breaking old binaries. Every loader aligns its output to pool
//! positions, which follow file order.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use sess_core::confidence::{ConfidenceSource, RawConfidence};
use sess_core::corpus::{CorpusError, EmbeddingTable, Example, Pool};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}: file contains no records")]
    EmptyPool { path: PathBuf },
    #[error("{path}: no record for pool id {id:?}")]
    MissingId { path: PathBuf, id: String },
    #[error("{path} line {line}: vector has dimension {got}, expected {expected}")]
    DimMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}: non-finite value for id {id:?}")]
    NonFiniteValue { path: PathBuf, id: String },
    #[error("{path}: records mix verbal and loglik sources")]
    MixedSources { path: PathBuf },
    #[error("{dir}: missing reply file {file}")]
    MissingReply { dir: PathBuf, file: String },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: {message}")]
    Confidence { path: PathBuf, message: String },
}

/// Tracks unknown-key warnings so each key is reported once per file.
struct UnknownKeys<'a> {
    path: &'a Path,
    seen: BTreeSet<String>,
}

impl<'a> UnknownKeys<'a> {
    fn new(path: &'a Path) -> Self {
        UnknownKeys {
            path,
            seen: BTreeSet::new(),
        }
    }

    fn warn(&mut self, object: &serde_json::Map<String, Value>, known: &[&str]) {
        for key in object.keys() {
            if !known.contains(&key.as_str()) && self.seen.insert(key.clone()) {
                eprintln!(
                    "warning: {}: ignoring unknown key {:?}",
                    self.path.display(),
                    key
                );
            }
        }
    }
}

fn lines_of(path: &Path) -> Result<impl Iterator<Item = (usize, String)>, IoError> {
    let file = fs::File::open(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut collected = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IoError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        collected.push((idx + 1, line));
    }
    Ok(collected.into_iter())
}

fn parse_object(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<serde_json::Map<String, Value>, IoError> {
    let value: Value = serde_json::from_str(line).map_err(|e| IoError::MalformedLine {
        path: path.to_path_buf(),
        line: line_no,
        reason: format!("invalid JSON: {e}"),
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(IoError::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            reason: "record must be a JSON object".into(),
        }),
    }
}

fn required_str(
    path: &Path,
    line_no: usize,
    object: &serde_json::Map<String, Value>,
    key: &str,
) -> Result<String, IoError> {
    match object.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(IoError::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            reason: format!("field {key:?} must be a string"),
        }),
        None => Err(IoError::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            reason: format!("missing required field {key:?}"),
        }),
    }
}

/// Loads a pool from `{"id", "text", "answer"?, "tags"?}` records, positions
/// in file order.
pub fn load_pool(path: &Path) -> Result<Pool, IoError> {
    let mut unknown = UnknownKeys::new(path);
    let mut examples = Vec::new();
    for (line_no, line) in lines_of(path)? {
        let object = parse_object(path, line_no, &line)?;
        unknown.warn(&object, &["id", "text", "answer", "tags"]);
        let id = required_str(path, line_no, &object, "id")?;
        let text = required_str(path, line_no, &object, "text")?;
        if text.is_empty() {
            return Err(IoError::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                reason: "field \"text\" must be non-empty".into(),
            });
        }
        let answer = match object.get("answer") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "field \"answer\" must be a string or null".into(),
                })
            }
        };
        let tags = match object.get("tags") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => {
                let mut tags = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) => tags.push(s.clone()),
                        _ => {
                            return Err(IoError::MalformedLine {
                                path: path.to_path_buf(),
                                line: line_no,
                                reason: "field \"tags\" must be an array of strings".into(),
                            })
                        }
                    }
                }
                tags
            }
            Some(_) => {
                return Err(IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "field \"tags\" must be an array of strings".into(),
                })
            }
        };
        examples.push(Example {
            id,
            text,
            answer,
            tags,
        });
    }

    Pool::new(examples).map_err(|err| match err {
        CorpusError::DuplicateId(id) => IoError::DuplicateId {
            path: path.to_path_buf(),
            id,
        },
        CorpusError::EmptyPool => IoError::EmptyPool {
            path: path.to_path_buf(),
        },
        other => IoError::Corpus {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

/// Writes a pool back out with the full record schema.
pub fn write_pool(path: &Path, pool: &Pool) -> Result<(), IoError> {
    let mut out = String::new();
    for ex in pool.examples() {
        let record = serde_json::json!({
            "id": ex.id,
            "text": ex.text,
            "answer": ex.answer,
            "tags": ex.tags,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `{"id", "vector"}` records and aligns them to pool positions.
/// Dimension is inferred from the first record; records for ids outside the
/// pool are ignored with a warning.
pub fn load_embeddings(path: &Path, pool: &Pool) -> Result<EmbeddingTable, IoError> {
    let mut unknown = UnknownKeys::new(path);
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; pool.len()];
    let mut expected_dim: Option<usize> = None;
    for (line_no, line) in lines_of(path)? {
        let object = parse_object(path, line_no, &line)?;
        unknown.warn(&object, &["id", "vector"]);
        let id = required_str(path, line_no, &object, "id")?;
        let vector = match object.get("vector") {
            Some(Value::Array(items)) => {
                let mut v = Vec::with_capacity(items.len());
                for item in items {
                    match item.as_f64() {
                        Some(x) if x.is_finite() => v.push(x),
                        Some(_) | None => {
                            return Err(IoError::NonFiniteValue {
                                path: path.to_path_buf(),
                                id,
                            })
                        }
                    }
                }
                v
            }
            _ => {
                return Err(IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "field \"vector\" must be an array of numbers".into(),
                })
            }
        };
        let dim = *expected_dim.get_or_insert(vector.len());
        if vector.len() != dim {
            return Err(IoError::DimMismatch {
                path: path.to_path_buf(),
                line: line_no,
                expected: dim,
                got: vector.len(),
            });
        }
        let Some(position) = pool.position(&id) else {
            eprintln!(
                "warning: {}: ignoring embedding for unknown id {:?}",
                path.display(),
                id
            );
            continue;
        };
        if rows[position].replace(vector).is_some() {
            return Err(IoError::DuplicateId {
                path: path.to_path_buf(),
                id,
            });
        }
    }

    let mut table_rows = Vec::with_capacity(pool.len());
    for (position, row) in rows.into_iter().enumerate() {
        let id = pool.get(position).expect("position in range").id.clone();
        match row {
            Some(vector) => table_rows.push((id, vector)),
            None => {
                return Err(IoError::MissingId {
                    path: path.to_path_buf(),
                    id,
                })
            }
        }
    }
    EmbeddingTable::from_rows(table_rows).map_err(|source| IoError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `{"id", "raw", "source"}` confidence records. All records must
/// declare the same source.
pub fn load_confidences(path: &Path, pool: &Pool) -> Result<RawConfidence, IoError> {
    let mut unknown = UnknownKeys::new(path);
    let mut entries = Vec::new();
    let mut source: Option<ConfidenceSource> = None;
    for (line_no, line) in lines_of(path)? {
        let object = parse_object(path, line_no, &line)?;
        unknown.warn(&object, &["id", "raw", "source"]);
        let id = required_str(path, line_no, &object, "id")?;
        let raw =
            object
                .get("raw")
                .and_then(Value::as_f64)
                .ok_or_else(|| IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "field \"raw\" must be a number".into(),
                })?;
        let declared = match required_str(path, line_no, &object, "source")?.as_str() {
            "verbal" => ConfidenceSource::Verbal,
            "loglik" => ConfidenceSource::Loglik,
            other => {
                return Err(IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: format!("source must be \"verbal\" or \"loglik\", got {other:?}"),
                })
            }
        };
        match source {
            None => source = Some(declared),
            Some(existing) if existing != declared => {
                return Err(IoError::MixedSources {
                    path: path.to_path_buf(),
                })
            }
            Some(_) => {}
        }
        entries.push((id, raw));
    }
    if entries.is_empty() {
        return Err(IoError::EmptyPool {
            path: path.to_path_buf(),
        });
    }
    let source = source.expect("at least one record");
    RawConfidence::from_entries(pool, &entries, source).map_err(|err| IoError::Confidence {
        path: path.to_path_buf(),
        message: err.to_string(),
    })
}

/// Writes confidence records in pool order.
pub fn write_confidences(
    path: &Path,
    entries: &[(String, f64)],
    source: ConfidenceSource,
) -> Result<(), IoError> {
    let mut out = String::new();
    for (id, raw) in entries {
        let record = serde_json::json!({
            "id": id,
            "raw": raw,
            "source": source.as_str(),
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `{"id", "answer_token_logprobs"}` records in file order.
pub fn load_logprobs(path: &Path, pool: &Pool) -> Result<Vec<(String, Vec<f64>)>, IoError> {
    let mut unknown = UnknownKeys::new(path);
    let mut records = Vec::new();
    for (line_no, line) in lines_of(path)? {
        let object = parse_object(path, line_no, &line)?;
        unknown.warn(&object, &["id", "answer_token_logprobs", "scoring"]);
        let id = required_str(path, line_no, &object, "id")?;
        if pool.position(&id).is_none() {
            eprintln!(
                "warning: {}: ignoring logprobs for unknown id {:?}",
                path.display(),
                id
            );
            continue;
        }
        let logprobs = match object.get("answer_token_logprobs") {
            Some(Value::Array(items)) => {
                let mut v = Vec::with_capacity(items.len());
                for item in items {
                    match item.as_f64() {
                        Some(x) if x.is_finite() => v.push(x),
                        _ => {
                            return Err(IoError::NonFiniteValue {
                                path: path.to_path_buf(),
                                id,
                            })
                        }
                    }
                }
                v
            }
            _ => {
                return Err(IoError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "field \"answer_token_logprobs\" must be an array of numbers".into(),
                })
            }
        };
        records.push((id, logprobs));
    }
    Ok(records)
}

/// Reads `<id>.txt` reply files for every pool example, in pool order.
pub fn read_verbal_replies(dir: &Path, pool: &Pool) -> Result<Vec<(String, String)>, IoError> {
    let mut replies = Vec::with_capacity(pool.len());
    for ex in pool.examples() {
        let file = dir.join(format!("{}.txt", ex.id));
        let text = fs::read_to_string(&file).map_err(|_| IoError::MissingReply {
            dir: dir.to_path_buf(),
            file: format!("{}.txt", ex.id),
        })?;
        replies.push((ex.id.clone(), text));
    }
    Ok(replies)
}

/// Writes a string to a file, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| IoError::Write {
                path: path.to_path_buf(),
                source,
            })?;
        }
    }
    let mut file = fs::File::create(path).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(contents.as_bytes())
        .map_err(|source| IoError::Write {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_file(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn pool_positions_follow_file_order() {
        let dir = TempDir::new().unwrap();
        let path = write_file(
            &dir,
            "pool.jsonl",
            r#"{"id": "a", "text": "first"}
{"id": "b", "text": "second", "answer": "42", "tags": ["t"]}
{"id": "c", "text": "third", "answer": null}
"#,
        );
        let pool = load_pool(&path).unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool.position("b"), Some(1));
        assert_eq!(pool.get(1).unwrap().answer.as_deref(), Some("42"));
        assert_eq!(pool.get(2).unwrap().answer, None);
    }

    #[test]
    fn pool_duplicate_and_empty_and_malformed() {
        let dir = TempDir::new().unwrap();
        let dup = write_file(
            &dir,
            "dup.jsonl",
            "{\"id\": \"q1\", \"text\": \"x\"}\n{\"id\": \"q1\", \"text\": \"y\"}\n",
        );
        assert!(matches!(
            load_pool(&dup),
            Err(IoError::DuplicateId { id, .. }) if id == "q1"
        ));

        let empty = write_file(&dir, "empty.jsonl", "");
        assert!(matches!(load_pool(&empty), Err(IoError::EmptyPool { .. })));

        let bad = write_file(
            &dir,
            "bad.jsonl",
            "{\"id\": \"a\", \"text\": \"x\"}\nnot json\n",
        );
        assert!(matches!(
            load_pool(&bad),
            Err(IoError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn pool_round_trip_preserves_ids_and_texts() {
        let dir = TempDir::new().unwrap();
        let path = write_file(
            &dir,
            "pool.jsonl",
            "{\"id\": \"a\", \"text\": \"exact text 1\"}\n{\"id\": \"b\", \"text\": \"exact text 2\"}\n",
        );
        let pool = load_pool(&path).unwrap();
        let out = dir.path().join("round.jsonl");
        write_pool(&out, &pool).unwrap();
        let again = load_pool(&out).unwrap();
        assert_eq!(pool.len(), again.len());
        for (a, b) in pool.examples().iter().zip(again.examples()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.text, b.text);
        }
    }

    #[test]
    fn embeddings_align_to_pool_not_file_order() {
        let dir = TempDir::new().unwrap();
        let pool_path = write_file(
            &dir,
            "pool.jsonl",
            "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"b\", \"text\": \"y\"}\n",
        );
        let pool = load_pool(&pool_path).unwrap();
        let emb_path = write_file(
            &dir,
            "emb.jsonl",
            "{\"id\": \"b\", \"vector\": [0.0, 1.0]}\n{\"id\": \"a\", \"vector\": [1.0, 0.0]}\n",
        );
        let table = load_embeddings(&emb_path, &pool).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.vector(0), &[1.0, 0.0]);
        assert_eq!(table.vector(1), &[0.0, 1.0]);
    }

    #[test]
    fn embeddings_error_paths() {
        let dir = TempDir::new().unwrap();
        let pool_path = write_file(
            &dir,
            "pool.jsonl",
            "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"b\", \"text\": \"y\"}\n{\"id\": \"c\", \"text\": \"z\"}\n",
        );
        let pool = load_pool(&pool_path).unwrap();

        let mismatch = write_file(
            &dir,
            "mismatch.jsonl",
            "{\"id\": \"a\", \"vector\": [1, 0, 0, 0]}\n{\"id\": \"b\", \"vector\": [1, 0, 0, 0, 0]}\n",
        );
        assert!(matches!(
            load_embeddings(&mismatch, &pool),
            Err(IoError::DimMismatch {
                expected: 4,
                got: 5,
                ..
            })
        ));

        let missing = write_file(
            &dir,
            "missing.jsonl",
            "{\"id\": \"a\", \"vector\": [1, 0]}\n{\"id\": \"b\", \"vector\": [0, 1]}\n",
        );
        assert!(matches!(
            load_embeddings(&missing, &pool),
            Err(IoError::MissingId { id, .. }) if id == "c"
        ));
    }

    #[test]
    fn confidences_require_one_source() {
        let dir = TempDir::new().unwrap();
        let pool_path = write_file(
            &dir,
            "pool.jsonl",
            "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"b\", \"text\": \"y\"}\n",
        );
        let pool = load_pool(&pool_path).unwrap();

        let ok = write_file(
            &dir,
            "conf.jsonl",
            "{\"id\": \"a\", \"raw\": -2.0, \"source\": \"loglik\"}\n{\"id\": \"b\", \"raw\": -0.5, \"source\": \"loglik\"}\n",
        );
        let raw = load_confidences(&ok, &pool).unwrap();
        assert_eq!(raw.source(), ConfidenceSource::Loglik);
        assert_eq!(raw.values(), &[-2.0, -0.5]);

        let mixed = write_file(
            &dir,
            "mixed.jsonl",
            "{\"id\": \"a\", \"raw\": 0.5, \"source\": \"verbal\"}\n{\"id\": \"b\", \"raw\": -0.5, \"source\": \"loglik\"}\n",
        );
        assert!(matches!(
            load_confidences(&mixed, &pool),
            Err(IoError::MixedSources { .. })
        ));
    }

    #[test]
    fn verbal_replies_read_in_pool_order() {
        let dir = TempDir::new().unwrap();
        let pool_path = write_file(
            &dir,
            "pool.jsonl",
            "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"b\", \"text\": \"y\"}\n",
        );
        let pool = load_pool(&pool_path).unwrap();
        fs::write(dir.path().join("a.txt"), "P1: 0.5").unwrap();
        fs::write(dir.path().join("b.txt"), "P1: 0.7").unwrap();
        let replies = read_verbal_replies(dir.path(), &pool).unwrap();
        assert_eq!(replies[0].0, "a");
        assert_eq!(replies[1].1, "P1: 0.7");

        fs::remove_file(dir.path().join("b.txt")).unwrap();
        assert!(matches!(
            read_verbal_replies(dir.path(), &pool),
            Err(IoError::MissingReply { file, .. }) if file == "b.txt"
        ));
    }
}
