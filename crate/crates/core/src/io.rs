//! JSON-lines reading and writing with line-numbered errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one JSON object per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    read_jsonl_checked(path, |_| None)
}

/// As [`read_jsonl`], additionally rejecting records for which `check`
/// returns a message (reported as a schema violation at that line).
pub fn read_jsonl_checked<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    check: impl Fn(&T) -> Option<String>,
) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl_checked(BufReader::new(file), path, check)
}

pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Vec<T>> {
    parse_jsonl_checked(reader, path, |_| None)
}

fn parse_jsonl_checked<T: DeserializeOwned>(
    reader: impl BufRead,
    path: &Path,
    check: impl Fn(&T) -> Option<String>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            let msg = e.to_string();
            if e.is_data() {
                Error::Schema {
                    path: path.into(),
                    line: i + 1,
                    msg,
                }
            } else {
                Error::Format {
                    path: path.into(),
                    line: i + 1,
                    msg,
                }
            }
        })?;
        if let Some(msg) = check(&record) {
            return Err(Error::Schema {
                path: path.into(),
                line: i + 1,
                msg,
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// One compact JSON object per line, LF-terminated.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl_to(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl_to<T: Serialize>(w: &mut impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize, PartialEq)]
    struct Rec {
        a: u32,
    }

    #[test]
    fn errors_carry_line_numbers() {
        let p = Path::new("x.jsonl");
        let err = parse_jsonl::<Rec>("{\"a\":1}\n{\"a\":\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
        let err = parse_jsonl::<Rec>("{\"a\":1}\n\n{\"b\":2}\n".as_bytes(), p).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, .. }), "{err}");
        let ok = parse_jsonl::<Rec>("{\"a\":1}\n\n{\"a\":2}".as_bytes(), p).unwrap();
        assert_eq!(ok, vec![Rec { a: 1 }, Rec { a: 2 }]);
    }
}
