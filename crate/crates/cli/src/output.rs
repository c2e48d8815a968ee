use crate::{Failure, Format};
use serde::Serialize;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Failure::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// `<prefix>.<ext>`, keeping any dots already in the prefix.
pub fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut f = File::create(p).map_err(|e| io_failure(p, e))?;
            f.write_all(bytes).map_err(|e| io_failure(p, e))
        }
        None => io::stdout().write_all(bytes).map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

/// Writes rows as CSV or a JSON array to `<prefix>.<format>` or stdout.
pub fn emit_rows<T: Serialize>(rows: &[T], format: Format, prefix: Option<&Path>) -> Result<(), Failure> {
    let (bytes, ext) = match format {
        Format::Csv => (csv_bytes(rows)?, "csv"),
        Format::Json => (json_bytes(rows)?, "json"),
    };
    let path = prefix.map(|p| with_extension(p, ext));
    write_bytes(path.as_deref(), &bytes)
}

pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    write_bytes(path, &json_bytes(value)?)
}

pub fn emit_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), Failure> {
    write_bytes(path, &csv_bytes(rows)?)
}
