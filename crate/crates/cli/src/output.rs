use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use photosub::{Error, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Runs `f` against the file at `path`, or stdout when no path is given.
/// Stream errors on a file are reported with its path.
pub fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let Some(path) = path else {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        return f(&mut lock);
    };
    let with_path = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(with_path)?;
    let mut out = BufWriter::new(file);
    f(&mut out).map_err(|e| match e {
        Error::Stream(source) => with_path(source),
        other => other,
    })?;
    out.flush().map_err(with_path)
}

/// Table as JSON: `{"metadata": ..., "columns": [...], "rows": [[...], ...]}`.
pub fn write_json_table<const N: usize>(
    out: &mut dyn Write,
    metadata: &Value,
    columns: &[&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let rows: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|fields| fields.iter().map(|f| number(f)).collect())
        .collect();
    write_json(out, &json!({ "metadata": metadata, "columns": columns.as_slice(), "rows": rows }))
}

fn number(field: &str) -> Value {
    if let Ok(i) = field.parse::<u64>() {
        return Value::from(i);
    }
    field.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(field))
}

pub fn write_json<T: serde::Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
