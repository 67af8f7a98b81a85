//! Line-delimited JSON helpers shared by every loader and writer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn display_name(path: &Path) -> String {
    path.display().to_string()
}

/// Parse every non-blank line of `reader` as a `T`, keeping 1-based line numbers.
pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(
    reader: R,
    file: &str,
) -> Result<Vec<(u64, T)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::parse(file, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(&line).map_err(|e| Error::parse(file, line_no, e.to_string()))?;
        out.push((line_no, value));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), &display_name(path))
}

pub fn write_jsonl_to<T: Serialize, W: Write>(
    writer: &mut W,
    items: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *writer, &item)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_jsonl_to(&mut writer, items).map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}
