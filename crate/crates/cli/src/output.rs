//! File emission. Every write goes to a temporary file in the destination
//! directory and is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use rerope::numfmt::format_significant;

use crate::CliError;

/// Environment variable naming the directory for outputs without an explicit path.
pub const OUTPUT_DIR_VAR: &str = "REROPE_OUTPUT_DIR";

/// Significant digits of data cells; enough to round-trip an `f64`.
pub const DATA_DIGITS: usize = 17;
/// Significant digits of one-line summaries.
pub const SUMMARY_DIGITS: usize = 9;

pub fn data(x: f64) -> String {
    format_significant(x, DATA_DIGITS)
}

pub fn summary(x: f64) -> String {
    format_significant(x, SUMMARY_DIGITS)
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CliError::io(path, std::fs::metadata(&dir).err().unwrap_or(e)))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
