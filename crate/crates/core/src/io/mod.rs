//! File formats: event and count CSVs, model and report documents, run
//! configuration and plot-ready exports. Every artifact is written
//! atomically.

mod counts;
mod events;
mod export;
mod model_file;
mod report;
mod run_config;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use counts::{discretize_counts, load_counts_csv, CountSeries, DEFAULT_THRESHOLD};
pub use events::{default_horizon, load_events_csv, parse_events_csv, write_events_csv, LabeledRecord};
pub use export::{embedding_csv, learning_curve_csv, load_embedding_csv, qq_csv};
pub use model_file::{load_model, save_model, ModelFile, SCHEMA_VERSION};
pub use report::{BranchingRow, FitReportFile};
pub use run_config::{RunConfig, SimulateConfig, SplitSpec};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
