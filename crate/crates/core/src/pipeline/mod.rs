//! Experiment drivers behind the `cvkit` command line, plus the on-disk
//! formats they read and write.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod embed;
pub mod evaluate;
pub mod generate;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use crate::error::{CvError, Result};

pub use config::KvConfig;

pub const THREADS_ENV: &str = "CVKIT_THREADS";

/// Seed stream keys, one per kind of random draw.
pub mod streams {
    pub const GENERATE: u64 = 0x10;
    pub const TEST_STATES: u64 = 0x20;
    pub const SAMPLES: u64 = 0x30;
    pub const SWEEP_SAMPLES: u64 = 0x40;
}

/// Rayon pool sized by `CVKIT_THREADS` when set, otherwise by the machine.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CvError::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CvError::Config(format!("cannot build worker pool: {e}")))
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> CvError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CvError::Io(io),
        other => CvError::Format(format!("csv: {other:?}")),
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
