//! The verify suite and witness replay.

use std::path::{Path, PathBuf};

use gel_core::verify::{default_suite, replay};
use gel_core::CheckReport;

use crate::error::{read, write, Result};

pub const DEFAULT_SUITE_SEED: u64 = 0;

pub fn run_suite(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(default_suite(seed)?)
}

/// Writes one `<name>.witness` file per failing report into `dir`.
pub fn write_witnesses(reports: &[CheckReport], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for r in reports.iter().filter(|r| !r.passed) {
        if let Some(w) = &r.witness {
            let path = dir.join(format!("{}.witness", r.name));
            write(&path, w)?;
            out.push(path);
        }
    }
    Ok(out)
}

pub fn replay_file(path: &Path) -> Result<Vec<CheckReport>> {
    Ok(replay(&read(path)?)?)
}
