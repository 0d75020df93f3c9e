//! Command implementations behind the `dheac` binary. Each command returns its
//! output files in memory; the binary writes them under `--out`.

use std::path::{Path, PathBuf};

pub mod breakeven;
pub mod config;
pub mod error;
pub mod fairness;
pub mod format;
pub mod mc;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        OutputFile {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

/// Provenance header: tool version, seed and the resolved configuration.
pub fn provenance(spec: &config::SweepSpec) -> String {
    format!(
        "dheac {}\nseed = {}\nresolved config:\n{}",
        env!("CARGO_PKG_VERSION"),
        spec.seed,
        spec.to_toml().trim_end()
    )
}

/// Writes every file under `dir`, creating it if needed. Returns the paths written.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}
