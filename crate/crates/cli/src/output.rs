use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::Failure;

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(path).map_err(|e| {
            Failure::Runtime(format!(
                "cannot create output directory {}: {e}",
                path.display()
            ))
        })?;
        Ok(Self(path.to_path_buf()))
    }

    /// Writes through a temporary file in the same directory, then renames,
    /// so readers never observe a partial file.
    pub fn write_with<F>(&self, name: &str, fill: F) -> Result<PathBuf, Failure>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let target = self.0.join(name);
        let io_err =
            |e: std::io::Error| Failure::Runtime(format!("writing {}: {e}", target.display()));
        let mut tmp = NamedTempFile::new_in(&self.0).map_err(io_err)?;
        {
            let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
            fill(&mut buf).map_err(io_err)?;
            buf.flush().map_err(io_err)?;
        }
        tmp.persist(&target).map_err(|e| io_err(e.error))?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }
}

#[derive(Serialize)]
pub struct Report<T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    /// UTC, RFC 3339; the only field that differs between identical reruns.
    pub timestamp: String,
    pub seed: Option<u64>,
    pub exit_code: i32,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &'static str, seed: Option<u64>, exit_code: i32, result: T) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed,
            exit_code,
            result,
        }
    }
}
