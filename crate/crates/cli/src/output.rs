use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Artifact kinds that can be switched on and off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportKind {
    Csv,
    Json,
    Svg,
}

/// Writes artifacts into one directory, skipping disabled kinds.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    kinds: Vec<ExportKind>,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, kinds: &[ExportKind]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), kinds: kinds.to_vec(), written: Vec::new() })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn enabled(&self, kind: ExportKind) -> bool {
        self.kinds.contains(&kind)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    /// CSV produced by `write` into a buffer.
    pub fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> portrait_core::Result<()>,
    ) -> Result<(), CliError> {
        if !self.enabled(ExportKind::Csv) {
            return Ok(());
        }
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.put(name, &buf)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if !self.enabled(ExportKind::Json) {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// SVG built lazily, so disabled plots cost nothing.
    pub fn svg(&mut self, name: &str, build: impl FnOnce() -> portrait_core::Result<String>) -> Result<(), CliError> {
        if !self.enabled(ExportKind::Svg) {
            return Ok(());
        }
        let doc = build()?;
        self.put(name, doc.as_bytes())
    }
}
