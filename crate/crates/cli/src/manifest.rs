//! Output directory bookkeeping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub const MANIFEST: &str = "MANIFEST";

/// Files written under one output root, listed in `MANIFEST` with their sizes.
pub struct Manifest {
    root: PathBuf,
    command: String,
    seed: u64,
    files: Vec<PathBuf>,
}

impl Manifest {
    pub fn create(root: &Path, command: &str, seed: u64) -> Result<Manifest> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Manifest {
            root: root.to_path_buf(),
            command: command.into(),
            seed,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    /// Recorded files joined onto the root.
    pub fn files(&self) -> Vec<PathBuf> {
        self.files.iter().map(|f| self.root.join(f)).collect()
    }

    /// Records a file already written; `path` may be absolute or relative to the root.
    pub fn add(&mut self, path: impl AsRef<Path>) {
        let p = path.as_ref();
        let rel = p.strip_prefix(&self.root).unwrap_or(p).to_path_buf();
        self.files.push(rel);
    }

    /// Creates `rel`, fills it through `f` and records it.
    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w =
            BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        f(&mut w).with_context(|| format!("writing {}", p.display()))?;
        w.flush()?;
        self.add(&p);
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, rel: &str, v: &T) -> Result<()> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, v)?;
            writeln!(w)
        })
    }

    /// Writes `MANIFEST`: header lines, then one `file<TAB>path<TAB>bytes` line per output.
    pub fn finish(mut self, complete: bool, error: Option<&str>) -> Result<()> {
        self.files.sort();
        self.files.dedup();
        let p = self.path(MANIFEST);
        let mut w =
            BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        writeln!(w, "command\t{}", self.command)?;
        writeln!(w, "seed\t{}", self.seed)?;
        writeln!(w, "complete\t{complete}")?;
        if let Some(e) = error {
            writeln!(w, "error\t{}", e.replace(['\n', '\t'], " "))?;
        }
        for f in &self.files {
            let bytes = std::fs::metadata(self.root.join(f))
                .map(|m| m.len())
                .unwrap_or(0);
            writeln!(
                w,
                "file\t{}\t{bytes}",
                f.to_string_lossy().replace('\\', "/")
            )?;
        }
        w.flush()?;
        Ok(())
    }
}
