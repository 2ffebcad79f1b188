//! Output directories that clean up after a failed command.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use shadowcone::kv::KvMap;

pub const MANIFEST: &str = "manifest.kv";

/// Tracks files written by one command. Unless [`commit`](Self::commit) is
/// called, dropping it deletes those files, and the directory too if this
/// command created it.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new(), committed: false })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Opens `name` for writing and registers it for cleanup.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    /// Registers a file written by someone else.
    pub fn track(&mut self, name: &str) -> PathBuf {
        let path = self.path(name);
        self.files.push(path.clone());
        path
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

pub fn read_manifest(dir: &Path) -> Result<KvMap> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    KvMap::parse(&text).with_context(|| format!("parsing {}", path.display()))
}
