//! All-or-nothing output: files are written to temporaries next to their
//! destination and renamed into place only once every file is ready.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

#[derive(Debug, Default)]
pub struct StagedOutputs {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl StagedOutputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.staged.iter().map(|(_, p)| p.clone()).collect()
    }

    /// Renames every staged file into place. If a rename fails, the files
    /// already moved are removed again and the remaining temporaries are
    /// dropped.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done: Vec<PathBuf> = Vec::with_capacity(self.staged.len());
        for (tmp, dest) in self.staged {
            if let Err(e) = tmp.persist(&dest) {
                for path in &done {
                    let _ = fs::remove_file(path);
                }
                return Err(CliError::io(&dest, e.error));
            }
            done.push(dest);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_lands_before_commit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        let mut out = StagedOutputs::new();
        out.stage(&a, b"one").unwrap();
        out.stage(&b, b"two").unwrap();
        assert!(!a.exists() && !b.exists());
        out.commit().unwrap();
        assert_eq!(fs::read(&a).unwrap(), b"one");
        assert_eq!(fs::read(&b).unwrap(), b"two");
    }

    #[test]
    fn dropped_stage_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = StagedOutputs::new();
            out.stage(&dir.path().join("x"), b"data").unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = StagedOutputs::new();
        let err = out.stage(&dir.path().join("nope/x.npy"), b"").unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_IO);
    }
}
