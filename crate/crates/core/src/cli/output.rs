use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// An output directory built under a sibling temp path and moved into
/// place only on [`Staged::commit`]. Dropped uncommitted, it is removed.
#[derive(Debug)]
pub struct Staged {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

fn is_nonempty_dir(p: &Path) -> bool {
    fs::read_dir(p).is_ok_and(|mut d| d.next().is_some())
}

impl Staged {
    pub fn new(dest: &Path, overwrite: bool) -> Result<Self> {
        if dest.exists() && (!dest.is_dir() || is_nonempty_dir(dest)) && !overwrite {
            return Err(Error::OutputExists(dest.to_path_buf()));
        }
        let name = dest
            .file_name()
            .ok_or_else(|| Error::Config(format!("bad output path {}", dest.display())))?
            .to_string_lossy();
        let tmp = dest.with_file_name(format!(".{name}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        Ok(Staged {
            tmp,
            dest: dest.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.dest.is_dir() {
            fs::remove_dir_all(&self.dest).map_err(|e| Error::io(&self.dest, e))?;
        } else if self.dest.exists() {
            fs::remove_file(&self.dest).map_err(|e| Error::io(&self.dest, e))?;
        }
        fs::rename(&self.tmp, &self.dest).map_err(|e| Error::io(&self.dest, e))?;
        self.committed = true;
        Ok(self.dest.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}
