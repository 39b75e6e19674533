//! Append-only JSONL rating log. Every append is flushed and synced before it
//! returns, so an acknowledged rating survives a restart.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::RatingRecord;
use crate::error::{parse_json, Error, Result};

#[derive(Debug)]
pub struct RatingLog {
    path: PathBuf,
    file: File,
    records: Vec<RatingRecord>,
}

impl RatingLog {
    /// Opens (creating if needed) and replays an existing log.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let records = if path.exists() { Self::read(path)? } else { Vec::new() };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RatingLog {
            path: path.to_path_buf(),
            file,
            records,
        })
    }

    /// Parses every nonblank line; a bad line reports its 1-based line number.
    pub fn read(path: &Path) -> Result<Vec<RatingRecord>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse_json(l, &format!("{} line {}", path.display(), i + 1)))
            .collect()
    }

    /// Returns the number of records in the log after the append.
    pub fn append(&mut self, record: &RatingRecord) -> Result<usize> {
        record.validate()?;
        let mut line = serde_json::to_string(record).map_err(|e| Error::json("rating record", &e))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.records.push(record.clone());
        Ok(self.records.len())
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
