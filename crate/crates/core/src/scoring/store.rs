use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::InstanceResult;

/// Line-delimited JSON results, one `InstanceResult` per line. Appends are
/// serialized through a mutex and flushed per record, so an interrupted run
/// loses at most the record being written; a torn last line is skipped on
/// load.
pub struct ResultsStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl ResultsStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ResultsStore {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> io::Result<Vec<InstanceResult>> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(r) => out.push(r),
                Err(e) => log::warn!("{}:{}: skipping unreadable record ({e})", self.path.display(), i + 1),
            }
        }
        Ok(out)
    }

    /// `(candidate, instance)` pairs already recorded.
    pub fn completed(&self) -> io::Result<BTreeSet<(String, String)>> {
        Ok(self
            .load()?
            .into_iter()
            .map(|r| (r.candidate, r.instance))
            .collect())
    }

    pub fn append(&self, r: &InstanceResult) -> io::Result<()> {
        let _guard = self.lock.lock().expect("store lock");
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).read(true).append(true).open(&self.path)?;
        let mut line = String::new();
        let len = f.metadata()?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            f.seek(SeekFrom::Start(len - 1))?;
            f.read_exact(&mut last)?;
            if last[0] != b'\n' {
                // Terminate a torn record so the new one stays readable.
                line.push('\n');
            }
        }
        line.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}
