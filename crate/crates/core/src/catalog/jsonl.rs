use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::CatalogError;

/// Reads every complete line of a JSONL file. A missing file reads as empty;
/// a trailing line without a newline (a torn write) is ignored.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CatalogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CatalogError::io(path, e)),
    };
    let mut out = Vec::new();
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut lineno = 0usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| CatalogError::io(path, e))?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line.trim_end()).map_err(|e| CatalogError::Parse {
            path: path.to_owned(),
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Cuts a torn trailing line so appends start on a line boundary.
fn repair_tail(path: &Path) -> Result<(), CatalogError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(CatalogError::io(path, e)),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let f = OpenOptions::new().write(true).open(path).map_err(|e| CatalogError::io(path, e))?;
    f.set_len(keep as u64).map_err(|e| CatalogError::io(path, e))?;
    Ok(())
}

/// Append-only JSONL writer. Each record is one `write` of a full line
/// followed by `fsync`, so a crash loses at most the in-flight record.
pub struct JsonlWriter<T> {
    path: PathBuf,
    file: File,
    durable: bool,
    _record: PhantomData<fn(&T)>,
}

impl<T: Serialize> JsonlWriter<T> {
    pub fn open(path: &Path, durable: bool) -> Result<Self, CatalogError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CatalogError::io(dir, e))?;
        }
        repair_tail(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| CatalogError::io(path, e))?;
        Ok(Self { path: path.to_owned(), file, durable, _record: PhantomData })
    }

    pub fn write(&mut self, record: &T) -> Result<(), CatalogError> {
        let mut line = serde_json::to_vec(record).map_err(|e| CatalogError::Encode(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| CatalogError::io(&self.path, e))?;
        if self.durable {
            self.file.sync_data().map_err(|e| CatalogError::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
