use std::fs;
use std::io::{self, ErrorKind};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Content-addressed store of completions, one file per key. Entries are written once.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    completion: String,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2.min(key.len())]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<String>> {
        match fs::read(self.path(key)) {
            Ok(bytes) => {
                let entry: Entry =
                    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(ErrorKind::InvalidData, e))?;
                Ok(Some(entry.completion))
            }
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Store `completion` under `key` unless an entry already exists.
    pub fn put(&self, key: &str, completion: &str) -> io::Result<()> {
        let path = self.path(key);
        if path.exists() {
            return Ok(());
        }
        fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
        let tmp =
            path.with_extension(format!("tmp.{}.{}", std::process::id(), TMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
        let body = serde_json::to_vec(&Entry { key: key.into(), completion: completion.into() })?;
        fs::write(&tmp, body)?;
        // hard_link refuses to replace an existing entry, so the first writer wins
        let linked = fs::hard_link(&tmp, &path);
        fs::remove_file(&tmp)?;
        match linked {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(e),
        }
    }
}
