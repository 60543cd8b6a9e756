//! Content manifest of an output directory: one `sha256  size  path` line per
//! file, sorted by path.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use attoscope_core::io::write_atomic;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for e in fs::read_dir(dir)? {
        let e = e?;
        let p = e.path();
        let name = e.file_name();
        let name = name.to_string_lossy();
        if name.starts_with('.') {
            continue;
        }
        if e.file_type()?.is_dir() {
            walk(root, &p, out)?;
        } else if !(dir == root && name == MANIFEST_NAME) {
            out.push(p);
        }
    }
    Ok(())
}

impl Manifest {
    /// Digest every file under `root` except the manifest and hidden files.
    pub fn scan(root: &Path) -> io::Result<Self> {
        let mut files = Vec::new();
        walk(root, root, &mut files)?;
        let mut entries = Vec::with_capacity(files.len());
        for f in files {
            let bytes = fs::read(&f)?;
            let rel = f.strip_prefix(root).expect("under root");
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/");
            entries.push(ManifestEntry { path, size: bytes.len() as u64, sha256: hex::encode(Sha256::digest(&bytes)) });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{}  {}  {}\n", e.sha256, e.size, e.path)).collect()
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut entries = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut it = line.splitn(3, "  ");
            let sha256 = it.next()?.to_string();
            let size = it.next()?.parse().ok()?;
            let path = it.next()?.to_string();
            entries.push(ManifestEntry { path, size, sha256 });
        }
        Some(Self { entries })
    }

    pub fn write(&self, root: &Path) -> io::Result<()> {
        write_atomic(&root.join(MANIFEST_NAME), self.to_text().as_bytes()).map_err(|e| io::Error::other(e.to_string()))
    }

    pub fn load(root: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(root.join(MANIFEST_NAME))?;
        Self::parse(&text).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "malformed manifest"))
    }

    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.path == path)
    }
}
