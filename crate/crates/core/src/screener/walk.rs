//! Working-tree enumeration shared by the screener and the reference index.

use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};

/// Bytes inspected when sniffing for binary content.
pub const BINARY_SNIFF_BYTES: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoFile {
    /// Repository-relative, `/`-separated.
    pub rel_path: String,
    pub abs_path: PathBuf,
    pub len: u64,
}

#[derive(Debug, Default)]
pub struct FileListing {
    pub files: Vec<RepoFile>,
    /// Files larger than the size cap.
    pub oversized: Vec<String>,
    pub warnings: Vec<String>,
}

/// A NUL byte in the first 8 KiB marks a file as binary.
pub fn is_binary(bytes: &[u8]) -> bool {
    bytes[..bytes.len().min(BINARY_SNIFF_BYTES)].contains(&0)
}

/// Render `path` relative to `root` with `/` separators.
pub fn relative_path(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let parts: Vec<_> = rel
        .components()
        .map(|c| match c {
            std::path::Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Option<_>>()?;
    if parts.is_empty() {
        None
    } else {
        Some(parts.join("/"))
    }
}

/// List regular files under `root`, skipping `.git` and symlinks, sorted by
/// relative path.
pub fn list_files(root: &Path, max_file_bytes: u64) -> Result<FileListing> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;

    let mut listing = FileListing::default();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !(e.file_type().is_dir() && e.file_name() == ".git"));
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                listing.warnings.push(format!("walk error: {e}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(rel_path) = relative_path(root, entry.path()) else {
            continue;
        };
        let len = match entry.metadata() {
            Ok(m) => m.len(),
            Err(e) => {
                listing.warnings.push(format!("{rel_path}: {e}"));
                continue;
            }
        };
        if len > max_file_bytes {
            listing.oversized.push(rel_path);
            continue;
        }
        listing.files.push(RepoFile {
            rel_path,
            abs_path: entry.into_path(),
            len,
        });
    }
    listing.files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    Ok(listing)
}
