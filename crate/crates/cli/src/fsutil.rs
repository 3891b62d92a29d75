//! Atomic writes and cleanup of interrupted ones.

use std::fs;
use std::io::Write;
use std::path::Path;

/// Write `contents` to `path` through a `.tmp` sibling and a rename, so a
/// killed process leaves either the old file or the new one.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents.as_ref())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Remove leftover `*.tmp` files under `dir`.
pub fn remove_temp_files(dir: &Path) -> std::io::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            remove_temp_files(&path)?;
        } else if path.extension().is_some_and(|e| e == "tmp") {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

/// Every file under `dir` whose name is `name`, sorted.
pub fn find_files(dir: &Path, name: &str) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    if dir.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                out.extend(find_files(&path, name)?);
            } else if path.file_name().is_some_and(|n| n == name) {
                out.push(path);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_and_cleanup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/report.tsv");
        write_atomic(&path, "x\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x\n");
        fs::write(dir.path().join("a/stale.ckpt.tmp"), "junk").unwrap();
        remove_temp_files(dir.path()).unwrap();
        assert!(!dir.path().join("a/stale.ckpt.tmp").exists());
        assert_eq!(find_files(dir.path(), "report.tsv").unwrap(), vec![path]);
    }
}
