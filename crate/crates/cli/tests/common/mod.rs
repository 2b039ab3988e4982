#![allow(dead_code)]

use std::path::{Path, PathBuf};

use balcube::etl::{run_etl, EtlConfig};

pub const READ: &str = "reader-7f3a";
pub const ADMIN: &str = "admin-c91e";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// A private copy of the fixture sources.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

/// A fixture copy with its fact store already loaded.
pub fn loaded_fixture() -> tempfile::TempDir {
    let dir = fixture_copy();
    run_etl(&EtlConfig::in_dir(dir.path())).unwrap();
    dir
}

pub fn append_movement(dir: &Path, line: &str) {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().append(true).open(dir.join("movements.csv")).unwrap();
    writeln!(f, "{line}").unwrap();
}
