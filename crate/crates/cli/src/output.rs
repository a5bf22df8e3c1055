use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::commands::Outcome;
use crate::report::MatrixFile;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HYPERINV_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "hyperinv-out";

/// `--out`, then the config's `outputs.dir`, then the environment, then
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Writes `report.json`, `report.txt`, the matrices as `<stem>.json` and the
/// sweep table as `sweep.tsv`. Returns the written paths.
pub fn write_outcome(dir: &Path, outcome: &Outcome, matrices: bool) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: &str| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    put("report.json", &outcome.report.to_json())?;
    put("report.txt", &outcome.report.render())?;
    if matrices {
        for (stem, m) in &outcome.matrices {
            put(&format!("{stem}.json"), &MatrixFile::from_matrix(m).to_json())?;
        }
    }
    if let Some(table) = &outcome.table {
        put("sweep.tsv", table)?;
    }
    Ok(written)
}
