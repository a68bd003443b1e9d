use std::io::Write;
use std::path::{Path, PathBuf};

use crossmpt::codes::read_pcm;
use crossmpt::{LinearCode, RedundantRows};

use crate::CliError;

/// Directory searched for PCM files given as relative paths that do not
/// exist from the working directory.
pub const PCM_DIR_ENV: &str = "CROSSMPT_PCM_DIR";

pub fn resolve_pcm(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(PCM_DIR_ENV) {
            let base = Path::new(&dir).join(path);
            for candidate in [base.clone(), base.with_extension("alist")] {
                if candidate.exists() {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(CliError::User(format!("PCM file not found: {}", path.display())))
}

pub fn load_code(path: &Path, rows: RedundantRows) -> Result<LinearCode, CliError> {
    let path = resolve_pcm(path)?;
    let h = read_pcm(&path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map_or_else(|| "code".to_string(), |s| s.to_string_lossy().into_owned());
    LinearCode::from_pcm(name, h, rows).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

/// Writes `bytes` next to `path` and renames into place, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::User(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let fail = |e: std::io::Error| CliError::User(format!("cannot write {}: {e}", path.display()));
    let mut f = std::fs::File::create(&tmp).map_err(fail)?;
    f.write_all(bytes).map_err(fail)?;
    f.sync_all().map_err(fail)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(fail)
}

/// Text output to a file (atomically) or to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
