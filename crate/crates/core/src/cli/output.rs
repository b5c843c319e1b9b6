use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;

/// Formats an optional value as a CSV cell, empty when absent.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `header` and `rows` to `dir/name`. Data files carry no timestamp;
/// the run metadata goes to the sidecar written by [`write_meta`].
pub fn write_csv<I, R>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<PathBuf, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    file: String,
    subcommand: &'a str,
    created: String,
    seed: u64,
    config: Option<String>,
    version: &'static str,
}

/// `<file>.meta.json` next to `data` with an RFC 3339 creation timestamp.
pub fn write_meta(data: &Path, subcommand: &str, seed: u64, config: Option<&Path>) -> Result<(), CliError> {
    let meta = Meta {
        file: data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        subcommand,
        created: chrono::Utc::now().to_rfc3339(),
        seed,
        config: config.map(|p| p.display().to_string()),
        version: env!("CARGO_PKG_VERSION"),
    };
    let mut name = data.as_os_str().to_owned();
    name.push(".meta.json");
    let path = PathBuf::from(name);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
