//! Files written next to a command's CSV output.

use std::path::{Path, PathBuf};

use csl_optomech::{Error, Result};

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Config(format!("cannot write {}: {e}", path.display()))
    })
}

/// `<output>.meta.json`: parameter fingerprints and run settings.
pub fn write_metadata(output: &Path, meta: &serde_json::Value) -> Result<()> {
    let mut meta = meta.clone();
    meta["version"] = serde_json::json!(env!("CARGO_PKG_VERSION"));
    meta["data_file"] = serde_json::json!(output);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&sibling(output, ".meta.json"), &(text + "\n"))
}

/// `<output>.gp`: plots column `ycol` against column 1.
pub fn write_gnuplot(output: &Path, xlabel: &str, ylabel: &str, ycol: usize, log_y: bool) -> Result<()> {
    let data = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    if log_y {
        script.push_str("set logscale y\n");
    }
    script.push_str(&format!(
        "set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot '{data}' using 1:{ycol} with lines\n"
    ));
    write_text(&sibling(output, ".gp"), &script)
}
