//! Series CSV I/O (`k,re,im`) and small write helpers. Floats are written
//! with the shortest round-trip representation, so equal inputs produce
//! byte-identical files.

use num_complex::Complex64;

use std::path::Path;

use crate::CliError;

pub fn write_series(path: &Path, data: &[Complex64]) -> Result<(), CliError> {
    let mut out = String::from("k,re,im\n");
    for (k, v) in data.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", k, v.re, v.im));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", path.display())))
}

pub fn read_series(path: &str) -> Result<Vec<Complex64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('k')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::config(format!(
                "{path}:{}: expected k,re,im, got {line:?}",
                lineno + 1
            )));
        }
        let re: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("{path}:{}: {e}", lineno + 1)))?;
        let im: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("{path}:{}: {e}", lineno + 1)))?;
        out.push(Complex64::new(re, im));
    }
    if out.is_empty() {
        return Err(CliError::config(format!("{path}: no samples")));
    }
    Ok(out)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::numerical(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", path.display())))
}

pub fn create_out_dir(dir: &str) -> Result<std::path::PathBuf, CliError> {
    let path = std::path::PathBuf::from(dir);
    std::fs::create_dir_all(&path)
        .map_err(|e| CliError::config(format!("cannot create {dir}: {e}")))?;
    Ok(path)
}

pub fn write_with(
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut buf: Vec<u8> = Vec::new();
    f(&mut buf).map_err(|e| CliError::numerical(format!("write failed: {e}")))?;
    std::fs::write(path, buf)
        .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", path.display())))
}
