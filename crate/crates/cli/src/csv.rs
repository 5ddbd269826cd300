use std::fmt::Write as _;
use std::path::Path;

use tcopula::empirical::LossSample;

use crate::CliError;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads `x1,x2` rows. A non-numeric first line is taken as a header;
/// blank lines and `#` comments are skipped.
pub fn read_pairs(path: &Path) -> Result<LossSample, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_pairs(&text).map_err(|msg| CliError::Io(format!("{}: {msg}", path.display())))
}

pub fn parse_pairs(text: &str) -> Result<LossSample, String> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => pairs.push((v[0], v[1])),
            None if i == 0 => continue,
            _ => {
                return Err(format!(
                    "line {}: expected two finite numbers, got '{line}'",
                    i + 1
                ))
            }
        }
    }
    if pairs.is_empty() {
        return Err("no data rows".to_string());
    }
    LossSample::new(pairs).map_err(|e| e.to_string())
}

pub fn pairs_to_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(48 * pairs.len() + 8);
    out.push_str("x1,x2\n");
    for &(a, b) in pairs {
        let _ = writeln!(out, "{},{}", fmt_num(a), fmt_num(b));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
