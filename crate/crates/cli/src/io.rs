use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use smdd::design::DesignMatrix;
use smdd::engine::SmddState;
use smdd::pca::InnerResponseMatrix;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

pub fn parse_row(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("'{s}' is not a number")))
        })
        .collect()
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// A table with a header and numeric or text cells.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn numeric_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<String>> {
    rows.map(|r| r.iter().map(|v| fmt_num(*v)).collect()).collect()
}

pub fn write_design(path: &Path, d: &DesignMatrix) -> CliResult<()> {
    write_table(path, &numbered("x", d.k()), &numeric_rows(d.rows()))
}

pub fn write_responses(path: &Path, y: &InnerResponseMatrix) -> CliResult<()> {
    write_table(path, &numbered("h", y.l()), &numeric_rows(y.rows()))
}

pub fn write_trace(path: &Path, state: &SmddState) -> CliResult<()> {
    let mut header = vec!["iteration".to_string()];
    header.extend(numbered("x", state.config().k));
    header.extend(["min_dist_h", "phi_q", "l_pc"].map(String::from));
    let rows: Vec<Vec<String>> = state
        .trace()
        .iter()
        .map(|t| {
            let mut r = vec![t.iteration.to_string()];
            r.extend(t.point.iter().map(|v| fmt_num(*v)));
            r.extend([fmt_num(t.min_dist_h), fmt_num(t.phi_q), t.l_pc.to_string()]);
            r
        })
        .collect();
    write_table(path, &header, &rows)
}

fn read_numeric(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(
            rec.iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        CliError::Usage(format!("{}: '{s}' is not a number", path.display()))
                    })
                })
                .collect::<CliResult<Vec<f64>>>()?,
        );
    }
    Ok(out)
}

pub fn read_design(path: &Path) -> CliResult<DesignMatrix> {
    Ok(DesignMatrix::from_rows(&read_numeric(path)?)?)
}

pub fn read_responses(path: &Path) -> CliResult<InnerResponseMatrix> {
    Ok(InnerResponseMatrix::from_rows(&read_numeric(path)?)?)
}

pub fn load_state(path: &Path) -> CliResult<SmddState> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::CorruptState(format!("{}: {e}", path.display())))?;
    SmddState::from_json(&text).map_err(|e| CliError::CorruptState(e.to_string()))
}

pub fn save_state(path: &Path, state: &SmddState) -> CliResult<()> {
    let json = state.to_json()?;
    write_atomic(path, json.as_bytes())
}

/// Exclusive lock next to a state file, released on drop.
pub struct StateLock {
    path: PathBuf,
}

impl StateLock {
    pub fn acquire(state: &Path) -> CliResult<Self> {
        let mut name = state.as_os_str().to_owned();
        name.push(".lock");
        let path = PathBuf::from(name);
        fs::create_dir_all(parent_dir(&path))?;
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Runtime(format!(
                "{} is locked by another invocation (remove {} if stale)",
                state.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn ensure_file_absent(path: &Path) -> CliResult<()> {
    if File::open(path).is_ok() {
        return Err(CliError::Usage(format!("{} already exists", path.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e-300, 0.987654321012345678, 0.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(parse_row(&fmt_row(&[0.25, 0.75])).unwrap(), vec![0.25, 0.75]);
        assert!(parse_row("0.1,x").is_err());
    }
}
