//! Input parsing and cache-directory plumbing for the command-line tool.

use rank2s::{PointSample, Sample};
use std::path::{Path, PathBuf};

/// CLI-level error with the process exit code it maps to:
/// 2 for input problems, 3 for infeasible requests.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(msg) | CliError::Infeasible(msg) => msg,
        }
    }
}

impl From<rank2s::Error> for CliError {
    fn from(err: rank2s::Error) -> Self {
        match &err {
            rank2s::Error::EnumerationTooLarge { .. } => CliError::Infeasible(format!(
                "{err}; use --null mc or --null asymptotic (or --method mc/asymptotic) instead"
            )),
            rank2s::Error::TiesPresent { .. } => CliError::Input(format!(
                "{err}; pass --midrank to break ties by averaging (the result is then no longer exactly distribution free)"
            )),
            _ => CliError::Input(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads a headerless single-column numeric file; blank lines are skipped.
pub fn read_univariate(path: &Path) -> CliResult<Sample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| {
            CliError::Input(format!(
                "{}:{}: cannot parse `{trimmed}` as a number",
                path.display(),
                lineno + 1
            ))
        })?;
        values.push(value);
    }
    Sample::new(values).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads a headerless CSV of d numeric columns, one observation per row.
pub fn read_points(path: &Path) -> CliResult<PointSample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "{}:{}: cannot parse `{}` as a number",
                    path.display(),
                    lineno + 1,
                    field.trim()
                ))
            })?;
            row.push(value);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(CliError::Input(format!(
                    "{}:{}: expected {d} columns, found {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    PointSample::new(rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Cache directory: --cache-dir flag, then RANK2S_CACHE, then the platform
/// user cache, then ./.rank2s-cache as a last resort.
pub fn resolve_cache_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var("RANK2S_CACHE") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    if let Ok(dir) = std::env::var("XDG_CACHE_HOME") {
        if !dir.is_empty() {
            return PathBuf::from(dir).join("rank2s");
        }
    }
    if let Ok(home) = std::env::var("HOME") {
        if !home.is_empty() {
            return PathBuf::from(home).join(".cache").join("rank2s");
        }
    }
    PathBuf::from(".rank2s-cache")
}

pub fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        }
        None => print!("{content}"),
    }
    Ok(())
}
