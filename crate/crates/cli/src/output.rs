use std::fs;
use std::io::Write;
use std::path::Path;

use prda::data::{load_dataset, DataFormat};
use prda::{Dataset, PrdaError};

use crate::CliError;

/// Writes `text` to `path`, or to standard output when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset, CliError> {
    let format = DataFormat::detect(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    load_dataset(path, format).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// One integer label per line, optionally under a `label` header.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == "label") {
            continue;
        }
        let value = line.parse().map_err(|e| {
            let err = PrdaError::Parse {
                line: i + 1,
                message: format!("bad label '{line}': {e}"),
            };
            CliError::Runtime(format!("{}: {err}", path.display()))
        })?;
        labels.push(value);
    }
    Ok(labels)
}
