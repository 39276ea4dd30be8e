//! Subcommand implementations.

pub mod eval;
pub mod gate;
pub mod layout;
pub mod reward;
pub mod stats;
pub mod synth;

use std::path::Path;

use cvtg_core::metrics::OcrOutput;

use crate::CliError;

/// Reads an OCR transcript JSON file.
pub fn read_ocr(path: &Path) -> Result<OcrOutput, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read OCR file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad OCR JSON in {}: {e}", path.display())))
}

/// Pretty-prints a serializable value to stdout.
pub fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}
