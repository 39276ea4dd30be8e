//! `cvtg reward` — score one OCR transcript against its targets.

use cvtg_core::corpus::extract_targets;
use cvtg_core::reward::{ocr_reward, RewardConfig, RewardError};

use super::{print_json, read_ocr};
use crate::{CliError, RewardArgs};

pub fn run(args: RewardArgs) -> Result<(), CliError> {
    let targets: Vec<String> = match &args.prompt {
        Some(prompt) => extract_targets(prompt),
        None => args.target.clone(),
    };
    if targets.is_empty() {
        return Err(CliError::Input(
            "no targets: pass --target or a --prompt with quoted spans".into(),
        ));
    }
    let ocr = read_ocr(&args.ocr)?;
    let config = RewardConfig {
        lambda_bal: args.lambda_bal,
        delta: args.delta,
    };
    let report = ocr_reward(&targets, &ocr, &config).map_err(|e| match e {
        RewardError::InvalidConfig(_) | RewardError::EmptyTargets => CliError::Input(e.to_string()),
        other => CliError::Internal(other.to_string()),
    })?;
    print_json(&report)?;
    // Final scrape-friendly line; {:?} keeps the trailing ".0" on integers.
    println!("R_OCR={:?}", report.r_ocr);
    Ok(())
}
