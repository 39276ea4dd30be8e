//! `cvtg stats` — corpus summary statistics.

use cvtg_core::corpus::{corpus_stats, load_corpus};

use super::print_json;
use crate::{CliError, StatsArgs};

pub fn run(args: StatsArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.corpus.display())))?;
    let stats =
        corpus_stats(&corpus).map_err(|e| CliError::Input(format!("{e}")))?;
    print_json(&stats)
}
