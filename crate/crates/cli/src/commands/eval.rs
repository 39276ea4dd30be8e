//! `cvtg eval` — corpus-level metric evaluation.
//!
//! Every record expects an OCR transcript at `<ocr-dir>/<record-id>.json`;
//! records without one are excluded with a warning and counted. Ground-truth
//! annotation and attention-map directories are optional and unlock the
//! attention metrics (eta and ACR) for records that have both. Results are
//! reported per region count plus an overall rollup.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use cvtg_core::corpus::{load_corpus, PromptRecord};
use cvtg_core::gate::read_map;
use cvtg_core::layout::boxes_to_masks;
use cvtg_core::metrics::{
    acr, aggregate_overall, effective_attention_efficiency, ned, recall_counts, span_accuracy,
    word_accuracy, GtAnnotation, MetricsCounts, MetricsReport,
};

use super::{print_json, read_ocr};
use crate::{CliError, EvalArgs};

const ETA_XI: f64 = 1e-6;

struct RecordEval {
    region_count: usize,
    word_correct: u64,
    word_total: u64,
    ned_sum: f64,
    span_matched: u64,
    span_total: u64,
    recall_succ: u64,
    recall_total: u64,
    eta: Vec<f64>,
    acr: Vec<f64>,
    warnings: Vec<String>,
}

fn evaluate_record(
    record: &PromptRecord,
    args: &EvalArgs,
) -> Result<Option<RecordEval>, CliError> {
    let ocr_path = args.ocr_dir.join(format!("{}.json", record.id));
    if !ocr_path.exists() {
        return Ok(None);
    }
    let ocr = read_ocr(&ocr_path)?;
    let targets = record.target_contents();

    let (word_correct, word_total) = word_accuracy(&targets, &ocr);
    let (ned_sum, _) = ned(&targets, &ocr);
    let (span_matched, span_total) = span_accuracy(&targets, &ocr);
    let (recall_succ, recall_total) = recall_counts(&targets, &ocr, args.recall_threshold)
        .map_err(|e| CliError::Input(format!("record {}: {e}", record.id)))?;

    let mut eval = RecordEval {
        region_count: record.region_count(),
        word_correct,
        word_total,
        ned_sum,
        span_matched,
        span_total,
        recall_succ,
        recall_total,
        eta: Vec::new(),
        acr: Vec::new(),
        warnings: Vec::new(),
    };

    if let (Some(maps_dir), Some(gt_dir)) = (&args.maps_dir, &args.gt_dir) {
        if let Some(map_path) = find_map(maps_dir, &record.id) {
            let gt_path = gt_dir.join(format!("{}.json", record.id));
            if gt_path.exists() {
                let map = read_map(&map_path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", map_path.display())))?;
                let annotations = read_annotations(&gt_path)?;
                for (k, ann) in annotations.iter().enumerate() {
                    eval.eta
                        .push(effective_attention_efficiency(&map, &ann.bbox, ETA_XI));
                    let mask = boxes_to_masks(
                        std::slice::from_ref(&ann.bbox),
                        map.height(),
                        map.width(),
                    )
                    .pop()
                    .expect("one box in, one mask out");
                    match acr(std::slice::from_ref(&map), &mask) {
                        Ok(value) => eval.acr.push(value),
                        Err(e) => eval.warnings.push(format!(
                            "record {}: annotation {k}: ACR skipped: {e}",
                            record.id
                        )),
                    }
                }
            } else {
                eval.warnings.push(format!(
                    "record {}: attention map present but no annotations at {}",
                    record.id,
                    gt_path.display()
                ));
            }
        }
    }
    Ok(Some(eval))
}

fn find_map(dir: &Path, id: &str) -> Option<PathBuf> {
    for ext in ["atnm", "json"] {
        let path = dir.join(format!("{id}.{ext}"));
        if path.exists() {
            return Some(path);
        }
    }
    None
}

fn read_annotations(path: &Path) -> Result<Vec<GtAnnotation>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad annotations in {}: {e}", path.display())))
}

fn build_report(group: &[&RecordEval]) -> MetricsReport {
    let words: u64 = group.iter().map(|e| e.word_total).sum();
    let word_correct: u64 = group.iter().map(|e| e.word_correct).sum();
    let ned_sum: f64 = group.iter().map(|e| e.ned_sum).sum();
    let spans: u64 = group.iter().map(|e| e.span_total).sum();
    let spans_matched: u64 = group.iter().map(|e| e.span_matched).sum();
    let recall_succ: u64 = group.iter().map(|e| e.recall_succ).sum();
    let recall_total: u64 = group.iter().map(|e| e.recall_total).sum();
    let eta: Vec<f64> = group.iter().flat_map(|e| e.eta.iter().copied()).collect();
    let acr: Vec<f64> = group.iter().flat_map(|e| e.acr.iter().copied()).collect();

    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let safe_div = |num: f64, den: u64| if den == 0 { 0.0 } else { num / den as f64 };

    MetricsReport {
        word_accuracy: safe_div(word_correct as f64, words),
        ned: safe_div(ned_sum, words),
        span_accuracy: (spans > 0).then(|| spans_matched as f64 / spans as f64),
        recall: (recall_total > 0).then(|| recall_succ as f64 / recall_total as f64),
        eta_mean: mean(&eta),
        acr_mean: mean(&acr),
        eta: (!eta.is_empty()).then_some(eta),
        acr: (!acr.is_empty()).then_some(acr),
        clipscore: None,
        counts: MetricsCounts {
            words,
            images: group.len() as u64,
            spans,
        },
        word_correct,
        ned_sum,
        spans_matched,
        recall_succ: (recall_total > 0).then_some(recall_succ),
        recall_total: (recall_total > 0).then_some(recall_total),
    }
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("CVTG_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                CliError::Input(format!("CVTG_THREADS must be a non-negative integer, got {raw:?}"))
            })?;
            Ok((n > 0).then_some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.corpus.display())))?;
    if !(args.recall_threshold > 0.0 && args.recall_threshold <= 1.0) {
        return Err(CliError::Input(format!(
            "recall threshold must be in (0, 1], got {}",
            args.recall_threshold
        )));
    }

    let evaluate_all = || -> Result<Vec<Option<RecordEval>>, CliError> {
        corpus
            .par_iter()
            .map(|record| evaluate_record(record, &args))
            .collect()
    };
    let results = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
            .install(evaluate_all),
        None => evaluate_all(),
    }?;

    let mut evaluated = Vec::new();
    let mut missing = 0usize;
    for (record, result) in corpus.iter().zip(results) {
        match result {
            Some(eval) => {
                for w in &eval.warnings {
                    eprintln!("warning: {w}");
                }
                evaluated.push(eval);
            }
            None => {
                eprintln!("warning: record {}: no OCR transcript, excluded", record.id);
                missing += 1;
            }
        }
    }

    if evaluated.is_empty() {
        eprintln!("warning: no records evaluated; emitting a no-data report");
        return print_json(&json!({
            "evaluated": 0,
            "missing_ocr": missing,
            "groups": {},
            "overall": null,
        }));
    }

    let mut by_region: BTreeMap<usize, Vec<&RecordEval>> = BTreeMap::new();
    for eval in &evaluated {
        by_region.entry(eval.region_count).or_default().push(eval);
    }
    let groups: BTreeMap<usize, MetricsReport> = by_region
        .iter()
        .map(|(region, group)| (*region, build_report(group)))
        .collect();
    let subset_reports: Vec<MetricsReport> = groups.values().cloned().collect();
    let overall = aggregate_overall(&subset_reports)
        .map_err(|e| CliError::Internal(format!("aggregation failed: {e}")))?;

    print_json(&json!({
        "evaluated": evaluated.len(),
        "missing_ocr": missing,
        "groups": groups,
        "overall": overall,
    }))
}
