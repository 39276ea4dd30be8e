//! Evaluation metrics for rendered visual text.
//!
//! Text fidelity comes from word accuracy (exact membership), normalized
//! edit similarity (NED), and span accuracy (exact match against
//! concatenations of consecutive OCR lines, the span-level protocol used for
//! languages without whitespace word boundaries). Attention quality comes
//! from the effective attention efficiency `eta` and the attention
//! concentration ratio (ACR). Subset reports carry their raw counts so
//! corpus-level rollups can micro-average by word count where the protocol
//! requires it and weight by image count elsewhere.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::{average_maps, AttentionMap};
use crate::layout::{boxes_to_masks, BoundingBox};
use crate::matching;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("targets list is empty")]
    EmptyTargets,
    #[error("threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("cosine list is empty")]
    EmptyCosines,
    #[error("cosine {0} outside [-1, 1]")]
    InvalidCosine(f64),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("vacuous attention: averaged map is all zeros")]
    VacuousAttention,
    #[error("zero total words across subsets")]
    ZeroTotalWords,
    #[error("dimension mismatch between maps")]
    DimensionMismatch,
}

/// One OCR line: recognized text plus an optional normalized box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrLine {
    pub text: String,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
}

/// Ordered OCR engine output for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrOutput {
    pub lines: Vec<OcrLine>,
}

impl OcrOutput {
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self {
            lines: texts
                .into_iter()
                .map(|t| OcrLine {
                    text: t.into(),
                    bbox: None,
                })
                .collect(),
        }
    }
}

/// A manually annotated ground-truth phrase region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAnnotation {
    pub phrase: String,
    pub bbox: BoundingBox,
}

/// Denominators carried by every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricsCounts {
    pub words: u64,
    pub images: u64,
    pub spans: u64,
}

/// Metrics for one subset of records, with the raw sums needed to merge
/// subsets without losing the micro-averaging weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub word_accuracy: f64,
    pub ned: f64,
    pub span_accuracy: Option<f64>,
    pub recall: Option<f64>,
    /// Per-annotation effective attention efficiencies.
    pub eta: Option<Vec<f64>>,
    /// Per-annotation attention concentration ratios.
    pub acr: Option<Vec<f64>>,
    pub clipscore: Option<f64>,
    pub counts: MetricsCounts,
    pub word_correct: u64,
    pub ned_sum: f64,
    pub spans_matched: u64,
    pub recall_succ: Option<u64>,
    pub recall_total: Option<u64>,
    pub eta_mean: Option<f64>,
    pub acr_mean: Option<f64>,
}

impl MetricsReport {
    /// An all-zero report over nothing, for the "no data" case.
    pub fn empty() -> Self {
        Self {
            word_accuracy: 0.0,
            ned: 0.0,
            span_accuracy: None,
            recall: None,
            eta: None,
            acr: None,
            clipscore: None,
            counts: MetricsCounts::default(),
            word_correct: 0,
            ned_sum: 0.0,
            spans_matched: 0,
            recall_succ: None,
            recall_total: None,
            eta_mean: None,
            acr_mean: None,
        }
    }
}

fn lower_words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// OCR text as a flat lowercased word list, in reading order.
fn ocr_word_list(ocr: &OcrOutput) -> Vec<String> {
    ocr.lines
        .iter()
        .flat_map(|l| lower_words(&l.text))
        .collect()
}

/// Counts target words that appear verbatim in the OCR word set. Both sides
/// are lowercased and whitespace-split. Returns `(correct, total)` for
/// micro-aggregation.
pub fn word_accuracy<S: AsRef<str>>(targets: &[S], ocr: &OcrOutput) -> (u64, u64) {
    let ocr_words = ocr_word_list(ocr);
    let ocr_set: HashSet<&str> = ocr_words.iter().map(String::as_str).collect();
    let mut correct = 0;
    let mut total = 0;
    for t in targets {
        for w in lower_words(t.as_ref()) {
            total += 1;
            if ocr_set.contains(w.as_str()) {
                correct += 1;
            }
        }
    }
    (correct, total)
}

/// Normalized edit similarity. Every ground-truth word is paired with its
/// closest OCR word (highest `1 - dist / max_len`, ties to the earliest in
/// reading order; the empty string when there are no OCR words), then scored
/// as `1 - dist / (max_len + 1e-5)`. Returns `(similarity_sum, word_count)`.
pub fn ned<S: AsRef<str>>(targets: &[S], ocr: &OcrOutput) -> (f64, u64) {
    const EPSILON: f64 = 1e-5;
    let ocr_words = ocr_word_list(ocr);
    let mut sum = 0.0;
    let mut count = 0;
    for t in targets {
        for w in lower_words(t.as_ref()) {
            let w_len = w.chars().count();
            let mut best: Option<(f64, usize, usize)> = None; // (selection sim, dist, max_len)
            for ow in &ocr_words {
                let dist = matching::levenshtein(&w, ow);
                let max_len = w_len.max(ow.chars().count());
                let sim = 1.0 - dist as f64 / max_len as f64;
                if best.map_or(true, |(b, _, _)| sim > b) {
                    best = Some((sim, dist, max_len));
                }
            }
            let (dist, max_len) = match best {
                Some((_, dist, max_len)) => (dist, max_len),
                None => (w_len, w_len), // matched against the empty string
            };
            sum += 1.0 - dist as f64 / (max_len as f64 + EPSILON);
            count += 1;
        }
    }
    (sum, count)
}

/// Counts spans whose normalized form equals the normalized no-separator
/// concatenation of some contiguous run of OCR lines. Returns
/// `(matched, total)`.
pub fn span_accuracy<S: AsRef<str>>(spans: &[S], ocr: &OcrOutput) -> (u64, u64) {
    let line_texts: Vec<&str> = ocr.lines.iter().map(|l| l.text.as_str()).collect();
    let mut run_norms = HashSet::new();
    for start in 0..line_texts.len() {
        let mut concat = String::new();
        for text in &line_texts[start..] {
            concat.push_str(text);
            run_norms.insert(matching::normalize(&concat).as_str().to_string());
        }
    }
    let mut matched = 0;
    let mut total = 0;
    for span in spans {
        total += 1;
        let norm = matching::normalize(span.as_ref());
        if run_norms.contains(norm.as_str()) {
            matched += 1;
        }
    }
    (matched, total)
}

/// Fraction of targets whose fuzzy score reaches `threshold` (inclusive).
pub fn recall<S: AsRef<str>>(
    targets: &[S],
    ocr: &OcrOutput,
    threshold: f64,
) -> Result<f64, MetricsError> {
    let (succ, total) = recall_counts(targets, ocr, threshold)?;
    Ok(succ as f64 / total as f64)
}

/// Raw `(detected, total)` pair behind [`recall`], for pooling across images.
pub fn recall_counts<S: AsRef<str>>(
    targets: &[S],
    ocr: &OcrOutput,
    threshold: f64,
) -> Result<(u64, u64), MetricsError> {
    if targets.is_empty() {
        return Err(MetricsError::EmptyTargets);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    let scores = matching::instance_scores(targets, ocr);
    let succ = scores.iter().filter(|s| s.score >= threshold).count() as u64;
    Ok((succ, targets.len() as u64))
}

/// Effective attention efficiency: the map is denoised by keeping values
/// strictly above mean + population standard deviation, then the surviving
/// energy inside the box is divided by the energy outside it plus `xi`.
///
/// A perfectly uniform map has no value above its own mean, so it denoises
/// to nothing and scores 0.
pub fn effective_attention_efficiency(map: &AttentionMap, gt_box: &BoundingBox, xi: f64) -> f64 {
    let values = map.values();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let threshold = mean + variance.sqrt();

    let mask = boxes_to_masks(std::slice::from_ref(gt_box), map.height(), map.width())
        .pop()
        .expect("one box in, one mask out");
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (v, m) in values.iter().zip(mask.values()) {
        if *v > threshold {
            if *m == 1.0 {
                inside += v;
            } else {
                outside += v;
            }
        }
    }
    inside / (outside + xi)
}

/// Attention concentration ratio: mean attention over the mask cells divided
/// by the global mean, after averaging the token maps. A mask covering the
/// whole grid is defined as 1.
pub fn acr(token_maps: &[AttentionMap], bbox_mask: &AttentionMap) -> Result<f64, MetricsError> {
    let averaged = average_maps(token_maps).map_err(|_| MetricsError::DimensionMismatch)?;
    if !averaged.same_dims(bbox_mask) {
        return Err(MetricsError::DimensionMismatch);
    }
    if bbox_mask.values().iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(MetricsError::InvalidMask(
            "mask values must be 0 or 1".into(),
        ));
    }
    let ones = bbox_mask.values().iter().filter(|v| **v == 1.0).count();
    let total = bbox_mask.values().len();
    if ones == 0 {
        return Err(MetricsError::InvalidMask("mask has no cells set".into()));
    }
    if ones == total {
        return Ok(1.0);
    }
    let total_sum: f64 = averaged.values().iter().sum();
    if total_sum <= 0.0 {
        return Err(MetricsError::VacuousAttention);
    }
    let inside_sum: f64 = averaged
        .values()
        .iter()
        .zip(bbox_mask.values())
        .filter(|(_, m)| **m == 1.0)
        .map(|(v, _)| v)
        .sum();
    let inside_mean = inside_sum / ones as f64;
    let global_mean = total_sum / total as f64;
    Ok(inside_mean / global_mean)
}

/// Mean over images of `2.5 * max(0, cosine)`.
pub fn clipscore_aggregate(cosines: &[f64]) -> Result<f64, MetricsError> {
    if cosines.is_empty() {
        return Err(MetricsError::EmptyCosines);
    }
    if let Some(c) = cosines.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
        return Err(MetricsError::InvalidCosine(*c));
    }
    Ok(cosines.iter().map(|c| 2.5 * c.max(0.0)).sum::<f64>() / cosines.len() as f64)
}

/// Merges subset reports into the overall summary. Word accuracy and NED are
/// micro-averaged by total word count; span accuracy and recall pool their
/// raw counts the same way; CLIPScore and the eta/ACR means are weighted by
/// image count.
pub fn aggregate_overall(subset_reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    let words: u64 = subset_reports.iter().map(|r| r.counts.words).sum();
    if words == 0 {
        return Err(MetricsError::ZeroTotalWords);
    }
    let images: u64 = subset_reports.iter().map(|r| r.counts.images).sum();
    let spans: u64 = subset_reports.iter().map(|r| r.counts.spans).sum();
    let word_correct: u64 = subset_reports.iter().map(|r| r.word_correct).sum();
    let ned_sum: f64 = subset_reports.iter().map(|r| r.ned_sum).sum();
    let spans_matched: u64 = subset_reports.iter().map(|r| r.spans_matched).sum();

    let recall_succ: u64 = subset_reports.iter().filter_map(|r| r.recall_succ).sum();
    let recall_total: u64 = subset_reports.iter().filter_map(|r| r.recall_total).sum();

    let image_weighted = |value: fn(&MetricsReport) -> Option<f64>| -> Option<f64> {
        let mut weighted = 0.0;
        let mut weight = 0u64;
        for r in subset_reports {
            if let Some(v) = value(r) {
                weighted += v * r.counts.images as f64;
                weight += r.counts.images;
            }
        }
        (weight > 0).then(|| weighted / weight as f64)
    };

    let concat = |list: fn(&MetricsReport) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
        let mut out = Vec::new();
        let mut any = false;
        for r in subset_reports {
            if let Some(values) = list(r) {
                any = true;
                out.extend_from_slice(values);
            }
        }
        any.then_some(out)
    };

    Ok(MetricsReport {
        word_accuracy: word_correct as f64 / words as f64,
        ned: ned_sum / words as f64,
        span_accuracy: (spans > 0).then(|| spans_matched as f64 / spans as f64),
        recall: (recall_total > 0).then(|| recall_succ as f64 / recall_total as f64),
        eta: concat(|r| r.eta.as_ref()),
        acr: concat(|r| r.acr.as_ref()),
        clipscore: image_weighted(|r| r.clipscore),
        counts: MetricsCounts {
            words,
            images,
            spans,
        },
        word_correct,
        ned_sum,
        spans_matched,
        recall_succ: (recall_total > 0).then_some(recall_succ),
        recall_total: (recall_total > 0).then_some(recall_total),
        eta_mean: image_weighted(|r| r.eta_mean),
        acr_mean: image_weighted(|r| r.acr_mean),
    })
}
