//! Text normalization, Levenshtein distance, and isolated fuzzy matching.
//!
//! Each visual-text target is scored independently against the full OCR
//! stream with a sliding window of the target's own length, so a rendering
//! error in one region never bleeds into another target's score.

use thiserror::Error;

use crate::metrics::OcrOutput;

/// Errors from the matching primitives.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    /// `partial_ratio` requires a non-empty target.
    #[error("target is empty after normalization")]
    EmptyTarget,
}

/// Text reduced to lowercase alphanumerics and single spaces.
///
/// Invariants: no uppercase letters, no characters outside letters/digits/
/// space, no leading, trailing, or doubled spaces. Construct via
/// [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of Unicode scalar values, spaces included.
    pub fn char_count(&self) -> usize {
        self.0.chars().count()
    }

    /// Number of Unicode scalar values, spaces excluded. This is the length
    /// unit used by the reward's noise penalty.
    pub fn char_count_no_spaces(&self) -> usize {
        self.0.chars().filter(|c| *c != ' ').count()
    }
}

impl std::fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fuzzy score of one target against the OCR stream.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScore {
    /// Index of the target in the input list.
    pub target_index: usize,
    /// Best similarity in `[0, 1]`.
    pub score: f64,
    /// Character offset into the normalized OCR stream where the best window
    /// begins. `None` when the degenerate fallback fired (empty target or
    /// empty stream).
    pub best_window_offset: Option<usize>,
}

/// Lowercases and strips a string down to alphanumerics and single spaces.
///
/// Unicode letters and digits are kept (lowercased); every other character
/// becomes a space; space runs are collapsed and the ends trimmed.
pub fn normalize(s: &str) -> NormalizedText {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            // Lowercasing can expand to multiple scalars; keep only the
            // alphanumeric ones (drops stray combining marks).
            for lc in c.to_lowercase() {
                if lc.is_alphanumeric() {
                    out.push(lc);
                }
            }
        } else {
            pending_space = true;
        }
    }
    NormalizedText(out)
}

/// Levenshtein edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Maximum Levenshtein similarity between `target` and any window of
/// `ocr_stream` with the target's length.
///
/// When the stream is shorter than the target the whole stream is compared
/// instead, still normalized by the target length, so a partially rendered
/// target earns proportional credit. Result is clamped to `[0, 1]`.
pub fn partial_ratio(
    target: &NormalizedText,
    ocr_stream: &NormalizedText,
) -> Result<f64, MatchError> {
    best_window(target, ocr_stream).map(|(score, _)| score)
}

/// Like [`partial_ratio`], also reporting where the best window begins.
/// Ties between equally good windows resolve to the smallest offset.
pub fn best_window(
    target: &NormalizedText,
    ocr_stream: &NormalizedText,
) -> Result<(f64, Option<usize>), MatchError> {
    let t: Vec<char> = target.as_str().chars().collect();
    if t.is_empty() {
        return Err(MatchError::EmptyTarget);
    }
    let s: Vec<char> = ocr_stream.as_str().chars().collect();
    let n = t.len();

    if s.len() < n {
        let d = levenshtein_chars(&t, &s);
        let score = (1.0 - d as f64 / n as f64).clamp(0.0, 1.0);
        let offset = if s.is_empty() { None } else { Some(0) };
        return Ok((score, offset));
    }

    let mut best = f64::NEG_INFINITY;
    let mut best_offset = 0usize;
    for offset in 0..=(s.len() - n) {
        let d = levenshtein_chars(&t, &s[offset..offset + n]);
        let score = 1.0 - d as f64 / n as f64;
        if score > best {
            best = score;
            best_offset = offset;
            if d == 0 {
                break; // cannot improve on an exact window
            }
        }
    }
    Ok((best.clamp(0.0, 1.0), Some(best_offset)))
}

/// Joins OCR lines into the normalized global stream used for matching.
pub fn ocr_stream(ocr: &OcrOutput) -> NormalizedText {
    let joined = ocr
        .lines
        .iter()
        .map(|l| l.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    normalize(&joined)
}

/// Scores every target independently against the global OCR stream.
///
/// Targets that normalize to the empty string score 0 with no window offset.
/// Deleting one target never changes another target's score.
pub fn instance_scores<S: AsRef<str>>(targets: &[S], ocr: &OcrOutput) -> Vec<InstanceScore> {
    let stream = ocr_stream(ocr);
    targets
        .iter()
        .enumerate()
        .map(|(target_index, raw)| {
            let t = normalize(raw.as_ref());
            if t.is_empty() {
                return InstanceScore {
                    target_index,
                    score: 0.0,
                    best_window_offset: None,
                };
            }
            let (score, best_window_offset) =
                best_window(&t, &stream).expect("non-empty target");
            InstanceScore {
                target_index,
                score,
                best_window_offset,
            }
        })
        .collect()
}
