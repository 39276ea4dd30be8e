//! CVTG-style prompt corpora: loading, validation, and statistics.
//!
//! A corpus file is a UTF-8 JSON array of records, each holding a global
//! prompt, its quoted visual-text targets in order of appearance, and a
//! language tag. The number of regions is always derived from the target
//! list, never stored. Loading is strict: a record whose stored targets
//! disagree with the quoted spans of its own prompt is rejected with a
//! diagnostic naming the record.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record {record_id}: field {field}: {message}")]
    Schema {
        record_id: String,
        field: String,
        message: String,
    },
    /// A record whose body does not deserialize; the message names the
    /// offending field.
    #[error("record {record_id}: {message}")]
    Malformed { record_id: String, message: String },
    #[error(
        "record {record_id}: stored targets disagree with the prompt's quoted spans: \
         stored {stored:?}, extracted {extracted:?}"
    )]
    TargetMismatch {
        record_id: String,
        stored: Vec<String>,
        extracted: Vec<String>,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Requested text size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Large,
    Medium,
    Small,
}

/// Requested font style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Font {
    Regular,
    Bold,
    Italic,
    Cursive,
}

/// Style attributes attached to one visual text. Color is free-form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TargetAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<Size>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub font: Option<Font>,
}

impl TargetAttributes {
    pub fn is_empty(&self) -> bool {
        self.size.is_none() && self.color.is_none() && self.font.is_none()
    }
}

/// One required visual text with its optional carrier and attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualTextTarget {
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<TargetAttributes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    EN,
    ZH,
}

/// One benchmark prompt with its targets. `region_count` is derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: String,
    pub targets: Vec<VisualTextTarget>,
    pub language: Language,
}

impl PromptRecord {
    pub fn region_count(&self) -> usize {
        self.targets.len()
    }

    pub fn target_contents(&self) -> Vec<&str> {
        self.targets.iter().map(|t| t.content.as_str()).collect()
    }
}

/// Corpus-level summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_prompts: usize,
    /// Mean whitespace-token count of each record's space-joined targets.
    pub avg_words: f64,
    /// Mean character count of the same joined string.
    pub avg_chars: f64,
    /// Fraction of records per region count; sums to 1.
    pub region_histogram: BTreeMap<usize, f64>,
    /// Fraction of records with at least one attributed target.
    pub attributed_fraction: f64,
}

/// Extracts, in order, the content between each matched pair of single
/// quotes. Typographic quotes are normalized to straight quotes first. An
/// opening quote must be preceded by start-of-string, whitespace, or
/// punctuation and a closing quote followed by end-of-string, whitespace, or
/// punctuation, which keeps apostrophes inside words ("don't") from pairing.
/// An unmatched trailing quote contributes nothing.
pub fn extract_targets(prompt: &str) -> Vec<String> {
    let chars: Vec<char> = prompt
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' => '\'',
            other => other,
        })
        .collect();
    let boundary = |c: Option<&char>| c.map_or(true, |c| !c.is_alphanumeric());

    let mut targets = Vec::new();
    let mut open: Option<usize> = None; // index just past the opening quote
    for (i, c) in chars.iter().enumerate() {
        if *c != '\'' {
            continue;
        }
        match open {
            None => {
                if boundary(i.checked_sub(1).and_then(|p| chars.get(p))) {
                    open = Some(i + 1);
                }
            }
            Some(start) => {
                if boundary(chars.get(i + 1)) {
                    targets.push(chars[start..i].iter().collect());
                    open = None;
                }
            }
        }
    }
    targets
}

/// Loads and validates a corpus file.
pub fn load_corpus(path: &Path) -> Result<Vec<PromptRecord>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Parses and validates corpus JSON. Record ids must be unique because
/// per-record artifacts (OCR transcripts, attention maps) are keyed by id.
pub fn parse_corpus(json: &str) -> Result<Vec<PromptRecord>, CorpusError> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(json)?;
    let mut records = Vec::with_capacity(raw.len());
    let mut seen = std::collections::HashSet::new();
    for (index, value) in raw.into_iter().enumerate() {
        let id_hint = value
            .get("id")
            .and_then(|v| v.as_str())
            .map_or_else(|| format!("at index {index}"), str::to_string);
        let record: PromptRecord =
            serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
                record_id: id_hint,
                message: e.to_string(),
            })?;
        validate_record(&record)?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::Schema {
                record_id: record.id.clone(),
                field: "id".into(),
                message: "duplicate record id".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn validate_record(record: &PromptRecord) -> Result<(), CorpusError> {
    let n = record.targets.len();
    if !(2..=5).contains(&n) {
        return Err(CorpusError::Schema {
            record_id: record.id.clone(),
            field: "targets".into(),
            message: format!("region count {n} outside [2, 5]"),
        });
    }
    for (k, t) in record.targets.iter().enumerate() {
        if t.content.trim().is_empty() {
            return Err(CorpusError::Schema {
                record_id: record.id.clone(),
                field: format!("targets[{k}].content"),
                message: "empty after trimming".into(),
            });
        }
    }
    let extracted = extract_targets(&record.prompt);
    let stored: Vec<String> = record.targets.iter().map(|t| t.content.clone()).collect();
    if extracted != stored {
        return Err(CorpusError::TargetMismatch {
            record_id: record.id.clone(),
            stored,
            extracted,
        });
    }
    Ok(())
}

/// Summary statistics over a non-empty corpus. Word and character counts are
/// taken over each record's targets joined with single spaces, so the join
/// spaces count once each.
pub fn corpus_stats(corpus: &[PromptRecord]) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let mut word_sum = 0.0;
    let mut char_sum = 0.0;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut attributed = 0usize;
    for record in corpus {
        let joined = record.target_contents().join(" ");
        word_sum += joined.split_whitespace().count() as f64;
        char_sum += joined.chars().count() as f64;
        *histogram.entry(record.region_count()).or_insert(0) += 1;
        if record
            .targets
            .iter()
            .any(|t| t.attributes.as_ref().is_some_and(|a| !a.is_empty()))
        {
            attributed += 1;
        }
    }
    Ok(CorpusStats {
        num_prompts: corpus.len(),
        avg_words: word_sum / n,
        avg_chars: char_sum / n,
        region_histogram: histogram
            .into_iter()
            .map(|(k, count)| (k, count as f64 / n))
            .collect(),
        attributed_fraction: attributed as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_targets_in_order() {
        let prompt =
            "On the table, a note that says 'TextCrafter'. A coffee cup with the word 'IJCV' on it.";
        assert_eq!(extract_targets(prompt), vec!["TextCrafter", "IJCV"]);
    }

    #[test]
    fn extract_without_quotes_is_empty() {
        assert_eq!(extract_targets("no quotes here"), Vec::<String>::new());
    }

    #[test]
    fn extract_multi_word_spans() {
        let prompt = "a sign 'Buy 2 Get 1 Free' above a tag 'Sale'";
        assert_eq!(extract_targets(prompt), vec!["Buy 2 Get 1 Free", "Sale"]);
    }

    #[test]
    fn extract_skips_word_internal_apostrophes() {
        assert_eq!(extract_targets("don't panic"), Vec::<String>::new());
        assert_eq!(
            extract_targets("a mug reading 'don't panic' here"),
            vec!["don't panic"]
        );
    }

    #[test]
    fn extract_normalizes_typographic_quotes() {
        assert_eq!(
            extract_targets("a poster with \u{2018}Grand Opening\u{2019} on it"),
            vec!["Grand Opening"]
        );
    }

    #[test]
    fn extract_drops_unmatched_trailing_quote() {
        assert_eq!(extract_targets("says 'Open' and then 'oops"), vec!["Open"]);
    }

    fn record_json(id: &str, prompt: &str, targets: &[&str]) -> serde_json::Value {
        serde_json::json!({
            "id": id,
            "prompt": prompt,
            "targets": targets
                .iter()
                .map(|t| serde_json::json!({"content": t, "carrier": null, "attributes": null}))
                .collect::<Vec<_>>(),
            "language": "EN",
        })
    }

    #[test]
    fn parse_corpus_happy_path() {
        let json = serde_json::json!([
            record_json("a", "a board 'Hot Soup' and a tag 'Cold Brew'", &["Hot Soup", "Cold Brew"]),
            record_json("b", "a cap 'Go' beside a bag 'Run Far'", &["Go", "Run Far"]),
        ]);
        let corpus = parse_corpus(&json.to_string()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].region_count(), 2);
    }

    #[test]
    fn parse_corpus_rejects_target_mismatch() {
        // The stored list omits the second quoted span (also a bad count).
        let json = serde_json::json!([record_json(
            "bad-1",
            "a board 'Hot Soup' and a tag 'Cold Brew'",
            &["Hot Soup"]
        )]);
        match parse_corpus(&json.to_string()) {
            Err(CorpusError::Schema { record_id, .. }) => assert_eq!(record_id, "bad-1"),
            Err(CorpusError::TargetMismatch { record_id, .. }) => assert_eq!(record_id, "bad-1"),
            other => panic!("expected rejection, got {other:?}"),
        }

        // Right count, wrong order: must name the record and both lists.
        let json = serde_json::json!([record_json(
            "bad-2",
            "a board 'Hot Soup' and a tag 'Cold Brew'",
            &["Cold Brew", "Hot Soup"]
        )]);
        match parse_corpus(&json.to_string()) {
            Err(CorpusError::TargetMismatch {
                record_id,
                stored,
                extracted,
            }) => {
                assert_eq!(record_id, "bad-2");
                assert_eq!(stored, vec!["Cold Brew", "Hot Soup"]);
                assert_eq!(extracted, vec!["Hot Soup", "Cold Brew"]);
            }
            other => panic!("expected target mismatch, got {other:?}"),
        }
    }

    #[test]
    fn parse_corpus_accepts_empty_array() {
        assert!(parse_corpus("[]").unwrap().is_empty());
    }

    #[test]
    fn parse_corpus_rejects_bad_attribute_enum_naming_record() {
        let json = r#"[{
            "id": "x", "language": "EN",
            "prompt": "a sign 'A B' and a cup 'C'",
            "targets": [
                {"content": "A B", "attributes": {"size": "enormous"}},
                {"content": "C"}
            ]
        }]"#;
        match parse_corpus(json) {
            Err(CorpusError::Malformed { record_id, message }) => {
                assert_eq!(record_id, "x");
                assert!(message.contains("enormous"), "message: {message}");
            }
            other => panic!("expected malformed-record error, got {other:?}"),
        }
    }

    #[test]
    fn parse_corpus_rejects_duplicate_ids() {
        let json = serde_json::json!([
            record_json("dup", "a board 'Hot Soup' and a tag 'Cold Brew'", &["Hot Soup", "Cold Brew"]),
            record_json("dup", "a cap 'Go' beside a bag 'Run Far'", &["Go", "Run Far"]),
        ]);
        assert!(matches!(
            parse_corpus(&json.to_string()),
            Err(CorpusError::Schema { field, .. }) if field == "id"
        ));
    }

    fn make_record(id: &str, contents: &[&str]) -> PromptRecord {
        PromptRecord {
            id: id.into(),
            prompt: String::new(), // not revalidated by corpus_stats
            targets: contents
                .iter()
                .map(|c| VisualTextTarget {
                    content: (*c).into(),
                    carrier: None,
                    attributes: None,
                })
                .collect(),
            language: Language::EN,
        }
    }

    #[test]
    fn stats_counts_join_convention() {
        let stats = corpus_stats(&[make_record("r", &["ab", "cd"])]).unwrap();
        assert_eq!(stats.num_prompts, 1);
        assert_eq!(stats.avg_words, 2.0);
        assert_eq!(stats.avg_chars, 5.0); // "ab cd"
        assert_eq!(stats.region_histogram[&2], 1.0);
        assert_eq!(stats.attributed_fraction, 0.0);
    }

    #[test]
    fn stats_histogram_point_mass_for_identical_records() {
        let corpus: Vec<PromptRecord> = (0..4)
            .map(|i| make_record(&format!("r{i}"), &["one two", "three", "four"]))
            .collect();
        let stats = corpus_stats(&corpus).unwrap();
        assert_eq!(stats.region_histogram.len(), 1);
        assert_eq!(stats.region_histogram[&3], 1.0);
        assert_eq!(stats.avg_words, 4.0);
    }

    #[test]
    fn stats_are_permutation_invariant() {
        let mut corpus = vec![
            make_record("a", &["x", "yy zz"]),
            make_record("b", &["longer text", "here", "third one"]),
            make_record("c", &["1", "2", "3", "4", "5"]),
        ];
        let forward = corpus_stats(&corpus).unwrap();
        corpus.reverse();
        let backward = corpus_stats(&corpus).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn stats_reject_empty_corpus() {
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn histogram_fractions_sum_to_one() {
        let corpus = vec![
            make_record("a", &["x", "y"]),
            make_record("b", &["x", "y", "z"]),
            make_record("c", &["x", "y", "z"]),
            make_record("d", &["x", "y", "z", "w", "v"]),
        ];
        let stats = corpus_stats(&corpus).unwrap();
        let sum: f64 = stats.region_histogram.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}
