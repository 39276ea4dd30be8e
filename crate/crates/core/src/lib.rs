//! Core library for evaluating complex visual text generation (CVTG) from
//! file-ingested artifacts: OCR transcripts, cross-attention maps, and prompt
//! corpora.
//!
//! The crate is organized around six subsystems:
//!
//! - [`corpus`] — CVTG-style prompt corpora: loading, validation, statistics.
//! - [`matching`] — text normalization, Levenshtein distance, and isolated
//!   sliding-window fuzzy scores per visual-text target.
//! - [`reward`] — the bottleneck-aware OCR reward: mean/min aggregation plus
//!   a length-based anti-hallucination decay.
//! - [`gate`] — attention maps and the quotation-guided gate pipeline
//!   (smoothing, primary peak retention, soft binarization, modulation).
//! - [`layout`] — exact solver for the non-overlapping bounding-box layout
//!   program (branch-and-bound over separation directions on an LP core).
//! - [`metrics`] — the evaluation suite: word accuracy, NED, span accuracy,
//!   recall, effective attention efficiency, ACR, CLIPScore aggregation,
//!   and micro/macro corpus-level rollups.
//!
//! Everything here is deterministic and operates on plain values; no neural
//! model is run by this crate. All operations are pure and safe to call from
//! multiple threads.

pub mod corpus;
pub mod gate;
pub mod layout;
pub mod matching;
pub mod metrics;
pub mod reward;
