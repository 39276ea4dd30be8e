//! Bottleneck-aware OCR reward.
//!
//! Per-target fuzzy scores are aggregated into a base reward that mixes the
//! mean with the worst instance, then decayed when the OCR output is much
//! longer than the requested text. The mean/min mix is the lower-bound
//! pressure against omission; the length decay is the upper-bound pressure
//! against over-generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching;
use crate::metrics::OcrOutput;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("scores list is empty")]
    EmptyScores,
    #[error("targets list is empty")]
    EmptyTargets,
    #[error("target length is zero")]
    ZeroTargetLength,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Tunables of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the worst instance in the base reward, in `[0, 1]`.
    pub lambda_bal: f64,
    /// Length-ratio tolerance before the noise decay kicks in, `>= 1`.
    pub delta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_bal: 0.3,
            delta: 1.5,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(0.0..=1.0).contains(&self.lambda_bal) || !self.lambda_bal.is_finite() {
            return Err(RewardError::InvalidConfig(format!(
                "lambda_bal must be in [0, 1], got {}",
                self.lambda_bal
            )));
        }
        if !(self.delta >= 1.0) || !self.delta.is_finite() {
            return Err(RewardError::InvalidConfig(format!(
                "delta must be >= 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Full provenance of one reward evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    /// Per-target fuzzy scores, in target order.
    pub scores: Vec<f64>,
    /// Mean/min aggregate of `scores`.
    pub r_base: f64,
    /// Characters (spaces excluded) in the normalized OCR stream.
    pub l_pred: usize,
    /// Characters (spaces excluded) across all normalized targets.
    pub l_target: usize,
    /// Length decay factor in `(0, 1]`.
    pub lambda_noise: f64,
    /// Final reward `lambda_noise * r_base`.
    pub r_ocr: f64,
    /// True when every target normalized to the empty string; the reward is
    /// pinned to 0 instead of failing so RL callers never crash.
    pub degenerate: bool,
}

/// Mixes mean and minimum instance scores:
/// `(1 - lambda_bal) * mean + lambda_bal * min`.
pub fn base_reward(scores: &[f64], lambda_bal: f64) -> Result<f64, RewardError> {
    if scores.is_empty() {
        return Err(RewardError::EmptyScores);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((1.0 - lambda_bal) * mean + lambda_bal * min)
}

/// Length decay: 1 while `l_pred / l_target <= delta`, then
/// `1 / (ratio - delta + 1)`. Continuous at the threshold and falling to 0
/// as the prediction grows without bound.
pub fn noise_penalty(l_pred: usize, l_target: usize, delta: f64) -> Result<f64, RewardError> {
    if l_target == 0 {
        return Err(RewardError::ZeroTargetLength);
    }
    let ratio = l_pred as f64 / l_target as f64;
    if ratio <= delta {
        Ok(1.0)
    } else {
        Ok(1.0 / (ratio - delta + 1.0))
    }
}

/// Evaluates the full reward for one (targets, OCR) pair.
pub fn ocr_reward<S: AsRef<str>>(
    targets: &[S],
    ocr: &OcrOutput,
    config: &RewardConfig,
) -> Result<RewardReport, RewardError> {
    config.validate()?;
    if targets.is_empty() {
        return Err(RewardError::EmptyTargets);
    }

    let instance = matching::instance_scores(targets, ocr);
    let scores: Vec<f64> = instance.iter().map(|s| s.score).collect();

    let l_target: usize = targets
        .iter()
        .map(|t| matching::normalize(t.as_ref()).char_count_no_spaces())
        .sum();
    let l_pred = matching::ocr_stream(ocr).char_count_no_spaces();

    if l_target == 0 {
        // Every target normalized to nothing; there is no length budget and
        // no matchable content.
        return Ok(RewardReport {
            scores,
            r_base: 0.0,
            l_pred,
            l_target: 0,
            lambda_noise: 1.0,
            r_ocr: 0.0,
            degenerate: true,
        });
    }

    let r_base = base_reward(&scores, config.lambda_bal)?;
    let lambda_noise = noise_penalty(l_pred, l_target, config.delta)?;
    Ok(RewardReport {
        scores,
        r_base,
        l_pred,
        l_target,
        lambda_noise,
        r_ocr: lambda_noise * r_base,
        degenerate: false,
    })
}
