//! Non-iterative aggregation: plain and weighted voting, per-label voting for
//! multi-answer questions, and exact-match accuracy.

use alloc::collections::{BTreeMap, BTreeSet};

use super::QualityError;
use crate::domain::{Label, QuestionId, WorkerId};

fn arg_max(tally: &BTreeMap<Label, f64>) -> Option<Label> {
    // BTreeMap iterates in ascending label order, so keeping the first strict
    // maximum resolves ties to the smallest label.
    let mut best: Option<(Label, f64)> = None;
    for (&label, &score) in tally {
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((label, score)),
        }
    }
    best.map(|(l, _)| l)
}

/// Most frequent label; ties go to the smallest label id.
pub fn majority_vote(labels: &[Label]) -> Result<Label, QualityError> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(Label, usize)> = None;
    for (&label, &n) in &counts {
        match best {
            Some((_, m)) if n <= m => {}
            _ => best = Some((label, n)),
        }
    }
    best.map(|(l, _)| l).ok_or(QualityError::NoAnswers)
}

/// Label with the largest summed worker weight; ties go to the smallest id.
pub fn weighted_majority(
    votes: &[(WorkerId, Label)],
    weights: &BTreeMap<WorkerId, f64>,
) -> Result<Label, QualityError> {
    if votes.is_empty() {
        return Err(QualityError::NoAnswers);
    }
    let mut tally: BTreeMap<Label, f64> = BTreeMap::new();
    for &(worker, label) in votes {
        let w = *weights.get(&worker).ok_or(QualityError::MissingWeight(worker))?;
        *tally.entry(label).or_default() += w;
    }
    Ok(arg_max(&tally).expect("non-empty tally"))
}

/// Labels chosen by at least a `threshold` fraction of the answers.
///
/// Only labels in `candidates` can be returned; the result may be empty.
pub fn multilabel_aggregate(
    answers: &[BTreeSet<Label>],
    candidates: &[Label],
    threshold: f64,
) -> Result<BTreeSet<Label>, QualityError> {
    let weighted: alloc::vec::Vec<(f64, &BTreeSet<Label>)> = answers.iter().map(|a| (1.0, a)).collect();
    weighted_multilabel_aggregate(&weighted, candidates, threshold)
}

/// [`multilabel_aggregate`] with per-answer weights.
pub fn weighted_multilabel_aggregate(
    answers: &[(f64, &BTreeSet<Label>)],
    candidates: &[Label],
    threshold: f64,
) -> Result<BTreeSet<Label>, QualityError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(QualityError::Threshold(threshold));
    }
    if answers.is_empty() {
        return Err(QualityError::NoAnswers);
    }
    let total: f64 = answers.iter().map(|(w, _)| *w).sum();
    let mut out = BTreeSet::new();
    for &label in candidates {
        let support: f64 = answers.iter().filter(|(_, set)| set.contains(&label)).map(|(w, _)| *w).sum();
        if support / total >= threshold {
            out.insert(label);
        }
    }
    Ok(out)
}

/// Fraction of questions whose estimated label set equals the true one.
pub fn accuracy(
    estimated: &BTreeMap<QuestionId, BTreeSet<Label>>,
    truth: &BTreeMap<QuestionId, BTreeSet<Label>>,
) -> Result<f64, QualityError> {
    if truth.is_empty() {
        return Err(QualityError::EmptyInput);
    }
    if estimated.len() != truth.len() || !estimated.keys().eq(truth.keys()) {
        return Err(QualityError::KeyMismatch);
    }
    let correct = estimated.iter().zip(truth.values()).filter(|((_, e), t)| e == t).count();
    Ok(correct as f64 / truth.len() as f64)
}
