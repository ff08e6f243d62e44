//! NLC2CMD accuracy: per-utility flag score, aligned utility score and the
//! confidence-weighted dataset aggregate.

mod files;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::bash_ast::{parse, BashAst};

pub use files::{
    read_predictions, read_references, score_files, Candidate, FileError, PredictionRecord, ReferenceRecord,
    ScoreReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no candidates to score")]
    NoCandidates,
    #[error("confidence {0} is outside [0, 1]")]
    BadConfidence(f64),
    #[error("cannot aggregate an empty set of pairs")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlagScore {
    /// Clamped to [-1, 1].
    pub value: f64,
    /// As computed, which can reach -2 for disjoint sets of unequal size.
    pub raw: f64,
}

/// `(2|P ∩ R| - |P ∪ R|) / max(|P|, |R|)`, with two empty sets scoring 1.
pub fn flag_score<S: Ord>(pred: &BTreeSet<S>, reference: &BTreeSet<S>) -> FlagScore {
    let n = pred.len().max(reference.len());
    if n == 0 {
        return FlagScore { value: 1.0, raw: 1.0 };
    }
    let inter = pred.intersection(reference).count() as f64;
    let union = pred.union(reference).count() as f64;
    let raw = (2.0 * inter - union) / n as f64;
    FlagScore {
        value: raw.clamp(-1.0, 1.0),
        raw,
    }
}

fn stage_flags(ast: &BashAst, i: usize) -> BTreeSet<&str> {
    ast.stages[i].flag_tokens().collect()
}

/// Stages are aligned by position; a missing stage on either side is a
/// mismatch. Each of the `T = max(stages)` positions contributes `1/T`
/// weighted by `(1 + S_F) / 2` on a utility match, or `-1/T` otherwise.
pub fn utility_score(pred: &BashAst, reference: &BashAst) -> f64 {
    let t = pred.stages.len().max(reference.stages.len());
    if t == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for i in 0..t {
        let term = match (pred.stages.get(i), reference.stages.get(i)) {
            (Some(p), Some(r)) if p.name == r.name => {
                0.5 * (1.0 + flag_score(&stage_flags(pred, i), &stage_flags(reference, i)).value)
            }
            _ => -1.0,
        };
        total += term / t as f64;
    }
    total.clamp(-1.0, 1.0)
}

/// Like [`utility_score`] but from text; an unparseable prediction scores -1.
pub fn score_command(pred: &str, reference: &BashAst) -> f64 {
    parse(pred).map_or(-1.0, |p| utility_score(&p, reference))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub per_candidate: Vec<f64>,
    pub confidences: Vec<f64>,
    pub final_score: f64,
}

/// Combine candidate scores: the best `confidence * S_U` when it is positive,
/// otherwise the confidence-weighted mean.
pub fn combine(scored: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if scored.is_empty() {
        return Err(MetricsError::NoCandidates);
    }
    if let Some(&(_, c)) = scored.iter().find(|(_, c)| !(0.0..=1.0).contains(c)) {
        return Err(MetricsError::BadConfidence(c));
    }
    let best = scored.iter().map(|(s, c)| s * c).fold(f64::NEG_INFINITY, f64::max);
    if best > 0.0 {
        return Ok(best);
    }
    let weight: f64 = scored.iter().map(|(_, c)| c).sum();
    Ok(if weight > 0.0 {
        scored.iter().map(|(s, c)| s * c).sum::<f64>() / weight
    } else {
        scored.iter().map(|(s, _)| s).sum::<f64>() / scored.len() as f64
    })
}

pub fn pair_score(reference: &BashAst, candidates: &[(BashAst, f64)]) -> Result<ScoredPair, MetricsError> {
    let scored: Vec<(f64, f64)> = candidates.iter().map(|(p, c)| (utility_score(p, reference), *c)).collect();
    let final_score = combine(&scored)?;
    Ok(ScoredPair {
        per_candidate: scored.iter().map(|(s, _)| *s).collect(),
        confidences: scored.iter().map(|(_, c)| *c).collect(),
        final_score,
    })
}

/// Mean final score as a percentage in [-100, 100].
pub fn dataset_accuracy(finals: &[f64]) -> Result<f64, MetricsError> {
    if finals.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * finals.iter().sum::<f64>() / finals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&'static str]) -> BTreeSet<&'static str> {
        items.iter().copied().collect()
    }

    fn us(p: &str, r: &str) -> f64 {
        utility_score(&parse(p).unwrap(), &parse(r).unwrap())
    }

    #[test]
    fn flag_score_examples() {
        assert_eq!(flag_score(&set(&["-name", "-type"]), &set(&["-name", "-type"])).value, 1.0);
        assert_eq!(flag_score(&set(&["-name"]), &set(&["-name", "-type"])).value, 0.0);
        let disjoint = flag_score(&set(&["-a"]), &set(&["-b"]));
        assert_eq!((disjoint.value, disjoint.raw), (-1.0, -2.0));
        assert_eq!(flag_score(&set(&[]), &set(&[])).value, 1.0);
    }

    #[test]
    fn utility_score_examples() {
        assert_eq!(us("grep -w foo bar", "grep -w foo bar"), 1.0);
        assert_eq!(us("ls", "find"), -1.0);
        assert_eq!(us("find -name x | sort", "find -name x | wc"), 0.0);
        // One extra stage on the prediction side: (1/2)(1) - 1/2.
        assert_eq!(us("ls | wc", "ls"), 0.0);
        // Flags are compared as sets; parameters are ignored.
        assert_eq!(us("ls -a -l x", "ls -l -a y"), 1.0);
    }

    #[test]
    fn pair_score_policy() {
        let r = parse("ls").unwrap();
        let one = pair_score(&r, &[(parse("ls").unwrap(), 1.0)]).unwrap();
        assert_eq!(one.final_score, 1.0);
        assert_eq!(combine(&[(0.4, 1.0)]).unwrap(), 0.4);
        assert_eq!(combine(&[(1.0, 0.5), (-1.0, 1.0)]).unwrap(), 0.5);
        assert_eq!(combine(&[(-1.0, 0.5), (0.0, 1.0)]).unwrap(), -0.5 / 1.5);
        assert_eq!(combine(&[(-1.0, 0.0), (0.0, 0.0)]).unwrap(), -0.5);
        assert_eq!(pair_score(&r, &[]), Err(MetricsError::NoCandidates));
        assert_eq!(combine(&[(1.0, 1.5)]), Err(MetricsError::BadConfidence(1.5)));
    }

    #[test]
    fn dataset_accuracy_is_mean_percent() {
        assert_eq!(dataset_accuracy(&[1.0, 1.0]).unwrap(), 100.0);
        assert_eq!(dataset_accuracy(&[1.0, 0.0, -1.0]).unwrap(), 0.0);
        assert_eq!(dataset_accuracy(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn unparseable_prediction_scores_minus_one() {
        assert_eq!(score_command("ls &&", &parse("ls").unwrap()), -1.0);
    }
}
