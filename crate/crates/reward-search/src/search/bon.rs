//! Best-of-N sampling: independent root-to-terminal chains with no shared
//! intermediate state, selected by an aggregated score, majority vote, or
//! kept whole for pass-style evaluation.

use std::collections::BTreeMap;

use crate::core::{normalize_answer, Trace};
use crate::seed;

use super::recorder::{Recorder, TrackedPath};
use super::{best_of_n, Aggregator, Environment, SearchError, SearchOutcome};

/// How the runner picks `selected` from the sampled candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    Aggregated(Aggregator),
    MajorityVote,
    /// Evaluation-time rule (any-correct); the runner stores the first
    /// candidate and the analyzer scores the full set.
    FirstCandidate,
}

/// Samples `n` independent traces from the policy. Each chain extends one
/// action at a time until terminal; per-trace seeds derive as `seed ^ index`
/// and per-step scores come from the reward oracle on every prefix.
pub fn sample_candidates(
    env: &dyn Environment,
    prompt: &str,
    n: usize,
    max_depth: usize,
    seed: u64,
) -> Result<Vec<Trace>, SearchError> {
    let mut rec = Recorder::new(env, max_depth);
    let traces = sample_candidates_into(&mut rec, prompt, n, seed)?;
    Ok(traces.into_iter().map(|p| p.trace(max_depth)).collect())
}

fn sample_candidates_into(
    rec: &mut Recorder,
    prompt: &str,
    n: usize,
    base_seed: u64,
) -> Result<Vec<TrackedPath>, SearchError> {
    if n == 0 {
        return Err(SearchError::InvalidArgument(
            "best-of-n requires n >= 1".into(),
        ));
    }
    let root = rec.root(prompt);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let trace_seed = base_seed ^ (i as u64);
        let mut path = TrackedPath::root(root.clone());
        while !path.leaf.node.is_terminal() {
            let depth = path.leaf.node.depth() as u64;
            let children = rec.expand(&path.leaf, 1, seed::mix(trace_seed, depth, 0))?;
            let child = children.into_iter().next().ok_or_else(|| {
                SearchError::InvalidArgument("policy returned no actions".into())
            })?;
            path = path.child(child);
        }
        paths.push(path);
    }
    Ok(paths)
}

/// The most frequent non-absent prediction after grading normalization; ties
/// break to the earliest first occurrence.
pub fn majority_vote(candidates: &[Trace]) -> Option<String> {
    majority_prediction(candidates.iter().map(|t| t.prediction()))
}

/// Majority vote over raw prediction options; the search and the analyzer
/// share this so stored candidates grade identically to live runs.
pub fn majority_prediction<'a>(
    predictions: impl IntoIterator<Item = Option<&'a str>>,
) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut firsts: Vec<(usize, String)> = Vec::new(); // (first index, raw text)
    for (i, pred) in predictions.into_iter().enumerate() {
        let Some(pred) = pred else {
            continue;
        };
        let key = normalize_answer(pred);
        if !counts.contains_key(&key) {
            firsts.push((i, pred.to_string()));
        }
        *counts.entry(key).or_insert(0) += 1;
    }
    let (_, winner) = firsts
        .iter()
        .map(|(first, pred)| {
            let count = counts[&normalize_answer(pred)];
            ((count, std::cmp::Reverse(*first)), pred.clone())
        })
        .max_by(|a, b| a.0.cmp(&b.0))?;
    Some(winner)
}

/// Full best-of-N run: samples `n` candidates and selects per `rule`.
pub fn run_best_of_n(
    env: &dyn Environment,
    prompt: &str,
    n: usize,
    rule: SelectionRule,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    let mut rec = Recorder::new(env, max_depth);
    let paths = sample_candidates_into(&mut rec, prompt, n, seed)?;
    let candidates: Vec<Trace> = paths.iter().map(|p| p.trace(max_depth)).collect();
    let selected_idx = match rule {
        SelectionRule::Aggregated(psi) => best_of_n(&candidates, psi)?,
        SelectionRule::MajorityVote => match majority_vote(&candidates) {
            Some(winner) => candidates
                .iter()
                .position(|t| {
                    t.prediction()
                        .is_some_and(|p| normalize_answer(p) == normalize_answer(&winner))
                })
                .expect("majority winner came from the candidates"),
            None => 0,
        },
        SelectionRule::FirstCandidate => 0,
    };
    let selected = candidates[selected_idx].clone();
    let usage = rec.finish(&selected);
    Ok(SearchOutcome {
        selected,
        all_candidates: candidates,
        usage,
        tree_edges: rec.edges,
    })
}

/// Pass-style run: identical sampling to best-of-N; selection is the first
/// candidate because correctness is judged over the whole set downstream.
pub fn run_pass_set(
    env: &dyn Environment,
    prompt: &str,
    n: usize,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    run_best_of_n(env, prompt, n, SelectionRule::FirstCandidate, max_depth, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{concat_state, ReasoningStep, SearchNode};

    fn trace_with_prediction(pred: Option<&str>) -> Trace {
        let root = SearchNode::root("p", 50);
        let text = match pred {
            Some(p) => format!("step \\boxed{{{p}}}"),
            None => "step".to_string(),
        };
        let mut leaf = concat_state(&root, ReasoningStep::new(text, 1).unwrap(), 50).unwrap();
        if pred.is_none() {
            leaf = concat_state(&leaf, ReasoningStep::end_of_text(), 50).unwrap();
            return Trace::from_leaf(&leaf, vec![0.5, 0.5], 50);
        }
        Trace::from_leaf(&leaf, vec![0.5], 50)
    }

    #[test]
    fn majority_vote_strict_majority() {
        let traces = vec![
            trace_with_prediction(Some("2")),
            trace_with_prediction(Some("3")),
            trace_with_prediction(Some("2")),
        ];
        assert_eq!(majority_vote(&traces), Some("2".to_string()));
    }

    #[test]
    fn majority_vote_tie_breaks_to_first_occurrence() {
        let traces = vec![
            trace_with_prediction(Some("2")),
            trace_with_prediction(Some("3")),
        ];
        assert_eq!(majority_vote(&traces), Some("2".to_string()));
    }

    #[test]
    fn majority_vote_ignores_absent_predictions() {
        let traces = vec![trace_with_prediction(None), trace_with_prediction(None)];
        assert_eq!(majority_vote(&traces), None);

        let traces = vec![
            trace_with_prediction(None),
            trace_with_prediction(Some("7")),
        ];
        assert_eq!(majority_vote(&traces), Some("7".to_string()));
    }

    #[test]
    fn majority_vote_normalizes_before_counting() {
        let traces = vec![
            trace_with_prediction(Some(" 5 ")),
            trace_with_prediction(Some("$5$")),
            trace_with_prediction(Some("8")),
        ];
        assert_eq!(
            majority_vote(&traces).map(|p| normalize_answer(&p)),
            Some("5".to_string())
        );
    }
}
