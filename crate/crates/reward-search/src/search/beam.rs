//! Beam search over sampled continuations, ranking children by their
//! instantaneous reward score or by the cumulative score along the path.
//! With beam width 1 this is greedy search.

use serde::Serialize;

use crate::core::Trace;
use crate::seed;

use super::recorder::{Recorder, TrackedPath};
use super::{Environment, SearchError, SearchOutcome};

/// Child ranking: the child's own reward score, or the sum of step scores
/// along its root path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamMode {
    Instantaneous,
    Cumulative,
}

/// Beam contents after one expansion level, for replay checks.
#[derive(Debug, Clone)]
pub struct BeamLevel {
    pub depth: usize,
    /// `(node id, ranking value)` of the states kept in the beam.
    pub kept: Vec<(u64, f64)>,
    /// `(node id, ranking value)` of terminal states collected this level.
    pub collected: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct BeamTrace {
    pub levels: Vec<BeamLevel>,
}

pub fn beam_search(
    env: &dyn Environment,
    prompt: &str,
    n: usize,
    k: usize,
    mode: BeamMode,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    beam_search_traced(env, prompt, n, k, mode, max_depth, seed).map(|(o, _)| o)
}

/// Greedy search: beam search with width 1 ranking by instantaneous score.
/// Same code path, so the reduction is exact.
pub fn greedy(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    beam_search(env, prompt, 1, k, BeamMode::Instantaneous, max_depth, seed)
}

/// Beam search returning the per-level beam log alongside the outcome.
///
/// Each level expands every beam state with `k` sampled actions, ranks all
/// children jointly, and keeps the top `n` (ties by creation order).
/// Terminal states among the kept children leave the beam and are collected;
/// the search stops when the beam empties. The selected trace is the
/// collected trace with the highest ranking value, earliest first on ties.
pub fn beam_search_traced(
    env: &dyn Environment,
    prompt: &str,
    n: usize,
    k: usize,
    mode: BeamMode,
    max_depth: usize,
    base_seed: u64,
) -> Result<(SearchOutcome, BeamTrace), SearchError> {
    if n == 0 || k == 0 {
        return Err(SearchError::InvalidArgument(
            "beam search requires n >= 1 and k >= 1".into(),
        ));
    }
    let mut rec = Recorder::new(env, max_depth);
    let root = rec.root(prompt);
    let mut beam: Vec<TrackedPath> = vec![TrackedPath::root(root)];
    let mut collected: Vec<(TrackedPath, f64)> = Vec::new();
    let mut log = BeamTrace::default();
    let mut level = 0usize;

    while !beam.is_empty() {
        // Expand every beam state; children keep creation order for ties.
        let mut children: Vec<(TrackedPath, f64)> = Vec::new();
        for (j, path) in beam.iter().enumerate() {
            let step_seed = seed::mix(base_seed, level as u64, j as u64);
            for child in rec.expand(&path.leaf, k, step_seed)? {
                let child_path = path.child(child);
                let rank = match mode {
                    BeamMode::Instantaneous => *child_path
                        .step_scores
                        .last()
                        .expect("child has at least one step"),
                    BeamMode::Cumulative => child_path.step_scores.iter().sum(),
                };
                children.push((child_path, rank));
            }
        }
        if children.is_empty() {
            break;
        }
        // Stable rank: descending value, creation order on ties.
        let mut order: Vec<usize> = (0..children.len()).collect();
        order.sort_by(|&a, &b| {
            children[b].1
                .partial_cmp(&children[a].1)
                .expect("scores are finite")
                .then(a.cmp(&b))
        });

        let mut next_beam = Vec::with_capacity(n);
        let mut level_log = BeamLevel {
            depth: level + 1,
            kept: Vec::new(),
            collected: Vec::new(),
        };
        for &idx in order.iter().take(n) {
            let (path, rank) = &children[idx];
            if path.leaf.node.is_terminal() {
                level_log.collected.push((path.leaf.id, *rank));
                collected.push((path.clone(), *rank));
            } else {
                level_log.kept.push((path.leaf.id, *rank));
                next_beam.push(path.clone());
            }
        }
        log.levels.push(level_log);
        beam = next_beam;
        level += 1;
    }

    // Highest ranking value among collected terminals, earliest on ties.
    let best = collected
        .iter()
        .enumerate()
        .max_by(|(ia, (_, ra)), (ib, (_, rb))| {
            ra.partial_cmp(rb)
                .expect("scores are finite")
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .ok_or(SearchError::EmptyCandidates)?;

    let all_candidates: Vec<Trace> = collected
        .iter()
        .map(|(p, _)| p.trace(max_depth))
        .collect();
    let selected = all_candidates[best].clone();
    let usage = rec.finish(&selected);
    Ok((
        SearchOutcome {
            selected,
            all_candidates,
            usage,
            tree_edges: rec.edges,
        },
        log,
    ))
}
