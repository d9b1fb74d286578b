//! Greedy best-first search: always expand the frontier state with the
//! highest heuristic value, plain `f(s)` or depth-aware `f(s) * (M - d(s))`.

use std::collections::BinaryHeap;

use crate::core::Trace;
use crate::seed;

use super::recorder::{Recorder, TrackedPath};
use super::{Environment, SearchError, SearchOutcome};

/// One frontier event, for replaying pop order through an independent
/// priority structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrontierEvent {
    Push { id: u64, h: f64 },
    Pop { id: u64, h: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct GbfsTrace {
    pub events: Vec<FrontierEvent>,
}

struct Entry {
    h: f64,
    seq: u64,
    path: TrackedPath,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.h == other.h && self.seq == other.seq
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on h; earliest insertion wins ties.
        self.h
            .partial_cmp(&other.h)
            .expect("heuristic values are finite")
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn gbfs(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    depth_aware: bool,
    max_depth: usize,
    node_budget: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    gbfs_traced(env, prompt, k, depth_aware, max_depth, node_budget, seed).map(|(o, _)| o)
}

/// Depth-aware heuristic `f(s) * (M - d(s))`; plain heuristic is `f(s)`.
fn heuristic(score: f64, depth: usize, max_depth: usize, depth_aware: bool) -> f64 {
    if depth_aware {
        score * (max_depth.saturating_sub(depth)) as f64
    } else {
        score
    }
}

/// Best-first search with a frontier of unexpanded states.
///
/// Repeatedly pops the frontier argmax; a popped terminal ends the search as
/// the selected trace. Otherwise the node is expanded with `k` sampled
/// children (scored and pushed) until `node_budget` expansions have been
/// spent. On exhaustion the selection falls back to the highest-h terminal
/// seen, then to the highest-h node overall (ungradeable).
pub fn gbfs_traced(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    depth_aware: bool,
    max_depth: usize,
    node_budget: usize,
    base_seed: u64,
) -> Result<(SearchOutcome, GbfsTrace), SearchError> {
    if k == 0 || max_depth == 0 {
        return Err(SearchError::InvalidArgument(
            "gbfs requires k >= 1 and max_depth >= 1".into(),
        ));
    }
    let mut rec = Recorder::new(env, max_depth);
    let mut log = GbfsTrace::default();
    let root = rec.root(prompt);
    let root_score = rec.score(&root.node)?;
    let mut frontier = BinaryHeap::new();
    let mut seq = 0u64;
    let h_root = heuristic(root_score, 0, max_depth, depth_aware);
    log.events.push(FrontierEvent::Push {
        id: root.id,
        h: h_root,
    });
    frontier.push(Entry {
        h: h_root,
        seq,
        path: TrackedPath::root(root),
    });

    // All terminal traces reached, in creation order, with their h values.
    let mut terminals: Vec<(TrackedPath, f64)> = Vec::new();
    let mut best_overall: Option<(TrackedPath, f64)> = None;
    let mut expansions = 0usize;

    while let Some(entry) = frontier.pop() {
        log.events.push(FrontierEvent::Pop {
            id: entry.path.leaf.id,
            h: entry.h,
        });
        if entry.path.leaf.node.is_terminal() {
            let selected = entry.path.trace(max_depth);
            let usage = rec.finish(&selected);
            return Ok((
                SearchOutcome {
                    selected,
                    all_candidates: terminals
                        .iter()
                        .map(|(p, _)| p.trace(max_depth))
                        .collect(),
                    usage,
                    tree_edges: rec.edges,
                },
                log,
            ));
        }
        if expansions >= node_budget {
            break;
        }
        expansions += 1;
        let step_seed = seed::mix(base_seed, entry.path.leaf.id, 0);
        for child in rec.expand(&entry.path.leaf, k, step_seed)? {
            let child_path = entry.path.child(child);
            let score = *child_path.step_scores.last().expect("scored at creation");
            let h = heuristic(score, child_path.leaf.node.depth(), max_depth, depth_aware);
            if child_path.leaf.node.is_terminal() {
                terminals.push((child_path.clone(), h));
            }
            if best_overall.as_ref().is_none_or(|(_, bh)| h > *bh) {
                best_overall = Some((child_path.clone(), h));
            }
            seq += 1;
            log.events.push(FrontierEvent::Push {
                id: child_path.leaf.id,
                h,
            });
            frontier.push(Entry {
                h,
                seq,
                path: child_path,
            });
        }
    }

    // Budget exhausted (or frontier drained): highest-h terminal seen, else
    // the best node overall.
    let all_candidates: Vec<Trace> = terminals.iter().map(|(p, _)| p.trace(max_depth)).collect();
    let fallback = terminals
        .iter()
        .enumerate()
        .max_by(|(ia, (_, ha)), (ib, (_, hb))| {
            ha.partial_cmp(hb)
                .expect("finite heuristics")
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| terminals[i].0.clone())
        .or_else(|| best_overall.map(|(p, _)| p));
    let selected = match fallback {
        Some(path) => path.trace(max_depth),
        None => {
            return Err(SearchError::InvalidArgument(
                "gbfs produced no nodes; the policy returned nothing for the root".into(),
            ))
        }
    };
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_aware_heuristic_formula() {
        assert_eq!(heuristic(0.5, 10, 40, true), 15.0);
        assert_eq!(heuristic(0.5, 10, 40, false), 0.5);
        assert_eq!(heuristic(0.7, 40, 40, true), 0.0);
    }
}
