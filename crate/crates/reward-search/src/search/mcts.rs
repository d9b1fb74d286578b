//! Monte Carlo tree search with UCT selection, batched expansion, policy
//! rollouts, and terminal-score backpropagation.

use crate::core::Trace;
use crate::seed;

use super::recorder::{Recorder, TrackedPath};
use super::{Environment, SearchError, SearchOutcome};

/// Statistics for one tree node.
struct TreeNode {
    path: TrackedPath,
    children: Option<Vec<usize>>, // indices into the arena; None until expanded
    visits: u64,
    value_sum: f64,
}

/// One iteration's bookkeeping: the tree path that was backpropagated (arena
/// indices root-first) and the terminal score it carried.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub tree_path_ids: Vec<u64>,
    pub terminal_score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MctsTrace {
    pub iterations: Vec<IterationRecord>,
    /// `(node id, visits, value_sum)` for every tree node at the end.
    pub node_stats: Vec<(u64, u64, f64)>,
}

pub fn mcts(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    iterations: usize,
    c_explore: f64,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    mcts_traced(env, prompt, k, iterations, c_explore, max_depth, seed).map(|(o, _)| o)
}

/// UCT score: mean value plus `c * sqrt(ln(parent visits) / child visits)`.
/// Unvisited children rank first, ties by child index.
fn uct_pick(arena: &[TreeNode], children: &[usize], parent_visits: u64, c: f64) -> usize {
    for &ci in children {
        if arena[ci].visits == 0 {
            return ci;
        }
    }
    let mut best = children[0];
    let mut best_score = f64::NEG_INFINITY;
    for &ci in children {
        let node = &arena[ci];
        let mean = node.value_sum / node.visits as f64;
        let score = mean + c * ((parent_visits as f64).ln() / node.visits as f64).sqrt();
        if score > best_score {
            best = ci;
            best_score = score;
        }
    }
    best
}

/// Four phases per iteration: select a leaf by UCT, expand it with `k`
/// scored children, roll out single actions to a terminal state, and add the
/// terminal's reward score to every tree node on the path while bumping
/// visit counts. The selected trace is the highest-scoring rollout terminal.
pub fn mcts_traced(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    iterations: usize,
    c_explore: f64,
    max_depth: usize,
    base_seed: u64,
) -> Result<(SearchOutcome, MctsTrace), SearchError> {
    if k == 0 || iterations == 0 || c_explore < 0.0 {
        return Err(SearchError::InvalidArgument(
            "mcts requires k >= 1, iterations >= 1, c_explore >= 0".into(),
        ));
    }
    let mut rec = Recorder::new(env, max_depth);
    let root = rec.root(prompt);
    let mut arena: Vec<TreeNode> = vec![TreeNode {
        path: TrackedPath::root(root),
        children: None,
        visits: 0,
        value_sum: 0.0,
    }];
    let mut log = MctsTrace::default();
    // (terminal path, terminal score), in discovery order.
    let mut endpoints: Vec<(TrackedPath, f64)> = Vec::new();

    for iter in 0..iterations {
        // Select: descend by UCT until an unexpanded or terminal node.
        let mut idx = 0usize;
        let mut tree_path = vec![0usize];
        loop {
            let node = &arena[idx];
            if node.path.leaf.node.is_terminal() {
                break;
            }
            match &node.children {
                Some(children) if !children.is_empty() => {
                    idx = uct_pick(&arena, children, node.visits.max(1), c_explore);
                    tree_path.push(idx);
                }
                _ => break,
            }
        }

        // Expand: attach k scored children to a non-terminal leaf and step
        // into the first new child.
        let rollout_from = if arena[idx].path.leaf.node.is_terminal() {
            idx
        } else {
            let expand_seed = seed::mix(base_seed, iter as u64, arena[idx].path.leaf.id);
            let parent_path = arena[idx].path.clone();
            let children = rec.expand(&parent_path.leaf, k, expand_seed)?;
            let mut child_indices = Vec::with_capacity(children.len());
            for child in children {
                let child_path = parent_path.child(child);
                child_indices.push(arena.len());
                arena.push(TreeNode {
                    path: child_path,
                    children: None,
                    visits: 0,
                    value_sum: 0.0,
                });
            }
            if child_indices.is_empty() {
                return Err(SearchError::InvalidArgument(
                    "policy returned no actions during expansion".into(),
                ));
            }
            arena[idx].children = Some(child_indices.clone());
            let first = child_indices[0];
            tree_path.push(first);
            first
        };

        // Rollout: single actions to a terminal state.
        let mut rollout = arena[rollout_from].path.clone();
        let mut rollout_step = 0u64;
        while !rollout.leaf.node.is_terminal() {
            let step_seed = seed::mix(base_seed, (iter as u64) << 20 | rollout_step, u64::MAX);
            let children = rec.expand(&rollout.leaf, 1, step_seed)?;
            let child = children.into_iter().next().ok_or_else(|| {
                SearchError::InvalidArgument("policy returned no actions during rollout".into())
            })?;
            rollout = rollout.child(child);
            rollout_step += 1;
        }
        let terminal_score = match rollout.step_scores.last() {
            Some(&s) => s,
            None => rec.score(&rollout.leaf.node)?, // terminal root edge case
        };
        endpoints.push((rollout.clone(), terminal_score));

        // Backpropagate along the tree path.
        for &ti in &tree_path {
            arena[ti].visits += 1;
            arena[ti].value_sum += terminal_score;
        }
        log.iterations.push(IterationRecord {
            tree_path_ids: tree_path.iter().map(|&ti| arena[ti].path.leaf.id).collect(),
            terminal_score,
        });
    }

    // Highest terminal score among rollout endpoints, earliest on ties.
    let best = endpoints
        .iter()
        .enumerate()
        .max_by(|(ia, (_, sa)), (ib, (_, sb))| {
            sa.partial_cmp(sb)
                .expect("scores are finite")
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("iterations >= 1 produced at least one endpoint");

    let all_candidates: Vec<Trace> = endpoints
        .iter()
        .map(|(p, _)| p.trace(max_depth))
        .collect();
    let selected = all_candidates[best].clone();
    let usage = rec.finish(&selected);
    log.node_stats = arena
        .iter()
        .map(|n| (n.path.leaf.id, n.visits, n.value_sum))
        .collect();
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
