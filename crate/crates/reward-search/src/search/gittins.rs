//! Adaptive action sampling by optimal stopping.
//!
//! At each state the policy is sampled in batches of `K`. After every batch
//! the surrogate posterior over this state's score distribution is refreshed
//! from all observations at the state, and the Gittins index `m*` (the
//! threshold where expected improvement equals the current sampling cost) is
//! compared against the best observed raw score `m`: sampling continues
//! while `m* > m` and budget remains, then the search commits to the
//! best-scoring child and descends.

use crate::seed;
use crate::surrogate::{gittins_index, posterior_update, NIGParams, ScoreSample};

use super::recorder::{Recorder, TrackedPath};
use super::{cost_at, CostSchedule, Environment, SearchError, SearchOutcome};

/// One batch decision at a state, for stopping-rule audits.
#[derive(Debug, Clone, Copy)]
pub struct BatchDecision {
    pub depth: usize,
    pub batch_index: usize,
    /// Best observed raw score at this state after the batch.
    pub observed_max: f64,
    /// Gittins index computed after the batch.
    pub index: f64,
    /// Global policy-sample count after the batch.
    pub samples_used: u64,
    /// Whether the rule stopped here (committed to a child).
    pub stopped: bool,
    /// Whether the budget forced the stop.
    pub budget_forced: bool,
}

#[derive(Debug, Clone, Default)]
pub struct GittinsTrace {
    pub decisions: Vec<BatchDecision>,
}

#[allow(clippy::too_many_arguments)]
pub fn gittins_search(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    schedule: &CostSchedule,
    prior: &NIGParams,
    epsilon: f64,
    max_depth: usize,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    gittins_search_traced(env, prompt, k, schedule, prior, epsilon, max_depth, seed)
        .map(|(o, _)| o)
}

/// Observation sets reset at every state: each node gets a fresh posterior.
/// The budget `B` counts policy samples across the whole run; a batch may
/// start whenever `samples < B`, so total policy calls stay at or below
/// `B + K`. On exhaustion the best trace observed so far (the committed
/// path) is returned.
#[allow(clippy::too_many_arguments)]
pub fn gittins_search_traced(
    env: &dyn Environment,
    prompt: &str,
    k: usize,
    schedule: &CostSchedule,
    prior: &NIGParams,
    epsilon: f64,
    max_depth: usize,
    base_seed: u64,
) -> Result<(SearchOutcome, GittinsTrace), SearchError> {
    if k == 0 {
        return Err(SearchError::InvalidArgument("gittins requires k >= 1".into()));
    }
    schedule.validate()?;
    if schedule.budget_b < k as u64 {
        return Err(SearchError::InvalidArgument(format!(
            "budget B = {} smaller than batch size K = {k}",
            schedule.budget_b
        )));
    }
    let budget = schedule.budget_b;
    let mut rec = Recorder::new(env, max_depth);
    let mut log = GittinsTrace::default();
    let root = rec.root(prompt);
    let mut path = TrackedPath::root(root);
    let mut samples_used: u64 = 0;

    loop {
        if path.leaf.node.is_terminal() {
            let selected = path.trace(max_depth);
            let usage = rec.finish(&selected);
            return Ok((
                SearchOutcome {
                    selected: selected.clone(),
                    all_candidates: vec![selected],
                    usage,
                    tree_edges: rec.edges,
                },
                log,
            ));
        }
        if samples_used >= budget {
            // Budget exhausted before this state could be sampled: the
            // committed path is the best trace observed so far.
            let selected = path.trace(max_depth);
            let usage = rec.finish(&selected);
            return Ok((
                SearchOutcome {
                    selected,
                    all_candidates: Vec::new(),
                    usage,
                    tree_edges: rec.edges,
                },
                log,
            ));
        }

        // Fresh observation set at this state.
        let depth = path.leaf.node.depth();
        let mut observations: Vec<(TrackedPath, ScoreSample)> = Vec::new();
        let mut batch_index = 0usize;
        loop {
            let step_seed = seed::mix(base_seed, depth as u64, batch_index as u64);
            let children = rec.expand(&path.leaf, k, step_seed)?;
            if children.is_empty() {
                return Err(SearchError::InvalidArgument(
                    "policy returned no actions".into(),
                ));
            }
            samples_used += children.len() as u64;
            for child in children {
                let raw = child.node.score().expect("children are scored at creation");
                let sample = ScoreSample::new(raw, epsilon)?;
                observations.push((path.child(child), sample));
            }

            let observed_max = observations
                .iter()
                .map(|(_, s)| s.raw)
                .fold(f64::NEG_INFINITY, f64::max);
            let logits: Vec<f64> = observations.iter().map(|(_, s)| s.logit).collect();
            let posterior = posterior_update(prior, &logits)?;
            let cost = cost_at(schedule, samples_used.min(budget))?;
            let index = gittins_index(&posterior, cost)?;

            let budget_left = samples_used < budget;
            let keep_sampling = index > observed_max && budget_left;
            log.decisions.push(BatchDecision {
                depth,
                batch_index,
                observed_max,
                index,
                samples_used,
                stopped: !keep_sampling,
                budget_forced: index > observed_max && !budget_left,
            });
            if !keep_sampling {
                break;
            }
            batch_index += 1;
        }

        // Commit to the argmax-score child; earliest observation on ties.
        let best = observations
            .iter()
            .enumerate()
            .max_by(|(ia, (_, sa)), (ib, (_, sb))| {
                sa.raw
                    .partial_cmp(&sb.raw)
                    .expect("scores are finite")
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .expect("at least one batch was sampled");
        path = observations.swap_remove(best).0;
    }
}
