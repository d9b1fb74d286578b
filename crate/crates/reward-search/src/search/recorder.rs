//! Bookkeeping shared by all search algorithms: node identifiers, tree
//! edges, and usage counters around every environment call.

use crate::core::{concat_state, ReasoningStep, SearchNode, Trace, UsageCounters};

use super::{EnvError, Environment, SearchError};

/// A node materialized during a run, tagged with its creation-order id.
#[derive(Debug, Clone)]
pub(crate) struct TrackedNode {
    pub id: u64,
    pub node: SearchNode,
}

/// Wraps the environment for one search run, counting every call and
/// recording parent/child edges in creation order.
pub(crate) struct Recorder<'e> {
    env: &'e dyn Environment,
    max_depth: usize,
    pub usage: UsageCounters,
    pub edges: Vec<(u64, u64)>,
    next_id: u64,
}

impl<'e> Recorder<'e> {
    pub fn new(env: &'e dyn Environment, max_depth: usize) -> Self {
        Self {
            env,
            max_depth,
            usage: UsageCounters::default(),
            edges: Vec::new(),
            next_id: 0,
        }
    }

    pub fn root(&mut self, prompt: &str) -> TrackedNode {
        debug_assert_eq!(self.next_id, 0, "one root per run");
        let node = SearchNode::root(prompt, self.max_depth);
        self.next_id = 1;
        TrackedNode { id: 0, node }
    }

    pub fn score(&mut self, state: &SearchNode) -> Result<f64, EnvError> {
        self.usage.reward_calls += 1;
        let score = self.env.score(state)?;
        if !(0.0..=1.0).contains(&score) || score.is_nan() {
            return Err(EnvError::ScoreOutOfRange(score));
        }
        Ok(score)
    }

    /// Samples up to `k` actions for `parent`, materializes and scores each
    /// child, and records the edges. Children arrive in sample order.
    pub fn expand(
        &mut self,
        parent: &TrackedNode,
        k: usize,
        seed: u64,
    ) -> Result<Vec<TrackedNode>, SearchError> {
        let steps = self.sample(parent, k, seed)?;
        let mut children = Vec::with_capacity(steps.len());
        for step in steps {
            children.push(self.attach(parent, step)?);
        }
        Ok(children)
    }

    /// Samples raw steps and charges the usage counters without attaching.
    pub fn sample(
        &mut self,
        parent: &TrackedNode,
        k: usize,
        seed: u64,
    ) -> Result<Vec<ReasoningStep>, SearchError> {
        let steps = self.env.sample_actions(&parent.node, k, seed)?;
        self.usage.policy_calls += steps.len() as u64;
        self.usage.steps_sampled += steps.len() as u64;
        self.usage.tokens_generated += steps.iter().map(|s| s.token_count()).sum::<u64>();
        Ok(steps)
    }

    /// Materializes one child from a sampled step, scores it, and records
    /// the edge.
    pub fn attach(
        &mut self,
        parent: &TrackedNode,
        step: ReasoningStep,
    ) -> Result<TrackedNode, SearchError> {
        let mut node = concat_state(&parent.node, step, self.max_depth)
            .map_err(|e| SearchError::InvalidArgument(e.to_string()))?;
        let score = self.score(&node)?;
        node.set_score(score);
        let id = self.next_id;
        self.next_id += 1;
        self.edges.push((parent.id, id));
        Ok(TrackedNode { id, node })
    }

    /// Finalizes usage for a chosen trace.
    pub fn finish(&mut self, selected: &Trace) -> UsageCounters {
        self.usage.tokens_in_solution = selected.token_count();
        self.usage.terminal_reached = selected.prediction().is_some();
        self.usage
    }
}

/// A scored root-to-leaf chain kept incrementally by descent-style
/// algorithms.
#[derive(Debug, Clone)]
pub(crate) struct TrackedPath {
    pub leaf: TrackedNode,
    pub step_scores: Vec<f64>,
}

impl TrackedPath {
    pub fn root(root: TrackedNode) -> Self {
        Self {
            leaf: root,
            step_scores: Vec::new(),
        }
    }

    pub fn child(&self, child: TrackedNode) -> Self {
        let mut step_scores = self.step_scores.clone();
        step_scores.push(child.node.score().expect("children are scored at creation"));
        Self {
            leaf: child,
            step_scores,
        }
    }

    pub fn trace(&self, max_depth: usize) -> Trace {
        Trace::from_leaf(&self.leaf.node, self.step_scores.clone(), max_depth)
    }
}
