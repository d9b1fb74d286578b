//! The result of one search run and its persisted JSON shape.

use serde::{Deserialize, Serialize};

use crate::core::{Trace, TraceRecord, UsageCounters};

/// Everything one search run produced: the selected trace, every
/// root-to-terminal trace reached along committed paths, usage counters, and
/// the explored tree's edges in node-creation order (node 0 is the root).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub selected: Trace,
    pub all_candidates: Vec<Trace>,
    pub usage: UsageCounters,
    pub tree_edges: Vec<(u64, u64)>,
}

impl SearchOutcome {
    /// The persisted form, keyed by the run cell it came from.
    pub fn to_record(&self, method: &str, problem_id: &str, seed: u64) -> OutcomeRecord {
        OutcomeRecord {
            method: method.to_string(),
            problem_id: problem_id.to_string(),
            seed,
            selected: TraceRecord::from_trace(&self.selected),
            all_candidates: self
                .all_candidates
                .iter()
                .map(TraceRecord::from_trace)
                .collect(),
            usage: self.usage,
            tree_edges: self.tree_edges.clone(),
        }
    }
}

/// JSON document written per run cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub method: String,
    pub problem_id: String,
    pub seed: u64,
    pub selected: TraceRecord,
    pub all_candidates: Vec<TraceRecord>,
    pub usage: UsageCounters,
    pub tree_edges: Vec<(u64, u64)>,
}
