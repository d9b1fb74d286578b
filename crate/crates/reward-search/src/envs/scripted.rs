//! Fully scripted trees: explicit per-path children and scores, read back
//! verbatim. The exact-oracle fixture for search-algorithm tests.

use std::collections::BTreeMap;

use crate::core::{ReasoningStep, SearchNode};
use crate::search::{EnvError, Environment};

use super::path_of;

/// One scripted state: its reward score and, for leaves, the answer the leaf
/// step boxes (`None` leaves a dead end that only terminates by depth
/// cutoff).
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedNode {
    pub score: f64,
    pub answer: Option<String>,
}

impl ScriptedNode {
    pub fn internal(score: f64) -> Self {
        Self {
            score,
            answer: None,
        }
    }

    pub fn leaf(score: f64, answer: &str) -> Self {
        Self {
            score,
            answer: Some(answer.to_string()),
        }
    }
}

/// Environment backed by an explicit path map. Children of a path are the
/// entries extending it by one index; child order is index order and
/// `sample_actions` ignores its seed entirely.
pub struct ScriptedEnv {
    nodes: BTreeMap<Vec<usize>, ScriptedNode>,
}

/// Builds a scripted environment. The map must describe a connected tree
/// rooted at the empty path.
pub fn make_scripted_env(
    nodes: BTreeMap<Vec<usize>, ScriptedNode>,
) -> Result<ScriptedEnv, EnvError> {
    if !nodes.contains_key(&Vec::new()) {
        return Err(EnvError::InvalidSpec(
            "scripted tree must contain the empty root path".into(),
        ));
    }
    for path in nodes.keys() {
        if !path.is_empty() {
            let parent = &path[..path.len() - 1];
            if !nodes.contains_key(parent) {
                return Err(EnvError::InvalidSpec(format!(
                    "path {path:?} has no parent entry"
                )));
            }
        }
    }
    Ok(ScriptedEnv { nodes })
}

impl ScriptedEnv {
    fn entry(&self, path: &[usize]) -> Result<&ScriptedNode, EnvError> {
        self.nodes
            .get(path)
            .ok_or_else(|| EnvError::ForeignState(format!("unknown scripted path {path:?}")))
    }

    fn children_of(&self, path: &[usize]) -> Vec<usize> {
        let mut indices: Vec<usize> = self
            .nodes
            .keys()
            .filter(|p| p.len() == path.len() + 1 && p.starts_with(path))
            .map(|p| *p.last().expect("non-empty child path"))
            .collect();
        indices.sort_unstable();
        indices
    }
}

impl Environment for ScriptedEnv {
    fn sample_actions(
        &self,
        state: &SearchNode,
        k: usize,
        _seed: u64,
    ) -> Result<Vec<ReasoningStep>, EnvError> {
        let path = path_of(state)?;
        self.entry(&path)?;
        let children = self.children_of(&path);
        Ok(children
            .into_iter()
            .take(k)
            .map(|i| {
                let mut child_path = path.clone();
                child_path.push(i);
                let node = &self.nodes[&child_path];
                let text = match &node.answer {
                    Some(ans) => format!("s{i} \\boxed{{{ans}}}"),
                    None => format!("s{i}"),
                };
                ReasoningStep::new(text, 1).expect("scripted step text is delimiter-free")
            })
            .collect())
    }

    fn score(&self, state: &SearchNode) -> Result<f64, EnvError> {
        let path = path_of(state)?;
        Ok(self.entry(&path)?.score)
    }
}

/// Convenience builder used across tests: entries as `(path, score, answer)`.
pub fn scripted_from_entries(
    entries: &[(&[usize], f64, Option<&str>)],
) -> Result<ScriptedEnv, EnvError> {
    let mut map = BTreeMap::new();
    for (path, score, answer) in entries {
        map.insert(
            path.to_vec(),
            ScriptedNode {
                score: *score,
                answer: answer.map(str::to_string),
            },
        );
    }
    make_scripted_env(map)
}
