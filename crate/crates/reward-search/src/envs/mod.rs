//! Concrete environments: seeded synthetic scenario trees, fully scripted
//! fixtures for exact oracles, and an HTTP adapter for real policy/reward
//! servers.

mod endpoint;
mod scripted;
mod synthetic;

pub use endpoint::{EndpointConfig, EndpointEnv, WireFormat};
pub use scripted::{make_scripted_env, scripted_from_entries, ScriptedEnv, ScriptedNode};
pub use synthetic::{make_synthetic_env, Scenario, ScenarioSpec, SyntheticEnv, SYNTHETIC_TRUTH};

use crate::core::SearchNode;
use crate::search::EnvError;

/// Parses the child-index path encoded in a node's step texts. Synthetic and
/// scripted steps all start with `s<index>`; anything else is foreign.
pub(crate) fn path_of(state: &SearchNode) -> Result<Vec<usize>, EnvError> {
    state
        .steps()
        .iter()
        .map(|step| {
            let text = step.text();
            let digits: &str = text
                .strip_prefix('s')
                .map(|rest| rest.split(|c: char| !c.is_ascii_digit()).next().unwrap_or(""))
                .unwrap_or("");
            digits
                .parse::<usize>()
                .map_err(|_| EnvError::ForeignState(format!("unparseable step `{text}`")))
        })
        .collect()
}
