//! Search algorithms over step-wise reasoning MDPs.
//!
//! All algorithms speak to an abstract [`Environment`] (policy sampling plus
//! reward scoring), account every policy and reward call, and are fully
//! deterministic given their seed. Each state transition a trace reports can
//! be replayed from the logged steps.

mod beam;
mod bon;
mod gbfs;
mod gittins;
mod mcts;
mod outcome;
mod recorder;

pub use beam::{beam_search, beam_search_traced, greedy, BeamLevel, BeamMode, BeamTrace};
pub use bon::{
    majority_prediction, majority_vote, run_best_of_n, run_pass_set, sample_candidates,
    SelectionRule,
};
pub use gbfs::{gbfs, gbfs_traced, FrontierEvent, GbfsTrace};
pub use gittins::{gittins_search, gittins_search_traced, BatchDecision, GittinsTrace};
pub use mcts::{mcts, mcts_traced, IterationRecord, MctsTrace};
pub use outcome::{OutcomeRecord, SearchOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{ReasoningStep, SearchNode, Trace};
use crate::surrogate::SurrogateError;

// ---------------------------------------------------------------------------
// Environment interface
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("state does not belong to this environment: {0}")]
    ForeignState(String),
    #[error("invalid environment specification: {0}")]
    InvalidSpec(String),
}

/// A policy/reward pair. Both methods are deterministic functions of their
/// arguments: `score` of the state alone, `sample_actions` of the state,
/// `k`, and the seed. Implementations must tolerate concurrent calls.
pub trait Environment: Send + Sync {
    /// Samples up to `k` candidate next steps for a non-terminal state.
    fn sample_actions(
        &self,
        state: &SearchNode,
        k: usize,
        seed: u64,
    ) -> Result<Vec<ReasoningStep>, EnvError>;

    /// Reward-oracle estimate in `[0, 1]` for a state.
    fn score(&self, state: &SearchNode) -> Result<f64, EnvError>;
}

impl<E: Environment + ?Sized> Environment for &E {
    fn sample_actions(
        &self,
        state: &SearchNode,
        k: usize,
        seed: u64,
    ) -> Result<Vec<ReasoningStep>, EnvError> {
        (**self).sample_actions(state, k, seed)
    }

    fn score(&self, state: &SearchNode) -> Result<f64, EnvError> {
        (**self).score(state)
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no candidates to select from")]
    EmptyCandidates,
    #[error("cost schedule index {n} outside [0, {budget}]")]
    CostIndexOutOfRange { n: u64, budget: u64 },
    #[error("unknown method string `{0}`")]
    UnknownMethod(String),
}

// ---------------------------------------------------------------------------
// Aggregators
// ---------------------------------------------------------------------------

/// Reduction of per-step scores to a single trace score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Last,
    Min,
    Avg,
    Prod,
    Max,
    Sum,
}

impl Aggregator {
    pub const ALL: [Aggregator; 6] = [
        Aggregator::Last,
        Aggregator::Min,
        Aggregator::Avg,
        Aggregator::Prod,
        Aggregator::Max,
        Aggregator::Sum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Last => "last",
            Aggregator::Min => "min",
            Aggregator::Avg => "avg",
            Aggregator::Prod => "prod",
            Aggregator::Max => "max",
            Aggregator::Sum => "sum",
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(Aggregator::Last),
            "min" => Ok(Aggregator::Min),
            "avg" => Ok(Aggregator::Avg),
            "prod" => Ok(Aggregator::Prod),
            "max" => Ok(Aggregator::Max),
            "sum" => Ok(Aggregator::Sum),
            other => Err(format!("unknown aggregator `{other}`")),
        }
    }
}

/// Applies an aggregator to a non-empty list of step scores. `sum` and
/// `prod` may leave `[0, 1]`.
pub fn aggregate(step_scores: &[f64], psi: Aggregator) -> Result<f64, SearchError> {
    if step_scores.is_empty() {
        return Err(SearchError::InvalidArgument(
            "aggregate requires at least one step score".into(),
        ));
    }
    Ok(match psi {
        Aggregator::Last => *step_scores.last().expect("non-empty"),
        Aggregator::Min => step_scores.iter().copied().fold(f64::INFINITY, f64::min),
        Aggregator::Max => step_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        Aggregator::Avg => step_scores.iter().sum::<f64>() / step_scores.len() as f64,
        Aggregator::Sum => step_scores.iter().sum(),
        Aggregator::Prod => step_scores.iter().product(),
    })
}

/// Selects the candidate maximizing the aggregated score; ties break to the
/// lowest index. Returns the winning index.
pub fn best_of_n(candidates: &[Trace], psi: Aggregator) -> Result<usize, SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::EmptyCandidates);
    }
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, trace) in candidates.iter().enumerate() {
        let score = aggregate(trace.step_scores(), psi)?;
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Cost schedules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Constant,
    Linear,
}

/// Sampling-cost profile over a total policy-sample budget `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    pub kind: CostKind,
    pub c1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    pub budget_b: u64,
}

impl CostSchedule {
    pub fn constant(c1: f64, budget_b: u64) -> Result<Self, SearchError> {
        let s = Self {
            kind: CostKind::Constant,
            c1,
            c2: None,
            budget_b,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn linear(c1: f64, c2: f64, budget_b: u64) -> Result<Self, SearchError> {
        let s = Self {
            kind: CostKind::Linear,
            c1,
            c2: Some(c2),
            budget_b,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(SearchError::InvalidArgument(format!(
                "cost c1 must be positive, got {}",
                self.c1
            )));
        }
        if self.budget_b == 0 {
            return Err(SearchError::InvalidArgument(
                "budget B must be positive".into(),
            ));
        }
        match self.kind {
            CostKind::Constant => Ok(()),
            CostKind::Linear => {
                let c2 = self.c2.ok_or_else(|| {
                    SearchError::InvalidArgument("linear schedule requires c2".into())
                })?;
                if !(c2 > 0.0 && c2.is_finite()) {
                    return Err(SearchError::InvalidArgument(format!(
                        "cost c2 must be positive, got {c2}"
                    )));
                }
                if self.c1 >= c2 {
                    return Err(SearchError::InvalidArgument(format!(
                        "linear schedule requires c1 < c2, got c1={} c2={c2}",
                        self.c1
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Cost of the `n`-th policy sample under the schedule:
/// `c(n) = c1 + (c2 - c1) * n / B` for linear schedules, `c1` otherwise.
pub fn cost_at(schedule: &CostSchedule, n: u64) -> Result<f64, SearchError> {
    if n > schedule.budget_b {
        return Err(SearchError::CostIndexOutOfRange {
            n,
            budget: schedule.budget_b,
        });
    }
    Ok(match schedule.kind {
        CostKind::Constant => schedule.c1,
        CostKind::Linear => {
            let c2 = schedule.c2.expect("validated linear schedule has c2");
            schedule.c1 + (c2 - schedule.c1) * n as f64 / schedule.budget_b as f64
        }
    })
}

// ---------------------------------------------------------------------------
// Method strings
// ---------------------------------------------------------------------------

/// A parsed method string, the operator-facing name of one search
/// configuration, e.g. `bon_last@8`, `beam@4:6:cv`, `gittins@0.05`.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    BestOfN { n: usize, psi: Aggregator },
    Majority { n: usize },
    Pass { n: usize },
    Greedy { k: usize },
    Beam { n: usize, k: usize, mode: BeamMode },
    Gbfs { k: usize, depth_aware: bool },
    Mcts { k: usize },
    GittinsConstant { c: f64 },
    GittinsLinear,
}

impl MethodSpec {
    pub fn parse(s: &str) -> Result<Self, SearchError> {
        let err = || SearchError::UnknownMethod(s.to_string());
        let (head, tail) = s.split_once('@').ok_or_else(err)?;
        let parse_usize = |t: &str| t.parse::<usize>().ok().filter(|&v| v >= 1);
        match head {
            "maj" => Ok(MethodSpec::Majority {
                n: parse_usize(tail).ok_or_else(err)?,
            }),
            "pass" => Ok(MethodSpec::Pass {
                n: parse_usize(tail).ok_or_else(err)?,
            }),
            "greedy" => Ok(MethodSpec::Greedy {
                k: parse_usize(tail).ok_or_else(err)?,
            }),
            "beam" => {
                let mut parts = tail.split(':');
                let n = parts.next().and_then(parse_usize).ok_or_else(err)?;
                let k = parts.next().and_then(parse_usize).ok_or_else(err)?;
                let mode = match parts.next() {
                    Some("v") => BeamMode::Instantaneous,
                    Some("cv") => BeamMode::Cumulative,
                    _ => return Err(err()),
                };
                if parts.next().is_some() {
                    return Err(err());
                }
                Ok(MethodSpec::Beam { n, k, mode })
            }
            "gbfs" => Ok(MethodSpec::Gbfs {
                k: parse_usize(tail).ok_or_else(err)?,
                depth_aware: false,
            }),
            "gbfs_da" => Ok(MethodSpec::Gbfs {
                k: parse_usize(tail).ok_or_else(err)?,
                depth_aware: true,
            }),
            "mcts" => Ok(MethodSpec::Mcts {
                k: parse_usize(tail).ok_or_else(err)?,
            }),
            "gittins" => {
                if tail == "linear" {
                    Ok(MethodSpec::GittinsLinear)
                } else {
                    let c = tail.parse::<f64>().ok().filter(|&c| c > 0.0 && c.is_finite());
                    Ok(MethodSpec::GittinsConstant {
                        c: c.ok_or_else(err)?,
                    })
                }
            }
            _ => {
                let psi = head.strip_prefix("bon_").ok_or_else(err)?;
                let psi: Aggregator = psi.parse().map_err(|_| err())?;
                Ok(MethodSpec::BestOfN {
                    n: parse_usize(tail).ok_or_else(err)?,
                    psi,
                })
            }
        }
    }
}

impl std::fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MethodSpec::BestOfN { n, psi } => write!(f, "bon_{}@{n}", psi.name()),
            MethodSpec::Majority { n } => write!(f, "maj@{n}"),
            MethodSpec::Pass { n } => write!(f, "pass@{n}"),
            MethodSpec::Greedy { k } => write!(f, "greedy@{k}"),
            MethodSpec::Beam { n, k, mode } => write!(
                f,
                "beam@{n}:{k}:{}",
                match mode {
                    BeamMode::Instantaneous => "v",
                    BeamMode::Cumulative => "cv",
                }
            ),
            MethodSpec::Gbfs { k, depth_aware: false } => write!(f, "gbfs@{k}"),
            MethodSpec::Gbfs { k, depth_aware: true } => write!(f, "gbfs_da@{k}"),
            MethodSpec::Mcts { k } => write!(f, "mcts@{k}"),
            MethodSpec::GittinsConstant { c } => write!(f, "gittins@{c}"),
            MethodSpec::GittinsLinear => write!(f, "gittins@linear"),
        }
    }
}
