//! Reward-guided tree search over step-wise reasoning MDPs.
//!
//! States are partial reasoning sequences (a prompt plus an ordered list of
//! reasoning steps), actions are sampled continuations, and a reward oracle
//! scores states in `[0, 1]`. The crate provides:
//!
//! - [`core`]: the shared domain model (states, steps, traces, grading,
//!   usage accounting).
//! - [`surrogate`]: a conjugate logit-Normal / Normal-inverse-Gamma surrogate
//!   with expected-improvement and Gittins-index solving for optimal-stopping
//!   action sampling.
//! - [`search`]: best-of-N, beam, greedy best-first, Monte Carlo tree search,
//!   and the adaptive Gittins sampling search, all deterministic given a seed.
//! - [`envs`]: synthetic scenario environments, fully scripted trees for exact
//!   oracles, and an HTTP adapter for real policy/reward servers.
//! - [`analysis`]: accuracy/rank tables with standard errors, Wilcoxon
//!   signed-rank tests, point-biserial correlations, and usage reports.
//! - [`cli`]: configuration, run orchestration, and report emission used by
//!   the `rsearch` binary.

pub mod analysis;
pub mod cli;
pub mod core;
pub mod envs;
pub mod search;
pub mod seed;
pub mod surrogate;
