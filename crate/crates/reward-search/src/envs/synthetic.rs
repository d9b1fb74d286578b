//! Seeded complete trees with three reward-oracle quality regimes.
//!
//! Leaves are marked correct with a configured probability; the underlying
//! quantity behind every score is `p(s)`, the fraction of leaves below `s`
//! that are correct (the probability a uniformly sampled continuation ends
//! correct). The three scenarios expose it differently:
//!
//! - `value_exact`: `score(s) = p(s)` everywhere.
//! - `terminal_only`: exact at leaves, independent uniform noise at internal
//!   nodes.
//! - `noisy`: `expit(logit(p) + sd * z)` with the noise standard deviation
//!   growing linearly with distance from the terminal level, so score
//!   reliability degrades with depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::core::{ReasoningStep, SearchNode};
use crate::search::{EnvError, Environment};
use crate::seed;
use crate::surrogate::{expit, logit};

use super::path_of;

/// Ground-truth answer every correct synthetic leaf boxes.
pub const SYNTHETIC_TRUTH: &str = "ok";

/// Cap on materialized leaves; keeps tree construction at desk scale.
const MAX_LEAVES: u64 = 1 << 22;

/// Clamp applied to leaf fractions before the logit in the noisy scenario.
const P_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(alias = "1")]
    ValueExact,
    #[serde(alias = "2")]
    TerminalOnly,
    #[serde(alias = "3")]
    Noisy,
}

/// Shape and regime of one synthetic tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub branching: usize,
    pub depth: usize,
    pub fraction_correct_leaves: f64,
    #[serde(default)]
    pub noise_sd: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.branching < 1 || self.depth < 1 {
            return Err(EnvError::InvalidSpec(format!(
                "branching and depth must be >= 1, got {} and {}",
                self.branching, self.depth
            )));
        }
        if !(self.fraction_correct_leaves > 0.0 && self.fraction_correct_leaves < 1.0) {
            return Err(EnvError::InvalidSpec(format!(
                "fraction_correct_leaves must lie in (0, 1), got {}",
                self.fraction_correct_leaves
            )));
        }
        if self.noise_sd < 0.0 || !self.noise_sd.is_finite() {
            return Err(EnvError::InvalidSpec(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        if self.scenario == Scenario::ValueExact && self.noise_sd != 0.0 {
            return Err(EnvError::InvalidSpec(
                "value_exact requires noise_sd = 0".into(),
            ));
        }
        let mut leaves: u64 = 1;
        for _ in 0..self.depth {
            leaves = leaves.saturating_mul(self.branching as u64);
            if leaves > MAX_LEAVES {
                return Err(EnvError::InvalidSpec(format!(
                    "branching^depth exceeds the {MAX_LEAVES} leaf cap"
                )));
            }
        }
        Ok(())
    }
}

/// A complete `branching^depth` tree with seeded leaf correctness and
/// prefix-summed correct-leaf counts for O(1) fraction queries.
pub struct SyntheticEnv {
    spec: ScenarioSpec,
    correct_prefix: Vec<u32>, // prefix sums over the leaf row
}

/// Builds the tree for a validated spec.
pub fn make_synthetic_env(spec: &ScenarioSpec) -> Result<SyntheticEnv, EnvError> {
    spec.validate()?;
    let leaves = (spec.branching as u64).pow(spec.depth as u32) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(spec.seed, 0x1ea5, 0));
    let mut correct_prefix = Vec::with_capacity(leaves + 1);
    correct_prefix.push(0u32);
    let mut acc = 0u32;
    for _ in 0..leaves {
        if rng.gen::<f64>() < spec.fraction_correct_leaves {
            acc += 1;
        }
        correct_prefix.push(acc);
    }
    Ok(SyntheticEnv {
        spec: *spec,
        correct_prefix,
    })
}

impl SyntheticEnv {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Leaf span `[lo, hi)` covered by the node at `path`.
    fn leaf_span(&self, path: &[usize]) -> Result<(usize, usize), EnvError> {
        if path.len() > self.spec.depth {
            return Err(EnvError::ForeignState(format!(
                "path depth {} exceeds tree depth {}",
                path.len(),
                self.spec.depth
            )));
        }
        let mut offset = 0usize;
        for &i in path {
            if i >= self.spec.branching {
                return Err(EnvError::ForeignState(format!(
                    "child index {i} exceeds branching {}",
                    self.spec.branching
                )));
            }
            offset = offset * self.spec.branching + i;
        }
        let span = (self.spec.branching as u64).pow((self.spec.depth - path.len()) as u32) as usize;
        let lo = offset * span;
        Ok((lo, lo + span))
    }

    /// Fraction of correct leaves below the node: the success probability of
    /// a uniformly sampled continuation.
    fn fraction(&self, path: &[usize]) -> Result<f64, EnvError> {
        let (lo, hi) = self.leaf_span(path)?;
        let correct = self.correct_prefix[hi] - self.correct_prefix[lo];
        Ok(correct as f64 / (hi - lo) as f64)
    }

    fn node_key(&self, path: &[usize]) -> u64 {
        let mut offset = 0u64;
        for &i in path {
            offset = offset * self.spec.branching as u64 + i as u64 + 1;
        }
        offset
    }

    /// Exact reachability value: 1 iff any leaf below the node is correct.
    /// Test oracle; not exposed through the environment interface.
    pub fn true_value(&self, state: &SearchNode) -> Result<u8, EnvError> {
        let path = path_of(state)?;
        let (lo, hi) = self.leaf_span(&path)?;
        Ok(u8::from(self.correct_prefix[hi] > self.correct_prefix[lo]))
    }

    /// Same oracle addressed by child-index path.
    pub fn true_value_of_path(&self, path: &[usize]) -> Result<u8, EnvError> {
        let (lo, hi) = self.leaf_span(path)?;
        Ok(u8::from(self.correct_prefix[hi] > self.correct_prefix[lo]))
    }

    pub fn fraction_of_path(&self, path: &[usize]) -> Result<f64, EnvError> {
        self.fraction(path)
    }

    fn score_of_path(&self, path: &[usize]) -> Result<f64, EnvError> {
        let p = self.fraction(path)?;
        let at_leaf = path.len() == self.spec.depth;
        match self.spec.scenario {
            Scenario::ValueExact => Ok(p),
            Scenario::TerminalOnly => {
                if at_leaf {
                    Ok(p)
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(
                        self.spec.seed,
                        0x0153,
                        self.node_key(path),
                    ));
                    // Uniform on the open interval.
                    Ok(rng.gen::<f64>().clamp(P_CLAMP, 1.0 - P_CLAMP))
                }
            }
            Scenario::Noisy => {
                let distance = (self.spec.depth - path.len()) as f64;
                let sd = self.spec.noise_sd * distance / self.spec.depth as f64;
                if sd == 0.0 {
                    return Ok(p);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(
                    self.spec.seed,
                    0x7015,
                    self.node_key(path),
                ));
                let z: f64 = standard_normal(&mut rng);
                let clamped = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
                Ok(expit(logit(clamped) + sd * z))
            }
        }
    }

    /// Step text for descending into child `i` from `path`; leaves box their
    /// answer so traces terminate and grade.
    fn step_for_child(&self, path: &[usize], i: usize) -> ReasoningStep {
        let child_depth = path.len() + 1;
        let text = if child_depth == self.spec.depth {
            let mut child_path = path.to_vec();
            child_path.push(i);
            let (lo, hi) = self
                .leaf_span(&child_path)
                .expect("child path stays inside the tree");
            debug_assert_eq!(hi - lo, 1);
            if self.correct_prefix[hi] > self.correct_prefix[lo] {
                format!("s{i} \\boxed{{{SYNTHETIC_TRUTH}}}")
            } else {
                format!("s{i} \\boxed{{w{lo}}}")
            }
        } else {
            format!("s{i}")
        };
        ReasoningStep::new(text, 1).expect("synthetic step text is delimiter-free")
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per node is plenty here.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl Environment for SyntheticEnv {
    fn sample_actions(
        &self,
        state: &SearchNode,
        k: usize,
        seed_value: u64,
    ) -> Result<Vec<ReasoningStep>, EnvError> {
        let path = path_of(state)?;
        if path.len() >= self.spec.depth {
            return Err(EnvError::ForeignState(
                "cannot sample below a leaf".into(),
            ));
        }
        let b = self.spec.branching;
        let picks: Vec<usize> = if k >= b {
            (0..b).collect()
        } else {
            // Seeded partial Fisher-Yates: k distinct children, uniform
            // without replacement.
            let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(
                seed_value,
                0xac71,
                self.node_key(&path),
            ));
            let mut pool: Vec<usize> = (0..b).collect();
            (0..k)
                .map(|i| {
                    let j = rng.gen_range(i..b);
                    pool.swap(i, j);
                    pool[i]
                })
                .collect()
        };
        Ok(picks
            .into_iter()
            .map(|i| self.step_for_child(&path, i))
            .collect())
    }

    fn score(&self, state: &SearchNode) -> Result<f64, EnvError> {
        let path = path_of(state)?;
        self.score_of_path(&path)
    }
}
