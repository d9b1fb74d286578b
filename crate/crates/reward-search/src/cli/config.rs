//! Run configuration: a single JSON document naming methods, the
//! environment, seeds, budgets, and surrogate settings.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::envs::{EndpointConfig, Scenario};
use crate::search::{CostKind, MethodSpec};
use crate::surrogate::{default_prior, NIGParams, DEFAULT_EPSILON};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub methods: Vec<String>,
    pub environment: EnvironmentSection,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub surrogate: SurrogateSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentSection {
    /// Seeded scenario trees; every seed is one problem.
    Synthetic {
        scenario: Scenario,
        branching: usize,
        depth: usize,
        fraction_correct_leaves: f64,
        #[serde(default)]
        noise_sd: f64,
    },
    /// Real policy/reward servers plus a JSONL problems file.
    Endpoint {
        problems_file: PathBuf,
        #[serde(flatten)]
        config: EndpointConfig,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub max_depth: usize,
    /// GBFS expansion budget.
    pub node_budget: usize,
    /// Total policy-sample budget B for the adaptive sampler.
    pub sample_budget_b: u64,
    /// Actions per adaptive-sampler batch (one stopping decision per batch).
    pub gittins_batch_k: usize,
    pub mcts_iterations: usize,
    pub mcts_c_explore: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_depth: crate::core::DEFAULT_MAX_DEPTH,
            node_budget: 512,
            sample_budget_b: 256,
            gittins_batch_k: 2,
            mcts_iterations: 32,
            mcts_c_explore: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSection {
    pub prior: Option<NIGParams>,
    pub epsilon: f64,
    pub cost: CostSection,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self {
            prior: None,
            epsilon: DEFAULT_EPSILON,
            cost: CostSection::default(),
        }
    }
}

impl SurrogateSection {
    pub fn prior_or_default(&self) -> NIGParams {
        self.prior.unwrap_or_else(default_prior)
    }
}

/// Cost parameters for `gittins@linear`; `gittins@<c>` overrides with a
/// constant schedule at `c`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CostSection {
    pub kind: CostKind,
    pub c1: f64,
    pub c2: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            kind: CostKind::Linear,
            c1: 0.01,
            c2: 0.1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("config lists no methods");
        }
        for method in &self.methods {
            MethodSpec::parse(method)
                .with_context(|| format!("config method `{method}` does not parse"))?;
        }
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        match &self.environment {
            EnvironmentSection::Synthetic {
                scenario,
                branching,
                depth,
                fraction_correct_leaves,
                noise_sd,
            } => {
                let spec = crate::envs::ScenarioSpec {
                    scenario: *scenario,
                    branching: *branching,
                    depth: *depth,
                    fraction_correct_leaves: *fraction_correct_leaves,
                    noise_sd: *noise_sd,
                    seed: 0,
                };
                spec.validate().context("synthetic environment section")?;
            }
            EnvironmentSection::Endpoint { problems_file, config } => {
                if !problems_file.exists() {
                    bail!("problems file {} does not exist", problems_file.display());
                }
                config.validate().context("endpoint environment section")?;
            }
        }
        Ok(())
    }

    /// Parsed method specs in config order.
    pub fn method_specs(&self) -> Vec<(String, MethodSpec)> {
        self.methods
            .iter()
            .map(|m| (m.clone(), MethodSpec::parse(m).expect("validated config")))
            .collect()
    }
}
