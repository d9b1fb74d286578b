//! Cell execution: one search run per (method, problem, seed), written to
//! one JSON file each, plus a manifest tying the run together.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::Problem;
use crate::envs::{
    make_synthetic_env, EndpointEnv, Scenario, ScenarioSpec, SyntheticEnv, SYNTHETIC_TRUTH,
};
use crate::search::{
    beam_search, gbfs, gittins_search, greedy, mcts, run_best_of_n, run_pass_set, CostKind,
    CostSchedule, Environment, MethodSpec, SearchOutcome, SelectionRule,
};
use crate::seed;

use super::config::{Budgets, EnvironmentSection, RunConfig, SurrogateSection};

/// Stream salt separating search randomness from environment construction.
const SEARCH_SEED_STREAM: u64 = 0x5ea7c4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCell {
    pub method: String,
    pub problem_id: String,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub problems: Vec<Problem>,
    pub cells: Vec<ManifestCell>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Executes every (method, problem, seed) cell and writes the outcomes plus
/// a manifest into `out_dir`. Re-running an identical config yields
/// byte-identical files.
pub fn run_cells(config: &RunConfig, out_dir: &Path, workers: usize) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let (problems, cells) = plan_cells(config)?;
    let endpoint_env: Option<Arc<EndpointEnv>> = match &config.environment {
        EnvironmentSection::Endpoint { config: ec, .. } => Some(Arc::new(
            EndpointEnv::new(ec.clone().with_env_overrides())
                .map_err(|e| anyhow::anyhow!("endpoint setup: {e}"))?,
        )),
        EnvironmentSection::Synthetic { .. } => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;

    pool.install(|| {
        cells
            .par_iter()
            .try_for_each(|cell| -> Result<()> {
                let outcome = run_cell(config, cell, &problems, endpoint_env.as_deref())
                    .with_context(|| {
                        format!(
                            "cell method={} problem={} seed={}",
                            cell.method, cell.problem_id, cell.seed
                        )
                    })?;
                let record = outcome.to_record(&cell.method, &cell.problem_id, cell.seed);
                let json = serde_json::to_string_pretty(&record)?;
                std::fs::write(out_dir.join(&cell.file), json)
                    .with_context(|| format!("writing {}", cell.file))?;
                Ok(())
            })
    })?;

    let manifest = Manifest {
        config: config.clone(),
        problems,
        cells,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest_json)
        .with_context(|| format!("writing {MANIFEST_FILE}"))?;
    Ok(manifest)
}

/// Problems and the full cell grid in deterministic order.
fn plan_cells(config: &RunConfig) -> Result<(Vec<Problem>, Vec<ManifestCell>)> {
    let problems: Vec<Problem> = match &config.environment {
        EnvironmentSection::Synthetic { .. } => config
            .seeds
            .iter()
            .map(|&s| Problem {
                id: format!("tree-{s}"),
                prompt: String::new(),
                ground_truth: SYNTHETIC_TRUTH.to_string(),
            })
            .collect(),
        EnvironmentSection::Endpoint { problems_file, .. } => {
            crate::core::load_problems(problems_file)
                .with_context(|| format!("loading {}", problems_file.display()))?
        }
    };
    let mut cells = Vec::new();
    let mut idx = 0usize;
    for (method, _) in config.method_specs() {
        match &config.environment {
            EnvironmentSection::Synthetic { .. } => {
                for (&tree_seed, problem) in config.seeds.iter().zip(&problems) {
                    cells.push(ManifestCell {
                        method: method.clone(),
                        problem_id: problem.id.clone(),
                        seed: tree_seed,
                        file: cell_file(idx, &method, &problem.id, tree_seed),
                    });
                    idx += 1;
                }
            }
            EnvironmentSection::Endpoint { .. } => {
                for problem in &problems {
                    for &seed in &config.seeds {
                        cells.push(ManifestCell {
                            method: method.clone(),
                            problem_id: problem.id.clone(),
                            seed,
                            file: cell_file(idx, &method, &problem.id, seed),
                        });
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok((problems, cells))
}

fn cell_file(idx: usize, method: &str, problem_id: &str, seed: u64) -> String {
    let sane = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' {
                c
            } else {
                '-'
            })
            .collect()
    };
    format!("{idx:05}_{}__{}__{seed}.json", sane(method), sane(problem_id))
}

fn run_cell(
    config: &RunConfig,
    cell: &ManifestCell,
    problems: &[Problem],
    endpoint_env: Option<&EndpointEnv>,
) -> Result<SearchOutcome> {
    let problem = problems
        .iter()
        .find(|p| p.id == cell.problem_id)
        .expect("cells reference planned problems");
    let spec = MethodSpec::parse(&cell.method)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    match &config.environment {
        EnvironmentSection::Synthetic {
            scenario,
            branching,
            depth,
            fraction_correct_leaves,
            noise_sd,
        } => {
            let env_spec = ScenarioSpec {
                scenario: *scenario,
                branching: *branching,
                depth: *depth,
                fraction_correct_leaves: *fraction_correct_leaves,
                noise_sd: *noise_sd,
                seed: cell.seed,
            };
            let env = make_synthetic_env(&env_spec)
                .map_err(|e| anyhow::anyhow!("building synthetic env: {e}"))?;
            // Shared across methods so bon/maj/pass reuse identical samples.
            let search_seed = seed::mix(cell.seed, SEARCH_SEED_STREAM, 0);
            // The tree's leaves terminate by boxed answers; never cut before
            // them.
            let mut budgets = config.budgets;
            budgets.max_depth = budgets.max_depth.max(*depth);
            run_method(&env, &spec, &problem.prompt, &budgets, &config.surrogate, search_seed)
        }
        EnvironmentSection::Endpoint { .. } => {
            let env = endpoint_env.expect("endpoint env built for endpoint config");
            run_method(
                &env,
                &spec,
                &problem.prompt,
                &config.budgets,
                &config.surrogate,
                cell.seed,
            )
        }
    }
}

/// Dispatches one parsed method onto the search algorithms.
pub fn run_method<E: Environment>(
    env: &E,
    spec: &MethodSpec,
    prompt: &str,
    budgets: &Budgets,
    surrogate: &SurrogateSection,
    search_seed: u64,
) -> Result<SearchOutcome> {
    let max_depth = budgets.max_depth;
    let outcome = match spec {
        MethodSpec::BestOfN { n, psi } => run_best_of_n(
            env,
            prompt,
            *n,
            SelectionRule::Aggregated(*psi),
            max_depth,
            search_seed,
        ),
        MethodSpec::Majority { n } => run_best_of_n(
            env,
            prompt,
            *n,
            SelectionRule::MajorityVote,
            max_depth,
            search_seed,
        ),
        MethodSpec::Pass { n } => run_pass_set(env, prompt, *n, max_depth, search_seed),
        MethodSpec::Greedy { k } => greedy(env, prompt, *k, max_depth, search_seed),
        MethodSpec::Beam { n, k, mode } => {
            beam_search(env, prompt, *n, *k, *mode, max_depth, search_seed)
        }
        MethodSpec::Gbfs { k, depth_aware } => gbfs(
            env,
            prompt,
            *k,
            *depth_aware,
            max_depth,
            budgets.node_budget,
            search_seed,
        ),
        MethodSpec::Mcts { k } => mcts(
            env,
            prompt,
            *k,
            budgets.mcts_iterations,
            budgets.mcts_c_explore,
            max_depth,
            search_seed,
        ),
        MethodSpec::GittinsConstant { c } => {
            let schedule = CostSchedule::constant(*c, budgets.sample_budget_b)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            gittins_search(
                env,
                prompt,
                budgets.gittins_batch_k,
                &schedule,
                &surrogate.prior_or_default(),
                surrogate.epsilon,
                max_depth,
                search_seed,
            )
        }
        MethodSpec::GittinsLinear => {
            let schedule = match surrogate.cost.kind {
                CostKind::Linear => {
                    CostSchedule::linear(surrogate.cost.c1, surrogate.cost.c2, budgets.sample_budget_b)
                }
                CostKind::Constant => {
                    CostSchedule::constant(surrogate.cost.c1, budgets.sample_budget_b)
                }
            }
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            gittins_search(
                env,
                prompt,
                budgets.gittins_batch_k,
                &schedule,
                &surrogate.prior_or_default(),
                surrogate.epsilon,
                max_depth,
                search_seed,
            )
        }
    };
    outcome.map_err(|e| anyhow::anyhow!("{e}"))
}

/// Used by tests and the simulate command to reproduce a cell's environment.
pub fn synthetic_env_for(config: &RunConfig, tree_seed: u64) -> Result<SyntheticEnv> {
    match &config.environment {
        EnvironmentSection::Synthetic {
            scenario,
            branching,
            depth,
            fraction_correct_leaves,
            noise_sd,
        } => make_synthetic_env(&ScenarioSpec {
            scenario: *scenario,
            branching: *branching,
            depth: *depth,
            fraction_correct_leaves: *fraction_correct_leaves,
            noise_sd: *noise_sd,
            seed: tree_seed,
        })
        .map_err(|e| anyhow::anyhow!("{e}")),
        EnvironmentSection::Endpoint { .. } => {
            anyhow::bail!("config does not describe a synthetic environment")
        }
    }
}

/// Scenario number (1, 2, 3) to enum.
pub fn scenario_from_number(n: u8) -> Result<Scenario> {
    match n {
        1 => Ok(Scenario::ValueExact),
        2 => Ok(Scenario::TerminalOnly),
        3 => Ok(Scenario::Noisy),
        other => anyhow::bail!("scenario must be 1, 2, or 3, got {other}"),
    }
}
