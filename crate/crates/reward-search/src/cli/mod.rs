//! Operator surface behind the `rsearch` binary: run searches over problem
//! sets, run synthetic scenario studies, calibrate the surrogate prior, and
//! produce analysis reports. Runs persist outcomes and a manifest so every
//! report is replayable.

mod analyze;
mod config;
mod runner;

pub use analyze::{analyze_dir, AccuracyRow, Report, CORRELATION_CSV, REPORT_JSON, REPORT_TEXT};
pub use config::{Budgets, CostSection, EnvironmentSection, RunConfig, SurrogateSection};
pub use runner::{
    run_cells, run_method, scenario_from_number, synthetic_env_for, Manifest, ManifestCell,
    MANIFEST_FILE,
};

use std::path::Path;

use anyhow::{bail, Result};

use crate::surrogate::{calibrate_prior, fallback_prior, uniform_kl};

/// `simulate`: builds a synthetic config from flags, runs all methods over
/// the seeded trees, and analyzes the directory in one step.
#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    scenario: u8,
    branching: usize,
    depth: usize,
    fraction_correct_leaves: f64,
    noise_sd: f64,
    methods: &[String],
    seed_count: u64,
    seed_offset: u64,
    out_dir: &Path,
    workers: usize,
) -> Result<Report> {
    if seed_count == 0 {
        bail!("simulate requires at least one seed");
    }
    let config = RunConfig {
        methods: methods.to_vec(),
        environment: EnvironmentSection::Synthetic {
            scenario: scenario_from_number(scenario)?,
            branching,
            depth,
            fraction_correct_leaves,
            noise_sd,
        },
        seeds: (seed_offset..seed_offset + seed_count).collect(),
        budgets: Budgets::default(),
        surrogate: SurrogateSection::default(),
        output_dir: Some(out_dir.to_path_buf()),
    };
    run_cells(&config, out_dir, workers)?;
    analyze_dir(out_dir)
}

/// `calibrate`: prints the KL-optimal prior as JSON along with the achieved
/// divergence and the fallback prior's divergence for comparison.
pub fn cmd_calibrate(resolution: usize) -> Result<String> {
    let prior = calibrate_prior(resolution).map_err(|e| anyhow::anyhow!("{e}"))?;
    let kl = uniform_kl(&prior).map_err(|e| anyhow::anyhow!("{e}"))?;
    let kl_fallback = uniform_kl(&fallback_prior()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let doc = serde_json::json!({
        "prior": prior,
        "kl_from_uniform": kl,
        "kl_from_uniform_fallback": kl_fallback,
        "resolution": resolution,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}
