//! Report generation from a finished run directory: accuracy and rank tables
//! with Wilcoxon significance against the best method, a usage table, and
//! correlation-by-distance points.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    accuracy_with_se, correlation_by_distance, mean_rank_with_se, usage_report,
    wilcoxon_signed_rank, CorrelationPoint, GradedTrace, UsageRow, UsageSample,
};
use crate::core::{grade, TraceRecord};
use crate::search::{majority_prediction, MethodSpec, OutcomeRecord};

use super::runner::{Manifest, MANIFEST_FILE};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: String,
    pub mean: f64,
    pub se: Option<f64>,
    /// Two-sided Wilcoxon p vs the best non-pass method; `None` on the best
    /// row and on pass rows.
    pub p_vs_best: Option<f64>,
    pub rank_mean: Option<f64>,
    pub rank_se: Option<f64>,
    pub p_rank_vs_best: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub accuracy: Vec<AccuracyRow>,
    pub usage: Vec<UsageRow>,
    pub correlation: Vec<CorrelationPoint>,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const CORRELATION_CSV: &str = "correlation_by_distance.csv";

/// Reads a run directory, grades every outcome, and writes `report.json`,
/// `report.txt`, and `correlation_by_distance.csv` next to the outcomes.
/// Analysis is a pure function of the directory contents.
pub fn analyze_dir(dir: &Path) -> Result<Report> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        bail!("{} holds no {MANIFEST_FILE}; nothing to analyze", dir.display());
    }
    let manifest: Manifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path).context("reading manifest")?,
    )
    .context("parsing manifest")?;

    // Load every referenced outcome; report all gaps at once.
    let mut outcomes: Vec<OutcomeRecord> = Vec::with_capacity(manifest.cells.len());
    let mut gaps = Vec::new();
    for cell in &manifest.cells {
        let path = dir.join(&cell.file);
        match std::fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str::<OutcomeRecord>(&text) {
                Ok(rec) => outcomes.push(rec),
                Err(e) => gaps.push(format!("{}: parse error: {e}", cell.file)),
            },
            Err(e) => gaps.push(format!("{}: {e}", cell.file)),
        }
    }
    if !gaps.is_empty() {
        bail!("missing or corrupt outcomes:\n  {}", gaps.join("\n  "));
    }
    if outcomes.is_empty() {
        bail!("manifest lists no cells");
    }

    let truths: BTreeMap<&str, &str> = manifest
        .problems
        .iter()
        .map(|p| (p.id.as_str(), p.ground_truth.as_str()))
        .collect();
    let problem_order: Vec<&str> = manifest.problems.iter().map(|p| p.id.as_str()).collect();

    let report = build_report(&manifest, &outcomes, &truths, &problem_order)?;

    std::fs::write(dir.join(REPORT_JSON), serde_json::to_string_pretty(&report)?)?;
    std::fs::write(dir.join(REPORT_TEXT), render_text(&report))?;
    std::fs::write(dir.join(CORRELATION_CSV), render_csv(&report.correlation))?;
    Ok(report)
}

fn is_pass(method: &str) -> bool {
    method.starts_with("pass@")
}

/// Accuracy of one outcome under its method's semantics.
fn grade_outcome(method: &MethodSpec, outcome: &OutcomeRecord, truth: &str) -> f64 {
    let correct = |record: &TraceRecord| -> bool {
        record.prediction.as_deref().is_some_and(|p| grade(p, truth))
    };
    match method {
        MethodSpec::Pass { .. } => f64::from(outcome.all_candidates.iter().any(correct) as u8),
        MethodSpec::Majority { .. } => {
            let preds: Vec<Option<&str>> = outcome
                .all_candidates
                .iter()
                .map(|c| c.prediction.as_deref())
                .collect();
            match majority_prediction(preds.iter().copied()) {
                Some(p) => f64::from(grade(&p, truth) as u8),
                None => 0.0,
            }
        }
        _ => f64::from(correct(&outcome.selected) as u8),
    }
}

fn build_report(
    manifest: &Manifest,
    outcomes: &[OutcomeRecord],
    truths: &BTreeMap<&str, &str>,
    problem_order: &[&str],
) -> Result<Report> {
    // Group outcomes by method, preserving config order.
    let mut by_method: BTreeMap<&str, Vec<&OutcomeRecord>> = BTreeMap::new();
    for outcome in outcomes {
        by_method.entry(&outcome.method).or_default().push(outcome);
    }
    let mut method_order: Vec<String> = manifest.config.methods.clone();

    // Derive pass@N / maj@N from stored best-of-n candidates when they were
    // not run explicitly; all three share the same sampled chains.
    let mut derived: Vec<(String, String)> = Vec::new(); // (derived method, source method)
    let bon_ns: Vec<(usize, String)> = method_order
        .iter()
        .filter_map(|m| match MethodSpec::parse(m) {
            Ok(MethodSpec::BestOfN { n, .. }) => Some((n, m.clone())),
            _ => None,
        })
        .collect();
    for (n, source) in &bon_ns {
        for prefix in ["pass", "maj"] {
            let name = format!("{prefix}@{n}");
            if !method_order.iter().any(|m| m == &name)
                && !derived.iter().any(|(d, _)| d == &name)
            {
                derived.push((name, source.clone()));
            }
        }
    }
    let mut rows_order: Vec<(String, String)> = derived.clone();
    rows_order.extend(method_order.drain(..).map(|m| (m.clone(), m)));

    // Per-problem accuracy per display row (mean over seeds).
    let mut acc_rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (display, source) in &rows_order {
        let spec = MethodSpec::parse(display).map_err(|e| anyhow::anyhow!("{e}"))?;
        let records = by_method
            .get(source.as_str())
            .with_context(|| format!("no outcomes for method {source}"))?;
        let mut per_problem = Vec::with_capacity(problem_order.len());
        for pid in problem_order {
            let truth = truths[pid];
            let runs: Vec<f64> = records
                .iter()
                .filter(|o| o.problem_id == *pid)
                .map(|o| grade_outcome(&spec, o, truth))
                .collect();
            if runs.is_empty() {
                bail!("method {display}: no outcomes for problem {pid}");
            }
            per_problem.push(runs.iter().sum::<f64>() / runs.len() as f64);
        }
        acc_rows.push((display.clone(), per_problem));
    }

    // Comparisons exclude pass rows (an oracle upper bound, not a method).
    let comparable: Vec<usize> = (0..acc_rows.len())
        .filter(|&i| !is_pass(&acc_rows[i].0))
        .collect();
    let best_acc_idx = comparable
        .iter()
        .copied()
        .max_by(|&a, &b| {
            let ma = mean(&acc_rows[a].1);
            let mb = mean(&acc_rows[b].1);
            ma.partial_cmp(&mb).expect("finite means").then(b.cmp(&a))
        });

    // Ranks over comparable methods only, when there are at least two.
    let rank_stats: Option<RankStats> = if comparable.len() >= 2
        && problem_order.len() >= 2
    {
        let rank_rows: Vec<Vec<f64>> = comparable
            .iter()
            .map(|&i| acc_rows[i].1.clone())
            .collect();
        let stats = mean_rank_with_se(&rank_rows).map_err(|e| anyhow::anyhow!("{e}"))?;
        let per_problem_ranks = per_problem_rank_matrix(&rank_rows);
        Some((stats, per_problem_ranks))
    } else {
        None
    };
    let best_rank_pos: Option<usize> = rank_stats.as_ref().map(|(stats, _)| {
        stats
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.0.partial_cmp(&b.0).expect("finite ranks"))
            .map(|(i, _)| i)
            .expect("at least two methods")
    });

    let mut accuracy = Vec::new();
    for (i, (method, per_problem)) in acc_rows.iter().enumerate() {
        let (mean_val, se) = match accuracy_with_se(per_problem) {
            Ok((m, s)) => (m, Some(s)),
            Err(_) => (mean(per_problem), None),
        };
        let comparable_pos = comparable.iter().position(|&c| c == i);
        let p_vs_best = match (best_acc_idx, comparable_pos) {
            (Some(best), Some(_)) if best != i => {
                Some(wilcoxon_signed_rank(per_problem, &acc_rows[best].1)?)
            }
            _ => None,
        };
        let (rank_mean, rank_se, p_rank_vs_best) = match (&rank_stats, comparable_pos) {
            (Some((stats, rank_matrix)), Some(pos)) => {
                let (m, s) = stats[pos];
                let p = match best_rank_pos {
                    Some(best_pos) if best_pos != pos => Some(wilcoxon_signed_rank(
                        &rank_matrix[pos],
                        &rank_matrix[best_pos],
                    )?),
                    _ => None,
                };
                (Some(m), Some(s), p)
            }
            _ => (None, None, None),
        };
        accuracy.push(AccuracyRow {
            method: method.clone(),
            mean: mean_val,
            se,
            p_vs_best,
            rank_mean,
            rank_se,
            p_rank_vs_best,
        });
    }

    // Usage table: every display row reports its source outcomes.
    let usage_groups: Vec<(String, Vec<UsageSample>)> = rows_order
        .iter()
        .map(|(display, source)| {
            let samples = by_method[source.as_str()]
                .iter()
                .map(|o| UsageSample {
                    selected_steps: o.selected.steps.len() as u64,
                    usage: o.usage,
                })
                .collect();
            (display.clone(), samples)
        })
        .collect();
    let usage = usage_report(&usage_groups);

    // Correlation from every stored trace (candidates where present).
    let mut graded = Vec::new();
    for outcome in outcomes {
        let truth = truths
            .get(outcome.problem_id.as_str())
            .copied()
            .unwrap_or_default();
        let records: Vec<&TraceRecord> = if outcome.all_candidates.is_empty() {
            vec![&outcome.selected]
        } else {
            outcome.all_candidates.iter().collect()
        };
        for record in records {
            graded.push(GradedTrace {
                step_scores: record.step_scores.clone(),
                correct: record
                    .prediction
                    .as_deref()
                    .is_some_and(|p| grade(p, truth)),
            });
        }
    }
    let correlation = correlation_by_distance(&graded);

    Ok(Report {
        accuracy,
        usage,
        correlation,
    })
}

/// Per-method (mean rank, se) plus the per-problem rank matrix behind it.
type RankStats = (Vec<(f64, f64)>, Vec<Vec<f64>>);

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Per-method rank vectors across problems (same shape as the accuracy
/// rows), for paired rank significance tests.
fn per_problem_rank_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.len();
    let p = rows[0].len();
    let mut ranks = vec![vec![0.0; p]; m];
    for j in 0..p {
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| column[b].partial_cmp(&column[a]).expect("finite"));
        let mut i = 0;
        while i < m {
            let mut k = i;
            while k + 1 < m && column[order[k + 1]] == column[order[i]] {
                k += 1;
            }
            let avg = (i + 1 + k + 1) as f64 / 2.0;
            for &idx in &order[i..=k] {
                ranks[idx][j] = avg;
            }
            i = k + 1;
        }
    }
    ranks
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn fmt_p(p: Option<f64>) -> String {
    match p {
        Some(p) => format!("{p:.3}"),
        None => "N/A".to_string(),
    }
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    out.push_str("Accuracy and rank across problems\n");
    out.push_str(&format!(
        "{:<18} {:>8} {:>7} {:>8} {:>8} {:>7} {:>8}\n",
        "method", "acc%", "se", "p(acc)", "rank", "se", "p(rank)"
    ));
    for row in &report.accuracy {
        out.push_str(&format!(
            "{:<18} {:>8.1} {:>7} {:>8} {:>8} {:>7} {:>8}\n",
            row.method,
            100.0 * row.mean,
            row.se
                .map(|s| format!("{:.1}", 100.0 * s))
                .unwrap_or_else(|| "N/A".into()),
            fmt_p(row.p_vs_best),
            row.rank_mean
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| "N/A".into()),
            row.rank_se
                .map(|s| format!("{s:.2}"))
                .unwrap_or_else(|| "N/A".into()),
            fmt_p(row.p_rank_vs_best),
        ));
    }
    out.push('\n');
    out.push_str("Usage\n");
    out.push_str(&format!(
        "{:<18} {:>10} {:>14} {:>14} {:>10}\n",
        "method", "steps", "gen_tokens", "out_tokens", "terminal%"
    ));
    for row in &report.usage {
        out.push_str(&format!(
            "{:<18} {:>10.1} {:>14} {:>14} {:>10.1}\n",
            row.method,
            row.mean_selected_steps,
            row.tokens_generated,
            row.tokens_in_solution,
            100.0 * row.terminal_fraction,
        ));
    }
    if !report.correlation.is_empty() {
        out.push('\n');
        out.push_str("Correlation of correctness with step scores by distance to terminal\n");
        out.push_str(&format!(
            "{:<10} {:>8} {:>8}\n",
            "distance", "r_pb", "n"
        ));
        for point in &report.correlation {
            out.push_str(&format!(
                "{:<10} {:>8.3} {:>8}\n",
                point.distance_to_terminal, point.r_pb, point.n
            ));
        }
    }
    out
}

fn render_csv(points: &[CorrelationPoint]) -> String {
    let mut out = String::from("distance_to_terminal,r_pb,n\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.distance_to_terminal, p.r_pb, p.n));
    }
    out
}
