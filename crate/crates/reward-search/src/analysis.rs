//! Statistical methodology for method comparisons: accuracy and rank with
//! standard errors, Wilcoxon signed-rank significance, point-biserial
//! correlation, correlation-by-distance curves, and usage reporting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::core::UsageCounters;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("point-biserial undefined: input holds a single class")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

// ---------------------------------------------------------------------------
// Accuracy and ranks
// ---------------------------------------------------------------------------

/// Per-method evaluation over a problem set; accuracy lists are ordered
/// consistently across methods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub per_problem_accuracy: Vec<f64>,
    pub usage_totals: UsageCounters,
}

/// Mean and standard error (sample standard deviation over sqrt n).
pub fn accuracy_with_se(per_problem: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if per_problem.len() < 2 {
        return Err(AnalysisError::TooFewValues {
            needed: 2,
            got: per_problem.len(),
        });
    }
    let n = per_problem.len() as f64;
    let mean = per_problem.iter().sum::<f64>() / n;
    let var = per_problem.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Ranks methods per problem by accuracy descending, ties averaged, and
/// reports each method's mean rank and standard error across problems.
/// Input is one accuracy row per method, all rows equally long.
pub fn mean_rank_with_se(
    per_problem_by_method: &[Vec<f64>],
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let m = per_problem_by_method.len();
    if m < 2 {
        return Err(AnalysisError::TooFewValues { needed: 2, got: m });
    }
    let p = per_problem_by_method[0].len();
    if p < 2 {
        return Err(AnalysisError::TooFewValues { needed: 2, got: p });
    }
    if per_problem_by_method.iter().any(|row| row.len() != p) {
        return Err(AnalysisError::ShapeMismatch(
            "accuracy rows differ in length".into(),
        ));
    }
    let mut ranks = vec![Vec::with_capacity(p); m];
    for j in 0..p {
        let column: Vec<f64> = per_problem_by_method.iter().map(|row| row[j]).collect();
        for (i, r) in average_ranks_desc(&column).into_iter().enumerate() {
            ranks[i].push(r);
        }
    }
    ranks.iter().map(|r| accuracy_with_se(r)).collect()
}

/// Average ranks for a column, position 1 = highest value; ties receive the
/// mean of the positions they straddle.
fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

/// Which p-value path to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMode {
    /// Exact for at most [`WILCOXON_EXACT_LIMIT`] retained pairs, Normal
    /// approximation above.
    Auto,
    Exact,
    Normal,
}

/// Retained-pair count at or below which the exact null distribution is
/// enumerated (4096 sign patterns).
pub const WILCOXON_EXACT_LIMIT: usize = 12;

/// Two-sided Wilcoxon signed-rank test.
///
/// Zero differences are dropped; ties among absolute differences receive
/// average ranks. The exact path computes the null distribution of the
/// positive-rank sum by convolution; the Normal path applies tie,
/// continuity, and fourth-moment corrections. All-zero differences give
/// p = 1.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    wilcoxon_signed_rank_with_mode(x, y, WilcoxonMode::Auto)
}

pub fn wilcoxon_signed_rank_with_mode(
    x: &[f64],
    y: &[f64],
    mode: WilcoxonMode,
) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(AnalysisError::TooFewValues { needed: 1, got: 0 });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks_asc(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let n = diffs.len();
    let exact = match mode {
        WilcoxonMode::Auto => n <= WILCOXON_EXACT_LIMIT,
        WilcoxonMode::Exact => true,
        WilcoxonMode::Normal => false,
    };
    if exact {
        Ok(wilcoxon_exact_p(&ranks, w_plus))
    } else {
        Ok(wilcoxon_normal_p(&ranks, w_plus))
    }
}

/// Average ranks ascending (rank 1 = smallest).
fn average_ranks_asc(values: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    average_ranks_desc(&neg)
}

/// Exact two-sided p: the null distribution of `W+` over all sign patterns,
/// computed by convolving `(1 + z^{2 r_i})` over doubled ranks (average
/// ranks are half-integers, so doubling keeps sums integral).
fn wilcoxon_exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks
        .iter()
        .map(|r| (2.0 * r).round() as usize)
        .collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in &doubled {
        reach += r;
        for s in (0..=reach).rev() {
            if s >= r && counts[s - r] > 0.0 {
                counts[s] += counts[s - r];
            }
        }
    }
    let patterns: f64 = counts.iter().sum();
    // The null distribution is symmetric about total/2, so
    // 2 min(P(W <= w), P(W >= w)) = 2 P(W <= min(w, S - w)); this form is
    // exactly invariant under swapping the samples.
    let w2 = (2.0 * w_plus).round() as usize;
    let w_lo = w2.min(total - w2);
    let tail: f64 = counts[..=w_lo].iter().sum();
    (2.0 * tail / patterns).min(1.0)
}

/// Normal approximation with tie correction, a continuity correction of one
/// half toward the mean, and a one-term Edgeworth (kurtosis) refinement.
///
/// `W+ = sum r_i B_i` over fair coin signs, so `var = sum r_i^2 / 4` (which
/// reduces to the familiar `n(n+1)(2n+1)/24` minus the tie term) and the
/// fourth cumulant is `-sum r_i^4 / 8`. Without the Edgeworth term the
/// plain corrected normal sits up to ~0.014 from the exact two-sided p near
/// the distribution center at n = 12..14, which breaks regime-boundary
/// consistency.
fn wilcoxon_normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    if var <= 0.0 {
        return 1.0;
    }
    let kappa4: f64 = -ranks.iter().map(|r| r.powi(4)).sum::<f64>() / 8.0;
    let gamma2 = kappa4 / (var * var);
    let centered = w_plus - mean;
    let sign = if centered == 0.0 { 0.0 } else { centered.signum() };
    let corrected = centered - 0.5 * sign;
    let z = -(corrected / var.sqrt()).abs();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let lower_tail = normal.cdf(z) - phi * (gamma2 / 24.0) * (z * z * z - 3.0 * z);
    (2.0 * lower_tail).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Point-biserial correlation
// ---------------------------------------------------------------------------

/// Point-biserial correlation `(M1 - M0)/s_n * sqrt(n1 n0 / n^2)` with the
/// population standard deviation; equals the Pearson correlation of the
/// scores with the 0/1 encoding.
pub fn point_biserial(binary: &[bool], scores: &[f64]) -> Result<f64, AnalysisError> {
    if binary.len() != scores.len() {
        return Err(AnalysisError::LengthMismatch {
            left: binary.len(),
            right: scores.len(),
        });
    }
    if binary.len() < 2 {
        return Err(AnalysisError::TooFewValues {
            needed: 2,
            got: binary.len(),
        });
    }
    let n = binary.len() as f64;
    let n1 = binary.iter().filter(|b| **b).count() as f64;
    let n0 = n - n1;
    if n1 == 0.0 || n0 == 0.0 {
        return Err(AnalysisError::SingleClass);
    }
    let m1 = binary
        .iter()
        .zip(scores)
        .filter(|(b, _)| **b)
        .map(|(_, s)| *s)
        .sum::<f64>()
        / n1;
    let m0 = binary
        .iter()
        .zip(scores)
        .filter(|(b, _)| !**b)
        .map(|(_, s)| *s)
        .sum::<f64>()
        / n0;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(AnalysisError::SingleClass);
    }
    Ok((m1 - m0) / var.sqrt() * (n1 * n0 / (n * n)).sqrt())
}

// ---------------------------------------------------------------------------
// Correlation by distance to terminal
// ---------------------------------------------------------------------------

/// A graded trace reduced to what the correlation needs.
#[derive(Debug, Clone)]
pub struct GradedTrace {
    pub step_scores: Vec<f64>,
    pub correct: bool,
}

/// One correlation estimate at a fixed distance from the terminal step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub distance_to_terminal: usize,
    pub r_pb: f64,
    pub n: usize,
}

/// Point-biserial correlation between trace correctness and the step score
/// `d` steps before the terminal, per distance `d`. Distances with fewer
/// than two traces or a single correctness class are omitted.
pub fn correlation_by_distance(traces: &[GradedTrace]) -> Vec<CorrelationPoint> {
    let max_depth = traces.iter().map(|t| t.step_scores.len()).max().unwrap_or(0);
    let mut points = Vec::new();
    for d in 0..max_depth {
        let mut binary = Vec::new();
        let mut scores = Vec::new();
        for trace in traces {
            let depth = trace.step_scores.len();
            if depth > d {
                binary.push(trace.correct);
                scores.push(trace.step_scores[depth - 1 - d]);
            }
        }
        if let Ok(r_pb) = point_biserial(&binary, &scores) {
            points.push(CorrelationPoint {
                distance_to_terminal: d,
                r_pb,
                n: binary.len(),
            });
        }
    }
    points
}

// ---------------------------------------------------------------------------
// Usage reporting
// ---------------------------------------------------------------------------

/// One run's contribution to the usage table.
#[derive(Debug, Clone, Copy)]
pub struct UsageSample {
    pub selected_steps: u64,
    pub usage: UsageCounters,
}

/// Aggregate usage row per method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UsageRow {
    pub method: String,
    pub mean_selected_steps: f64,
    pub tokens_generated: u64,
    pub tokens_in_solution: u64,
    pub terminal_fraction: f64,
}

/// Per-method aggregates: mean reasoning steps of the selected traces, total
/// generated/solution tokens, and the fraction of runs reaching a boxed
/// terminal.
pub fn usage_report(per_method: &[(String, Vec<UsageSample>)]) -> Vec<UsageRow> {
    per_method
        .iter()
        .map(|(method, samples)| {
            let n = samples.len().max(1) as f64;
            UsageRow {
                method: method.clone(),
                mean_selected_steps: samples.iter().map(|s| s.selected_steps as f64).sum::<f64>()
                    / n,
                tokens_generated: samples.iter().map(|s| s.usage.tokens_generated).sum(),
                tokens_in_solution: samples.iter().map(|s| s.usage.tokens_in_solution).sum(),
                terminal_fraction: samples
                    .iter()
                    .filter(|s| s.usage.terminal_reached)
                    .count() as f64
                    / n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_with_se_examples() {
        let (mean, se) = accuracy_with_se(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((mean - 0.5).abs() < 1e-15);
        assert!((se - (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);

        let (mean, se) = accuracy_with_se(&[0.7, 0.7, 0.7]).unwrap();
        assert!((mean - 0.7).abs() < 1e-15);
        assert!(se.abs() < 1e-12);

        assert!(accuracy_with_se(&[1.0]).is_err());
    }

    #[test]
    fn mean_rank_handles_ties_by_averaging() {
        // two methods, two problems: (0.9, 0.5) and (0.8, 0.8)
        let rows = vec![vec![0.9, 0.8], vec![0.5, 0.8]];
        let ranks = mean_rank_with_se(&rows).unwrap();
        assert!((ranks[0].0 - 1.25).abs() < 1e-15); // [1, 1.5]
        assert!((ranks[1].0 - 1.75).abs() < 1e-15); // [2, 1.5]
    }

    #[test]
    fn mean_rank_identical_rows_average_to_midpoint() {
        let rows = vec![vec![0.5, 0.6], vec![0.5, 0.6], vec![0.5, 0.6]];
        let ranks = mean_rank_with_se(&rows).unwrap();
        for (mean, se) in ranks {
            assert!((mean - 2.0).abs() < 1e-15); // (m+1)/2 for m = 3
            assert_eq!(se, 0.0);
        }
    }

    #[test]
    fn mean_rank_dominating_method() {
        let rows = vec![vec![0.9, 0.9, 0.9], vec![0.1, 0.2, 0.3]];
        let ranks = mean_rank_with_se(&rows).unwrap();
        assert_eq!(ranks[0], (1.0, 0.0));
        assert_eq!(ranks[1], (2.0, 0.0));
    }

    #[test]
    fn rank_conservation_across_methods() {
        let rows = vec![
            vec![0.3, 0.5, 0.2],
            vec![0.3, 0.1, 0.9],
            vec![0.8, 0.5, 0.2],
        ];
        let ranks = mean_rank_with_se(&rows).unwrap();
        let total: f64 = ranks.iter().map(|(m, _)| m).sum();
        assert!((total / 3.0 - 2.0).abs() < 1e-12, "mean rank is (m+1)/2");
    }

    #[test]
    fn wilcoxon_equal_samples_give_one() {
        let x = [0.3, 0.7, 0.9];
        assert_eq!(wilcoxon_signed_rank(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn wilcoxon_is_symmetric_two_sided() {
        let x = [1.0, 2.0, 3.0, 1.5, 0.2, 0.9, 2.2];
        let y = [0.5, 2.5, 1.0, 1.5, 0.4, 1.9, 0.1];
        let a = wilcoxon_signed_rank(&x, &y).unwrap();
        let b = wilcoxon_signed_rank(&y, &x).unwrap();
        assert_eq!(a, b);
        // normal path too
        let long_x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let long_y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).cos()).collect();
        let a = wilcoxon_signed_rank(&long_x, &long_y).unwrap();
        let b = wilcoxon_signed_rank(&long_y, &long_x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wilcoxon_rejects_length_mismatch() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
        assert!(wilcoxon_signed_rank(&[], &[]).is_err());
    }

    #[test]
    fn wilcoxon_known_value_no_ties() {
        // n=5, differences [1, 2, 3, -1, 2]: |d| ranks with ties
        // handled; cross-checked by the enumeration oracle in the
        // acceptance suite. Here only sanity: p in (0, 1].
        let x = [2.0, 3.0, 4.0, 0.0, 3.0];
        let y = [1.0, 1.0, 1.0, 1.0, 1.0];
        let p = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn wilcoxon_exact_and_normal_agree_near_boundary() {
        // sanity for mid-size inputs; the acceptance suite sweeps this
        let x: Vec<f64> = (0..13).map(|i| ((i * 7 + 3) % 13) as f64).collect();
        let y: Vec<f64> = (0..13).map(|i| ((i * 5 + 1) % 11) as f64).collect();
        let exact = wilcoxon_signed_rank_with_mode(&x, &y, WilcoxonMode::Exact).unwrap();
        let normal = wilcoxon_signed_rank_with_mode(&x, &y, WilcoxonMode::Normal).unwrap();
        assert!((exact - normal).abs() < 0.05, "{exact} vs {normal}");
    }

    #[test]
    fn point_biserial_worked_example() {
        let r = point_biserial(&[true, true, false, false], &[0.8, 0.6, 0.2, 0.4]).unwrap();
        assert!((r - 0.8944271909999159).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn point_biserial_perfect_separation() {
        let r = point_biserial(&[true, false], &[1.0, 0.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_biserial_single_class_errors() {
        assert!(matches!(
            point_biserial(&[true, true], &[0.5, 0.7]),
            Err(AnalysisError::SingleClass)
        ));
    }

    #[test]
    fn point_biserial_equals_pearson() {
        let binary = [true, false, true, true, false, false, true];
        let scores = [0.9, 0.2, 0.8, 0.55, 0.3, 0.45, 0.7];
        let r = point_biserial(&binary, &scores).unwrap();
        // Pearson on the 0/1 encoding
        let xs: Vec<f64> = binary.iter().map(|b| f64::from(*b as u8)).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = scores.iter().sum::<f64>() / n;
        let cov: f64 = xs
            .iter()
            .zip(&scores)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let vy: f64 = scores.iter().map(|y| (y - my) * (y - my)).sum();
        let pearson = cov / (vx * vy).sqrt();
        assert!((r - pearson).abs() < 1e-12);
    }

    #[test]
    fn correlation_by_distance_perfect_terminal_signal() {
        let traces = vec![
            GradedTrace {
                step_scores: vec![0.5, 1.0],
                correct: true,
            },
            GradedTrace {
                step_scores: vec![0.5, 0.0],
                correct: false,
            },
            GradedTrace {
                step_scores: vec![0.2, 1.0],
                correct: true,
            },
            GradedTrace {
                step_scores: vec![0.9, 0.0],
                correct: false,
            },
        ];
        let points = correlation_by_distance(&traces);
        let d0 = points
            .iter()
            .find(|p| p.distance_to_terminal == 0)
            .unwrap();
        assert!((d0.r_pb - 1.0).abs() < 1e-12);
        assert_eq!(d0.n, 4);
    }

    #[test]
    fn correlation_by_distance_single_class_is_omitted() {
        let traces = vec![
            GradedTrace {
                step_scores: vec![0.5],
                correct: true,
            },
            GradedTrace {
                step_scores: vec![0.6],
                correct: true,
            },
        ];
        assert!(correlation_by_distance(&traces).is_empty());
    }

    #[test]
    fn usage_report_aggregates() {
        let mk = |terminal: bool, gen: u64, sol: u64| UsageSample {
            selected_steps: 7,
            usage: UsageCounters {
                policy_calls: 10,
                steps_sampled: 10,
                tokens_generated: gen,
                tokens_in_solution: sol,
                reward_calls: 10,
                terminal_reached: terminal,
            },
        };
        let rows = usage_report(&[(
            "m".to_string(),
            vec![mk(true, 100, 10), mk(false, 50, 5)],
        )]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean_selected_steps - 7.0).abs() < 1e-15);
        assert_eq!(rows[0].tokens_generated, 150);
        assert_eq!(rows[0].tokens_in_solution, 15);
        assert!((rows[0].terminal_fraction - 0.5).abs() < 1e-15);
        assert!(rows[0].tokens_generated >= rows[0].tokens_in_solution);
    }
}
