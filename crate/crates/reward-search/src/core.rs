//! Shared domain model: reasoning steps, search states, traces, grading, and
//! usage accounting.
//!
//! A state is a prompt plus an ordered sequence of reasoning steps. A state is
//! terminal when its generated steps contain a `\boxed{...}` prediction, when
//! it reaches the configured maximum depth, or when the policy returned an
//! empty completion (an end-of-text sentinel step). Terminal states without a
//! boxed prediction are gradeable as incorrect and report
//! `terminal_reached = false` in usage counters.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two-character sequence that terminates each reasoning step. Stored step
/// text excludes it.
pub const STEP_DELIMITER: &str = "\n\n";

/// Default cap on reasoning depth; roughly 5x the typical step count of a
/// full solution.
pub const DEFAULT_MAX_DEPTH: usize = 50;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("step text must not contain the step delimiter")]
    DelimiterInStep,
    #[error("non-empty step text requires token_count >= 1")]
    ZeroTokenStep,
    #[error("cannot extend a terminal state")]
    ExtendTerminal,
    #[error("duplicate problem id `{0}`")]
    DuplicateProblemId(String),
    #[error("problems file line {line}: {source}")]
    ProblemParse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("reading problems file")]
    ProblemIo(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// ReasoningStep
// ---------------------------------------------------------------------------

/// One reasoning step: delimiter-free text plus its generation cost in
/// tokens. Empty text marks an end-of-text sentinel (the policy produced no
/// continuation) and costs zero tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    text: String,
    token_count: u64,
}

impl ReasoningStep {
    pub fn new(text: impl Into<String>, token_count: u64) -> Result<Self, CoreError> {
        let text = text.into();
        if text.contains(STEP_DELIMITER) {
            return Err(CoreError::DelimiterInStep);
        }
        if !text.is_empty() && token_count == 0 {
            return Err(CoreError::ZeroTokenStep);
        }
        Ok(Self { text, token_count })
    }

    /// End-of-text sentinel appended when the policy returns an empty
    /// completion; forces the resulting state terminal.
    pub fn end_of_text() -> Self {
        Self {
            text: String::new(),
            token_count: 0,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_count(&self) -> u64 {
        self.token_count
    }

    pub fn is_end_of_text(&self) -> bool {
        self.text.is_empty()
    }
}

// ---------------------------------------------------------------------------
// SearchNode
// ---------------------------------------------------------------------------

/// A partial reasoning state: the root prompt plus the steps taken so far.
///
/// Nodes are immutable after construction except for the cached reward score,
/// which is set at most once (the reward oracle is deterministic per state).
/// Depth always equals the number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    prompt: Arc<str>,
    steps: Vec<ReasoningStep>,
    score: Option<f64>,
    terminal: bool,
}

impl SearchNode {
    /// Root state for a prompt. `max_depth` only matters for the degenerate
    /// `max_depth == 0` case; prompts are never scanned for predictions.
    pub fn root(prompt: impl Into<Arc<str>>, max_depth: usize) -> Self {
        Self {
            prompt: prompt.into(),
            steps: Vec::new(),
            score: None,
            terminal: max_depth == 0,
        }
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    pub fn steps(&self) -> &[ReasoningStep] {
        &self.steps
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    /// Caches the reward score. Scores never change once set.
    pub fn set_score(&mut self, score: f64) {
        debug_assert!(self.score.is_none() || self.score == Some(score));
        self.score = Some(score);
    }

    /// The generated portion of the state: all step texts, each terminated by
    /// the step delimiter. Prediction extraction and terminal detection scan
    /// this, not the prompt, so instruction prompts that mention `\boxed{}`
    /// do not make the root terminal.
    pub fn rendered_steps(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&step.text);
            out.push_str(STEP_DELIMITER);
        }
        out
    }

    /// Full rendered state: prompt followed by the generated steps.
    pub fn rendered(&self) -> String {
        format!("{}{}", self.prompt, self.rendered_steps())
    }

    /// The boxed prediction contained in this state's steps, if any.
    pub fn prediction(&self) -> Option<String> {
        extract_prediction(&self.rendered_steps())
    }

    pub fn token_count(&self) -> u64 {
        self.steps.iter().map(|s| s.token_count).sum()
    }
}

/// Appends one step to a non-terminal state, recomputing the terminal flag
/// against `max_depth`. The child's score is unset.
pub fn concat_state(
    state: &SearchNode,
    step: ReasoningStep,
    max_depth: usize,
) -> Result<SearchNode, CoreError> {
    if state.terminal {
        return Err(CoreError::ExtendTerminal);
    }
    let mut steps = state.steps.clone();
    let end_of_text = step.is_end_of_text();
    steps.push(step);
    let depth = steps.len();
    let mut child = SearchNode {
        prompt: Arc::clone(&state.prompt),
        steps,
        score: None,
        terminal: false,
    };
    child.terminal =
        end_of_text || depth >= max_depth || extract_prediction(&child.rendered_steps()).is_some();
    Ok(child)
}

/// Whether a state is terminal: it contains a boxed prediction in its steps,
/// its depth reached `max_depth`, or it ends with an end-of-text sentinel.
pub fn is_terminal(state: &SearchNode, max_depth: usize) -> bool {
    state.depth() >= max_depth
        || state.steps.last().is_some_and(|s| s.is_end_of_text())
        || state.prediction().is_some()
}

// ---------------------------------------------------------------------------
// Prediction extraction and grading
// ---------------------------------------------------------------------------

/// Returns the content of the last balanced `\boxed{...}` group in `text`,
/// with nested braces matched. Unbalanced groups are skipped.
pub fn extract_prediction(text: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let mut best: Option<String> = None;
    let mut from = 0;
    while let Some(pos) = text[from..].find(MARKER) {
        let open = from + pos + MARKER.len() - 1;
        if let Some(content) = balanced_group(&text[open..]) {
            best = Some(content);
        }
        from = from + pos + MARKER.len();
    }
    best
}

/// Content of the brace group starting at `text[0] == '{'`, or `None` if the
/// braces never balance.
fn balanced_group(text: &str) -> Option<String> {
    debug_assert!(text.starts_with('{'));
    let mut depth = 0usize;
    for (i, ch) in text.char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(text[1..i].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

/// Normalization used for grading: trim, strip matched outer `$` pairs, and
/// collapse internal whitespace runs to a single space.
pub fn normalize_answer(text: &str) -> String {
    let mut s = text.trim();
    while s.len() >= 2 && s.starts_with('$') && s.ends_with('$') {
        s = s[1..s.len() - 1].trim();
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized string equality. No numeric or symbolic equivalence: `1/2` and
/// `0.5` do not match.
pub fn grade(prediction: &str, truth: &str) -> bool {
    normalize_answer(prediction) == normalize_answer(truth)
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// A root-to-leaf path: every prefix state, the per-step reward scores, and
/// the leaf's boxed prediction, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    nodes: Vec<SearchNode>,
    prediction: Option<String>,
    step_scores: Vec<f64>,
}

impl Trace {
    /// Rebuilds the full prefix chain from a leaf. `step_scores` must hold one
    /// score per step.
    pub fn from_leaf(leaf: &SearchNode, step_scores: Vec<f64>, max_depth: usize) -> Self {
        assert_eq!(step_scores.len(), leaf.depth(), "one score per step");
        let mut nodes = Vec::with_capacity(leaf.depth() + 1);
        let mut node = SearchNode::root(Arc::clone(&leaf.prompt), max_depth);
        nodes.push(node.clone());
        for (i, step) in leaf.steps.iter().enumerate() {
            node = concat_state(&node, step.clone(), max_depth)
                .expect("prefix of a valid leaf is extendable");
            node.set_score(step_scores[i]);
            nodes.push(node.clone());
        }
        let prediction = leaf.prediction();
        Self {
            nodes,
            prediction,
            step_scores,
        }
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn leaf(&self) -> &SearchNode {
        self.nodes.last().expect("trace holds at least the root")
    }

    pub fn depth(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn prediction(&self) -> Option<&str> {
        self.prediction.as_deref()
    }

    pub fn step_scores(&self) -> &[f64] {
        &self.step_scores
    }

    pub fn token_count(&self) -> u64 {
        self.leaf().token_count()
    }
}

// ---------------------------------------------------------------------------
// Usage accounting
// ---------------------------------------------------------------------------

/// Resource counters for one search run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounters {
    /// Policy samples requested (one per sampled action).
    pub policy_calls: u64,
    /// Steps actually returned by the policy.
    pub steps_sampled: u64,
    /// Tokens across all sampled text.
    pub tokens_generated: u64,
    /// Tokens in the returned trace only.
    pub tokens_in_solution: u64,
    /// Reward-oracle queries issued.
    pub reward_calls: u64,
    /// Whether the returned trace ends in a boxed prediction (depth-cutoff
    /// and end-of-text terminals count as not reached).
    pub terminal_reached: bool,
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

/// One task: a prompt and its reference answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub prompt: String,
    #[serde(rename = "answer")]
    pub ground_truth: String,
}

/// Reads problems from JSONL: one `{"id", "prompt", "answer"}` object per
/// line. Blank lines are skipped; ids must be unique.
pub fn load_problems(path: &Path) -> Result<Vec<Problem>, CoreError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut problems: Vec<Problem> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(&line)
            .map_err(|source| CoreError::ProblemParse { line: i + 1, source })?;
        if problems.iter().any(|p| p.id == problem.id) {
            return Err(CoreError::DuplicateProblemId(problem.id));
        }
        problems.push(problem);
    }
    Ok(problems)
}

// ---------------------------------------------------------------------------
// Trace persistence
// ---------------------------------------------------------------------------

/// JSON shape for persisted traces: `prompt`, `steps`, `step_scores`,
/// `prediction`, and optionally the producing run's `usage`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub prompt: String,
    pub steps: Vec<ReasoningStep>,
    pub step_scores: Vec<f64>,
    pub prediction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage: Option<UsageCounters>,
}

impl TraceRecord {
    pub fn from_trace(trace: &Trace) -> Self {
        Self {
            prompt: trace.leaf().prompt().to_string(),
            steps: trace.leaf().steps().to_vec(),
            step_scores: trace.step_scores().to_vec(),
            prediction: trace.prediction.clone(),
            usage: None,
        }
    }

    pub fn with_usage(mut self, usage: UsageCounters) -> Self {
        self.usage = Some(usage);
        self
    }
}

impl fmt::Display for ReasoningStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text)
    }
}
