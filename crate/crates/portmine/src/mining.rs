//! Portfolio construction.
//!
//! The main miner grows a portfolio greedily, at each step adding the config
//! whose one-config extension minimizes the sum-of-excess-regret over the
//! training tasks, and stops early once an extension no longer improves the
//! objective by a small relative margin. Baseline miners (per-task best,
//! greedy mean, best single config) cover the comparison strategies of the
//! evaluation harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RegretMatrix;

/// Default relative tolerance for detecting score ties.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

/// Default per-task target regret.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Objective minimized by the greedy miner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Sum of excess regret: per-task improvement below the target earns no
    /// further credit, so coverage of poorly-served tasks dominates.
    Ser,
    /// Plain mean regret (ablation; a strong task can mask a weak one).
    Mean,
}

/// Label identifying how a portfolio was mined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioMetric {
    Ser,
    Mean,
    PerTaskBest,
    GreedyMean,
    SingleBest,
}

impl From<Metric> for PortfolioMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Ser => PortfolioMetric::Ser,
            Metric::Mean => PortfolioMetric::Mean,
        }
    }
}

/// Why the miner stopped extending the portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    EarlyStopped,
    Exhausted,
    SizeCap,
}

/// One accepted greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Config index chosen at this step.
    pub config: usize,
    /// Sum-of-excess-regret of the portfolio after the step.
    pub ser: f64,
    /// Mean regret of the portfolio after the step.
    pub mean_regret: f64,
}

/// An ordered set of config indices plus the mining trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub members: Vec<usize>,
    pub trace: Vec<TraceStep>,
    pub epsilon: f64,
    pub metric: PortfolioMetric,
    pub stop_reason: StopReason,
}

/// Options for [`greedy_build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningOptions {
    /// Target per-task regret; improvement below it earns no credit.
    pub epsilon: f64,
    pub metric: Metric,
    pub early_stopping: bool,
    /// Optional hard cap on portfolio size.
    pub max_size: Option<usize>,
    /// Relative tolerance for score ties.
    pub tie_tolerance: f64,
}

impl Default for MiningOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            metric: Metric::Ser,
            early_stopping: true,
            max_size: None,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

impl MiningOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidOptions {
                reason: format!("epsilon must be a finite non-negative real, got {}", self.epsilon),
            });
        }
        if !(self.tie_tolerance >= 0.0 && self.tie_tolerance.is_finite()) {
            return Err(Error::InvalidOptions {
                reason: format!("tie_tolerance must be finite and >= 0, got {}", self.tie_tolerance),
            });
        }
        if self.max_size == Some(0) {
            return Err(Error::InvalidOptions {
                reason: "max_size must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Sum over tasks of `max(min regret over members - epsilon, 0)`.
/// An empty member set scores infinite.
pub fn ser(r: &RegretMatrix, members: &[usize], epsilon: f64) -> Result<f64> {
    if members.is_empty() {
        return Ok(f64::INFINITY);
    }
    check_members(r, members)?;
    let mut total = 0.0;
    for t in 0..r.n_tasks() {
        let m = members
            .iter()
            .map(|&c| r.value(c, t))
            .fold(f64::INFINITY, f64::min);
        total += (m - epsilon).max(0.0);
    }
    Ok(total)
}

/// Mean over tasks of the minimum regret over members.
pub fn mean_regret(r: &RegretMatrix, members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyPortfolio);
    }
    check_members(r, members)?;
    let mut total = 0.0;
    for t in 0..r.n_tasks() {
        total += members
            .iter()
            .map(|&c| r.value(c, t))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(total / r.n_tasks() as f64)
}

fn check_members(r: &RegretMatrix, members: &[usize]) -> Result<()> {
    let len = r.n_configs();
    for &c in members {
        if c >= len {
            return Err(Error::IndexOutOfRange { index: c, len });
        }
    }
    Ok(())
}

/// `a` and `b` are tied within relative tolerance `tol`.
fn tied(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Scores of a one-config extension.
#[derive(Clone, Copy)]
struct ExtensionScore {
    config: usize,
    /// Objective under the mining metric.
    score: f64,
    /// Mean regret of the extended set (tie-break key).
    mean: f64,
}

/// Score `current ∪ {config}` against `cur_min`, the per-task minimum regret
/// of the current members (infinite when the portfolio is empty).
fn score_extension(r: &RegretMatrix, cur_min: &[f64], config: usize, epsilon: f64) -> (f64, f64) {
    let row = r.row(config);
    let mut excess = 0.0;
    let mut sum = 0.0;
    for (t, &v) in row.iter().enumerate() {
        let m = cur_min[t].min(v);
        excess += (m - epsilon).max(0.0);
        sum += m;
    }
    (excess, sum / r.n_tasks() as f64)
}

/// Among candidates, pick the one minimizing `score`; ties within the
/// relative tolerance are broken by lower extension mean regret, then by
/// lower config index.
fn select_extension(scores: &[ExtensionScore], tol: f64) -> Result<ExtensionScore> {
    let min_score = scores.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    if !min_score.is_finite() {
        return Err(Error::NonFiniteScores);
    }
    let best = scores
        .iter()
        .filter(|s| tied(s.score, min_score, tol))
        .min_by(|a, b| {
            a.mean
                .total_cmp(&b.mean)
                .then_with(|| a.config.cmp(&b.config))
        })
        .copied()
        .expect("tie set contains the minimum");
    Ok(best)
}

/// Greedy portfolio building with early stopping.
///
/// Starting from an empty set, each iteration scores every one-config
/// extension under the chosen metric and accepts the best one. The loop ends
/// when the objective reaches the target `epsilon`, when no extension
/// improves it by more than a relative factor of `epsilon / 2` (early stop,
/// returning the unextended portfolio), when candidates are exhausted, or
/// when `max_size` is hit.
pub fn greedy_build(r: &RegretMatrix, opts: &MiningOptions) -> Result<Portfolio> {
    opts.validate()?;
    if r.is_empty() {
        return Err(Error::EmptyMatrix);
    }

    let n_tasks = r.n_tasks();
    let mut candidates: Vec<usize> = (0..r.n_configs()).collect();
    let mut cur_min = vec![f64::INFINITY; n_tasks];
    let mut members = Vec::new();
    let mut trace = Vec::new();
    let mut objective = f64::INFINITY;

    let stop_reason = loop {
        let scores: Vec<ExtensionScore> = candidates
            .par_iter()
            .map(|&c| {
                let (excess, mean) = score_extension(r, &cur_min, c, opts.epsilon);
                ExtensionScore {
                    config: c,
                    score: match opts.metric {
                        Metric::Ser => excess,
                        Metric::Mean => mean,
                    },
                    mean,
                }
            })
            .collect();

        let min_score = scores.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
        if !min_score.is_finite() {
            return Err(Error::NonFiniteScores);
        }
        // The early-stop comparison needs a previous objective; the first
        // iteration always accepts.
        if opts.early_stopping
            && objective.is_finite()
            && (1.0 - opts.epsilon / 2.0) * objective < min_score
        {
            break StopReason::EarlyStopped;
        }

        let chosen = select_extension(&scores, opts.tie_tolerance)?;
        for t in 0..n_tasks {
            cur_min[t] = cur_min[t].min(r.value(chosen.config, t));
        }
        members.push(chosen.config);
        candidates.retain(|&c| c != chosen.config);
        objective = chosen.score;

        let mut ser_after = 0.0;
        let mut sum_after = 0.0;
        for &m in cur_min.iter() {
            ser_after += (m - opts.epsilon).max(0.0);
            sum_after += m;
        }
        trace.push(TraceStep {
            config: chosen.config,
            ser: ser_after,
            mean_regret: sum_after / n_tasks as f64,
        });

        if objective <= opts.epsilon {
            break StopReason::TargetReached;
        }
        if Some(members.len()) == opts.max_size {
            break StopReason::SizeCap;
        }
        if candidates.is_empty() {
            break StopReason::Exhausted;
        }
    };

    Ok(Portfolio {
        members,
        trace,
        epsilon: opts.epsilon,
        metric: opts.metric.into(),
        stop_reason,
    })
}

/// One config per task: the column argmin (ties to the lowest index),
/// deduplicated, ordered by the first task that introduced each config.
pub fn mine_per_task_best(r: &RegretMatrix) -> Result<Portfolio> {
    if r.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut members = Vec::new();
    for t in 0..r.n_tasks() {
        let mut best = 0;
        for c in 1..r.n_configs() {
            if r.value(c, t) < r.value(best, t) {
                best = c;
            }
        }
        if !members.contains(&best) {
            members.push(best);
        }
    }
    Ok(Portfolio {
        members,
        trace: Vec::new(),
        epsilon: 0.0,
        metric: PortfolioMetric::PerTaskBest,
        stop_reason: StopReason::Exhausted,
    })
}

/// Greedy growth minimizing the mean regret of the extended set, with no
/// target clipping and no early stop; exactly `size` members, in pick order.
pub fn mine_greedy_mean(r: &RegretMatrix, size: usize) -> Result<Portfolio> {
    if r.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if size == 0 {
        return Err(Error::InvalidOptions {
            reason: "size must be positive".into(),
        });
    }
    if size > r.n_configs() {
        return Err(Error::SizeTooLarge {
            requested: size,
            available: r.n_configs(),
        });
    }

    let n_tasks = r.n_tasks();
    let mut candidates: Vec<usize> = (0..r.n_configs()).collect();
    let mut cur_min = vec![f64::INFINITY; n_tasks];
    let mut members = Vec::new();
    let mut trace = Vec::new();

    while members.len() < size {
        let scores: Vec<ExtensionScore> = candidates
            .par_iter()
            .map(|&c| {
                let (_, mean) = score_extension(r, &cur_min, c, 0.0);
                ExtensionScore {
                    config: c,
                    score: mean,
                    mean,
                }
            })
            .collect();
        let chosen = select_extension(&scores, DEFAULT_TIE_TOLERANCE)?;
        for t in 0..n_tasks {
            cur_min[t] = cur_min[t].min(r.value(chosen.config, t));
        }
        members.push(chosen.config);
        candidates.retain(|&c| c != chosen.config);

        let mut ser_after = 0.0;
        let mut sum_after = 0.0;
        for &m in cur_min.iter() {
            ser_after += m.max(0.0);
            sum_after += m;
        }
        trace.push(TraceStep {
            config: chosen.config,
            ser: ser_after,
            mean_regret: sum_after / n_tasks as f64,
        });
    }

    Ok(Portfolio {
        members,
        trace,
        epsilon: 0.0,
        metric: PortfolioMetric::GreedyMean,
        stop_reason: StopReason::SizeCap,
    })
}

/// The single config minimizing the chosen criterion, with the same tie
/// chain as the greedy miner's first step.
pub fn best_single(r: &RegretMatrix, criterion: Metric, epsilon: f64) -> Result<usize> {
    if r.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let cur_min = vec![f64::INFINITY; r.n_tasks()];
    let scores: Vec<ExtensionScore> = (0..r.n_configs())
        .map(|c| {
            let (excess, mean) = score_extension(r, &cur_min, c, epsilon);
            ExtensionScore {
                config: c,
                score: match criterion {
                    Metric::Ser => excess,
                    Metric::Mean => mean,
                },
                mean,
            }
        })
        .collect();
    Ok(select_extension(&scores, DEFAULT_TIE_TOLERANCE)?.config)
}
