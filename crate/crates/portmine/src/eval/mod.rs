//! Evaluation harness: leave-one-out regret reports, percentile statistics,
//! k-shot simulation, overfit gaps, scalability curves, metafeature
//! diagnostics and the 2-D decision-map export.

mod pca;
pub mod planted;

pub use planted::{generate_planted, generate_planted_with_truth, PlantedTruth};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{fit_decision, fit_standardizer, DecisionModel};
use crate::error::{Error, Result};
use crate::matrix::RegretMatrix;
use crate::mining::{
    best_single, greedy_build, mean_regret, mine_greedy_mean, mine_per_task_best, ser,
    MiningOptions, Portfolio, PortfolioMetric, StopReason,
};
use crate::table::{ConfigTable, TaskRecord, TaskTable, N_METAFEATURES};

/// A regret matrix with its aligned task and config tables. Alignment holds
/// by construction: the matrix embeds both tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    regret: RegretMatrix,
}

impl Bundle {
    pub fn new(regret: RegretMatrix) -> Self {
        Self { regret }
    }

    pub fn regret(&self) -> &RegretMatrix {
        &self.regret
    }

    pub fn tasks(&self) -> &TaskTable {
        self.regret.tasks()
    }

    pub fn configs(&self) -> &ConfigTable {
        self.regret.configs()
    }

    pub fn n_tasks(&self) -> usize {
        self.regret.n_tasks()
    }

    pub fn n_configs(&self) -> usize {
        self.regret.n_configs()
    }
}

/// Summary statistics in the layout of the regret tables: mean, population
/// standard deviation and interpolated percentiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub p99: f64,
    pub n: usize,
}

/// Linear interpolation at rank `q * (n - 1)` over sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        sorted[lo.min(n - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Mean, population std and p25/p50/p75/p95/p99 of a non-empty list.
pub fn regret_stats(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Stats {
        mean,
        std: var.sqrt(),
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.50),
        p75: percentile(&sorted, 0.75),
        p95: percentile(&sorted, 0.95),
        p99: percentile(&sorted, 0.99),
        n: values.len(),
    })
}

/// Mining strategy evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Greedy sum-of-excess-regret miner (the options control the ablations:
    /// mean metric, disabled early stopping).
    Ours,
    /// One config per training task, deduplicated.
    PerTaskBest,
    /// Greedy mean-regret miner with a fixed size.
    GreedyMean,
    /// The single best config under the options' metric.
    SingleBest,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ours => "ours",
            Strategy::PerTaskBest => "per_task_best",
            Strategy::GreedyMean => "greedy_mean",
            Strategy::SingleBest => "single_best",
        }
    }
}

/// Mine a portfolio with the given strategy. For `GreedyMean` the size is
/// `max_size` when set, otherwise `min(|configs|, |tasks|)`.
pub fn mine_with_strategy(
    r: &RegretMatrix,
    strategy: Strategy,
    opts: &MiningOptions,
) -> Result<Portfolio> {
    match strategy {
        Strategy::Ours => greedy_build(r, opts),
        Strategy::PerTaskBest => mine_per_task_best(r),
        Strategy::GreedyMean => {
            let size = opts
                .max_size
                .unwrap_or_else(|| r.n_configs().min(r.n_tasks()));
            mine_greedy_mean(r, size)
        }
        Strategy::SingleBest => {
            let config = best_single(r, opts.metric, opts.epsilon)?;
            Ok(Portfolio {
                members: vec![config],
                trace: Vec::new(),
                epsilon: opts.epsilon,
                metric: PortfolioMetric::SingleBest,
                stop_reason: StopReason::Exhausted,
            })
        }
    }
}

/// Per-held-out-task outcome of a leave-one-out run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    /// Sum-of-excess-regret of the mined portfolio on the training tasks.
    pub train_ser: f64,
    /// Mean regret of the chosen assignments on the training tasks — the
    /// train-side estimate the overfit gap is measured against.
    pub train_mean_regret: f64,
    /// Regret of the recommended config on the held-out task.
    pub test_regret: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kshot_regret: Option<f64>,
}

/// Leave-one-out report for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub strategy: String,
    pub per_task: Vec<TaskOutcome>,
    /// Statistics over the per-task test regrets.
    pub stats: Stats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kshot_stats: Option<Stats>,
}

/// Drop one task from a bundle: its column leaves the regret matrix and its
/// record leaves the task table. Config rows are untouched.
pub fn split_loo(bundle: &Bundle, held_out: usize) -> Result<(Bundle, TaskRecord)> {
    let n = bundle.n_tasks();
    if held_out >= n {
        return Err(Error::IndexOutOfRange {
            index: held_out,
            len: n,
        });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != held_out).collect();
    let sub = bundle.regret().select_tasks(&keep)?;
    Ok((Bundle::new(sub), bundle.tasks().get(held_out).clone()))
}

/// Leave-one-out cross-validation: for every task, mine and fit on the
/// remaining tasks only, recommend for the held-out task's metafeatures and
/// score that recommendation on the full matrix.
pub fn loo_cv(bundle: &Bundle, strategy: Strategy, opts: &MiningOptions) -> Result<RegretReport> {
    loo_cv_kshot(bundle, strategy, opts, None)
}

/// [`loo_cv`] with an optional k-shot column: the minimum regret over the
/// first `k` members of each training portfolio, looked up on the held-out
/// task.
pub fn loo_cv_kshot(
    bundle: &Bundle,
    strategy: Strategy,
    opts: &MiningOptions,
    kshot: Option<usize>,
) -> Result<RegretReport> {
    let n = bundle.n_tasks();
    if n < 2 {
        return Err(Error::TooFewTasks { needed: 2, got: n });
    }
    let per_task: Vec<TaskOutcome> = (0..n)
        .into_par_iter()
        .map(|held| -> Result<TaskOutcome> {
            let (train, held_task) = split_loo(bundle, held)?;
            // Leakage guard: nothing mined or fitted below may see the
            // held-out task.
            assert!(
                train.tasks().index_of(&held_task.task_id).is_none(),
                "held-out task leaked into the training split"
            );
            let portfolio = mine_with_strategy(train.regret(), strategy, opts)?;
            let model = fit_decision(&portfolio, train.regret(), train.tasks())?;
            let rec = model.recommend(&held_task)?;
            let row = bundle
                .configs()
                .index_of(&rec.config.config_id)
                .expect("recommended config exists in the full matrix");
            Ok(TaskOutcome {
                task_id: held_task.task_id,
                train_ser: ser(train.regret(), &portfolio.members, opts.epsilon)?,
                train_mean_regret: mean_regret(train.regret(), &portfolio.members)?,
                test_regret: bundle.regret().value(row, held),
                kshot_regret: kshot.map(|k| simulate_kshot(bundle.regret(), &portfolio, k, held)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let tests: Vec<f64> = per_task.iter().map(|o| o.test_regret).collect();
    let stats = regret_stats(&tests)?;
    let kshot_stats = match kshot {
        Some(_) => {
            let ks: Vec<f64> = per_task.iter().filter_map(|o| o.kshot_regret).collect();
            Some(regret_stats(&ks)?)
        }
        None => None,
    };
    Ok(RegretReport {
        strategy: strategy.name().to_string(),
        per_task,
        stats,
        kshot_stats,
    })
}

/// Best regret achievable by trying the first `min(k, |members|)` portfolio
/// configs on a task, one after the other.
pub fn simulate_kshot(r: &RegretMatrix, ordered: &Portfolio, k: usize, task: usize) -> f64 {
    assert!(!ordered.members.is_empty(), "portfolio must be non-empty");
    ordered
        .members
        .iter()
        .take(k.max(1).min(ordered.members.len()))
        .map(|&c| r.value(c, task))
        .fold(f64::INFINITY, f64::min)
}

/// Per-task difference between test regret and the train-side estimate;
/// positive means training was optimistic.
pub fn overfit_gap(report: &RegretReport) -> Vec<(String, f64)> {
    report
        .per_task
        .iter()
        .map(|o| (o.task_id.clone(), o.test_regret - o.train_mean_regret))
        .collect()
}

/// Portfolio size as the training set grows: mine on every prefix of
/// `order` and record the resulting size.
pub fn scalability_curve(
    bundle: &Bundle,
    order: &[String],
    strategy: Strategy,
    opts: &MiningOptions,
) -> Result<Vec<(usize, usize)>> {
    if order.is_empty() {
        return Err(Error::TooFewTasks { needed: 1, got: 0 });
    }
    let mut indices = Vec::with_capacity(order.len());
    let mut seen = std::collections::HashSet::new();
    for id in order {
        let idx = bundle
            .tasks()
            .index_of(id)
            .ok_or_else(|| Error::UnknownTaskId {
                task_id: id.clone(),
            })?;
        if !seen.insert(idx) {
            return Err(Error::DuplicateTaskId {
                task_id: id.clone(),
            });
        }
        indices.push(idx);
    }
    (1..=indices.len())
        .into_par_iter()
        .map(|prefix| {
            let sub = bundle.regret().select_tasks(&indices[..prefix])?;
            let portfolio = mine_with_strategy(&sub, strategy, opts)?;
            Ok((prefix, portfolio.members.len()))
        })
        .collect()
}

/// Spearman rank correlation between the standardized-metafeature distance
/// from `task` to every other task and the regret, on `task`, of each other
/// task's per-task-best config.
pub fn metafeature_rank_correlation(bundle: &Bundle, task: usize) -> Result<f64> {
    let n = bundle.n_tasks();
    if n < 3 {
        return Err(Error::TooFewTasks { needed: 3, got: n });
    }
    if task >= n {
        return Err(Error::IndexOutOfRange { index: task, len: n });
    }
    let standardizer = fit_standardizer(bundle.tasks())?;
    let query = standardizer.standardize(bundle.tasks().get(task));
    let r = bundle.regret();
    let mut distances = Vec::with_capacity(n - 1);
    let mut transfer = Vec::with_capacity(n - 1);
    for u in 0..n {
        if u == task {
            continue;
        }
        let v = standardizer.standardize(bundle.tasks().get(u));
        let d2: f64 = (0..N_METAFEATURES)
            .map(|d| (query[d] - v[d]) * (query[d] - v[d]))
            .sum();
        distances.push(d2.sqrt());
        let mut best = 0;
        for c in 1..r.n_configs() {
            if r.value(c, u) < r.value(best, u) {
                best = c;
            }
        }
        transfer.push(r.value(best, task));
    }
    Ok(spearman(&distances, &transfer))
}

/// Average ranks (ties share the mean of their positions).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side has no rank variation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    // cov / sqrt(va * vb) is exactly ±1 on perfectly (anti)concordant
    // inputs, where cov == ±va == ±vb.
    cov / (va * vb).sqrt()
}

/// One anchor projected onto the top two principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMapRow {
    pub task_id: String,
    pub pc1: f64,
    pub pc2: f64,
    pub member_index: usize,
}

/// Project the model's standardized anchors onto the top two principal
/// components of their covariance (components ordered by descending
/// eigenvalue; each component's sign fixed so its largest-magnitude loading
/// is positive).
pub fn export_decision_map(model: &DecisionModel) -> Result<Vec<DecisionMapRow>> {
    let n = model.anchors.len();
    if n < 2 {
        return Err(Error::TooFewAnchors { needed: 2, got: n });
    }
    let mut mean = [0.0; N_METAFEATURES];
    for a in &model.anchors {
        for d in 0..N_METAFEATURES {
            mean[d] += a.standardized[d];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = [[0.0; N_METAFEATURES]; N_METAFEATURES];
    for a in &model.anchors {
        let centered: [f64; N_METAFEATURES] =
            std::array::from_fn(|d| a.standardized[d] - mean[d]);
        for i in 0..N_METAFEATURES {
            for j in 0..N_METAFEATURES {
                cov[i][j] += centered[i] * centered[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for x in row.iter_mut() {
            *x /= n as f64;
        }
    }
    let axes = pca::principal_axes(cov);
    let (e1, e2) = (&axes[0].1, &axes[1].1);
    Ok(model
        .anchors
        .iter()
        .map(|a| {
            let mut pc1 = 0.0;
            let mut pc2 = 0.0;
            for d in 0..N_METAFEATURES {
                let centered = a.standardized[d] - mean[d];
                pc1 += centered * e1[d];
                pc2 += centered * e2[d];
            }
            DecisionMapRow {
                task_id: a.task.task_id.clone(),
                pc1,
                pc2,
                member_index: a.member,
            }
        })
        .collect())
}
