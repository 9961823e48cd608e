//! Performance, baseline and regret matrices.
//!
//! Rows are configurations, columns are tasks. A performance cell is the
//! arithmetic mean of the per-fold losses observed for that (config, task)
//! pair; cells with no successful fold are filled per [`MissingPolicy`].
//! The regret matrix subtracts the per-task baseline from every column.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ConfigTable, EvaluationRecord, TaskTable};

/// How to fill cells that have no successful evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Fill with the worst (largest) observed loss in the task column, so a
    /// failing config can never be rewarded for failing.
    #[default]
    WorstInColumn,
    /// Refuse to build a matrix with missing cells.
    Reject,
}

/// Dense |C|×|T| mean-loss matrix with an observed mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMatrix {
    configs: ConfigTable,
    tasks: TaskTable,
    values: Vec<f64>,
    observed: Vec<bool>,
    policy: MissingPolicy,
}

impl PerformanceMatrix {
    pub fn configs(&self) -> &ConfigTable {
        &self.configs
    }

    pub fn tasks(&self) -> &TaskTable {
        &self.tasks
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn value(&self, config: usize, task: usize) -> f64 {
        self.values[config * self.n_tasks() + task]
    }

    pub fn is_observed(&self, config: usize, task: usize) -> bool {
        self.observed[config * self.n_tasks() + task]
    }

    pub fn policy(&self) -> MissingPolicy {
        self.policy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Best achievable loss per task: the reference an evaluation is judged
/// against. Derived as the per-column minimum unless supplied externally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineVector {
    pub task_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl BaselineVector {
    pub fn new(task_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if task_ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                reason: format!(
                    "baseline has {} ids but {} values",
                    task_ids.len(),
                    values.len()
                ),
            });
        }
        Ok(Self { task_ids, values })
    }
}

/// Dense |C|×|T| regret matrix: performance minus the per-task baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretMatrix {
    configs: ConfigTable,
    tasks: TaskTable,
    values: Vec<f64>,
}

impl RegretMatrix {
    /// Assemble a regret matrix from parts, validating dimensions.
    pub fn from_parts(configs: ConfigTable, tasks: TaskTable, values: Vec<f64>) -> Result<Self> {
        if values.len() != configs.len() * tasks.len() {
            return Err(Error::DimensionMismatch {
                reason: format!(
                    "{} values for a {}x{} matrix",
                    values.len(),
                    configs.len(),
                    tasks.len()
                ),
            });
        }
        Ok(Self {
            configs,
            tasks,
            values,
        })
    }

    pub fn configs(&self) -> &ConfigTable {
        &self.configs
    }

    pub fn tasks(&self) -> &TaskTable {
        &self.tasks
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn value(&self, config: usize, task: usize) -> f64 {
        self.values[config * self.n_tasks() + task]
    }

    pub fn row(&self, config: usize) -> &[f64] {
        let w = self.n_tasks();
        &self.values[config * w..(config + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty() || self.tasks.is_empty()
    }

    /// Copy of this matrix restricted to the given task columns, in the
    /// given order. Config rows are untouched.
    pub fn select_tasks(&self, task_indices: &[usize]) -> Result<Self> {
        let n_t = self.n_tasks();
        for &t in task_indices {
            if t >= n_t {
                return Err(Error::IndexOutOfRange { index: t, len: n_t });
            }
        }
        let tasks = TaskTable::new(
            task_indices
                .iter()
                .map(|&t| self.tasks.get(t).clone())
                .collect(),
        )?;
        let mut values = Vec::with_capacity(self.n_configs() * task_indices.len());
        for c in 0..self.n_configs() {
            for &t in task_indices {
                values.push(self.value(c, t));
            }
        }
        Self::from_parts(self.configs.clone(), tasks, values)
    }
}

/// Per-cell accumulator: sum and count of successful fold losses, in record
/// order, so that incremental extension reproduces a full rebuild bit for bit.
#[derive(Default, Clone, Copy)]
struct CellAcc {
    sum: f64,
    count: u32,
}

fn accumulate_cells(
    records: &[EvaluationRecord],
    config_index: &HashMap<&str, usize>,
    task_index: &HashMap<&str, usize>,
    n_tasks: usize,
    cells: &mut [CellAcc],
    seen: &mut HashSet<(usize, usize, u32)>,
) -> Result<()> {
    for r in records {
        let &c = config_index
            .get(r.config_id.as_str())
            .ok_or_else(|| Error::UnknownId {
                id: r.config_id.clone(),
            })?;
        let &t = task_index
            .get(r.task_id.as_str())
            .ok_or_else(|| Error::UnknownId {
                id: r.task_id.clone(),
            })?;
        if !seen.insert((c, t, r.fold)) {
            return Err(Error::DuplicateKey {
                task_id: r.task_id.clone(),
                config_id: r.config_id.clone(),
                fold: r.fold,
            });
        }
        if let Some(loss) = r.loss {
            let cell = &mut cells[c * n_tasks + t];
            cell.sum += loss;
            cell.count += 1;
        }
    }
    Ok(())
}

fn finalize_matrix(
    configs: ConfigTable,
    tasks: TaskTable,
    cells: &[CellAcc],
    policy: MissingPolicy,
) -> Result<PerformanceMatrix> {
    let n_c = configs.len();
    let n_t = tasks.len();
    let mut values = vec![0.0; n_c * n_t];
    let mut observed = vec![false; n_c * n_t];

    for c in 0..n_c {
        for t in 0..n_t {
            let cell = cells[c * n_t + t];
            if cell.count > 0 {
                values[c * n_t + t] = cell.sum / cell.count as f64;
                observed[c * n_t + t] = true;
            }
        }
    }

    for t in 0..n_t {
        let mut worst = f64::NEG_INFINITY;
        let mut any = false;
        for c in 0..n_c {
            if observed[c * n_t + t] {
                worst = worst.max(values[c * n_t + t]);
                any = true;
            }
        }
        if !any {
            return Err(Error::EmptyColumn {
                task_id: tasks.get(t).task_id.clone(),
            });
        }
        for c in 0..n_c {
            if !observed[c * n_t + t] {
                match policy {
                    MissingPolicy::WorstInColumn => values[c * n_t + t] = worst,
                    MissingPolicy::Reject => {
                        return Err(Error::MissingCell {
                            task_id: tasks.get(t).task_id.clone(),
                            config_id: configs.get(c).config_id.clone(),
                        })
                    }
                }
            }
        }
    }

    Ok(PerformanceMatrix {
        configs,
        tasks,
        values,
        observed,
        policy,
    })
}

/// Build the |C|×|T| performance matrix from evaluation records.
///
/// Every record must reference a known config and task. Cell values are the
/// arithmetic mean of that cell's successful fold losses; unobserved cells
/// are filled per `policy`. A task no config ever succeeded on is an error.
pub fn build_performance_matrix(
    records: &[EvaluationRecord],
    configs: &ConfigTable,
    tasks: &TaskTable,
    policy: MissingPolicy,
) -> Result<PerformanceMatrix> {
    if records.is_empty() || configs.is_empty() || tasks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let config_index = configs.index_map();
    let task_index = tasks.index_map();
    let mut cells = vec![CellAcc::default(); configs.len() * tasks.len()];
    let mut seen = HashSet::with_capacity(records.len());
    accumulate_cells(
        records,
        &config_index,
        &task_index,
        tasks.len(),
        &mut cells,
        &mut seen,
    )?;
    finalize_matrix(configs.clone(), tasks.clone(), &cells, policy)
}

/// The per-task reference loss. Returns `explicit` when given (reordered to
/// match the matrix columns), otherwise the per-column minimum over observed
/// cells.
pub fn compute_baseline(
    matrix: &PerformanceMatrix,
    explicit: Option<&BaselineVector>,
) -> Result<BaselineVector> {
    let task_ids: Vec<String> = matrix.tasks().iter().map(|t| t.task_id.clone()).collect();
    if let Some(explicit) = explicit {
        let by_id: HashMap<&str, f64> = explicit
            .task_ids
            .iter()
            .zip(&explicit.values)
            .map(|(id, &v)| (id.as_str(), v))
            .collect();
        let mut values = Vec::with_capacity(task_ids.len());
        for id in &task_ids {
            match by_id.get(id.as_str()) {
                Some(&v) => values.push(v),
                None => {
                    return Err(Error::CoverageGap {
                        task_id: id.clone(),
                    })
                }
            }
        }
        return BaselineVector::new(task_ids, values);
    }

    let mut values = Vec::with_capacity(matrix.n_tasks());
    for t in 0..matrix.n_tasks() {
        let mut best = f64::INFINITY;
        for c in 0..matrix.n_configs() {
            if matrix.is_observed(c, t) {
                best = best.min(matrix.value(c, t));
            }
        }
        values.push(best);
    }
    BaselineVector::new(task_ids, values)
}

/// Regret = performance minus baseline, column-wise. Negative entries mean a
/// candidate beat the reference on that task.
pub fn compute_regret(matrix: &PerformanceMatrix, baseline: &BaselineVector) -> Result<RegretMatrix> {
    let ids: Vec<&str> = matrix.tasks().iter().map(|t| t.task_id.as_str()).collect();
    let bids: Vec<&str> = baseline.task_ids.iter().map(|s| s.as_str()).collect();
    if ids != bids {
        return Err(Error::DimensionMismatch {
            reason: "baseline task list differs from matrix columns".into(),
        });
    }
    let n_t = matrix.n_tasks();
    let mut values = Vec::with_capacity(matrix.n_configs() * n_t);
    for c in 0..matrix.n_configs() {
        for t in 0..n_t {
            values.push(matrix.value(c, t) - baseline.values[t]);
        }
    }
    RegretMatrix::from_parts(matrix.configs().clone(), matrix.tasks().clone(), values)
}

/// Extend a performance matrix with new configs and/or tasks plus their
/// evaluation records. The result is bit-identical to rebuilding from the
/// union of all records: observed cells are carried over unchanged and
/// imputed cells are recomputed against the extended columns.
pub fn update_incremental(
    matrix: &PerformanceMatrix,
    new_records: &[EvaluationRecord],
    new_configs: &[crate::table::ConfigRecord],
    new_tasks: &[crate::table::TaskRecord],
) -> Result<PerformanceMatrix> {
    // Reject id collisions with the existing tables.
    for c in new_configs {
        if matrix.configs().index_of(&c.config_id).is_some() {
            return Err(Error::DuplicateConfigId {
                config_id: c.config_id.clone(),
            });
        }
    }
    for t in new_tasks {
        if matrix.tasks().index_of(&t.task_id).is_some() {
            return Err(Error::DuplicateTaskId {
                task_id: t.task_id.clone(),
            });
        }
    }

    let mut configs: Vec<_> = matrix.configs().records().to_vec();
    configs.extend_from_slice(new_configs);
    let configs = ConfigTable::new(configs)?;
    let mut tasks: Vec<_> = matrix.tasks().records().to_vec();
    tasks.extend_from_slice(new_tasks);
    let tasks = TaskTable::new(tasks)?;

    let n_c = configs.len();
    let n_t = tasks.len();
    let old_c = matrix.n_configs();
    let old_t = matrix.n_tasks();
    let config_index = configs.index_map();
    let task_index = tasks.index_map();

    let mut cells = vec![CellAcc::default(); n_c * n_t];
    let mut seen = HashSet::with_capacity(new_records.len());
    accumulate_cells(
        new_records,
        &config_index,
        &task_index,
        n_t,
        &mut cells,
        &mut seen,
    )?;

    // New records may only address cells with at least one new id; a record
    // for an existing (config, task) pair collides with an already-built cell.
    for r in new_records {
        let c = config_index[r.config_id.as_str()];
        let t = task_index[r.task_id.as_str()];
        if c < old_c && t < old_t {
            return Err(Error::DuplicateKey {
                task_id: r.task_id.clone(),
                config_id: r.config_id.clone(),
                fold: r.fold,
            });
        }
    }

    let mut values = vec![0.0; n_c * n_t];
    let mut observed = vec![false; n_c * n_t];
    for c in 0..n_c {
        for t in 0..n_t {
            if c < old_c && t < old_t {
                if matrix.is_observed(c, t) {
                    values[c * n_t + t] = matrix.value(c, t);
                    observed[c * n_t + t] = true;
                }
            } else {
                let cell = cells[c * n_t + t];
                if cell.count > 0 {
                    values[c * n_t + t] = cell.sum / cell.count as f64;
                    observed[c * n_t + t] = true;
                }
            }
        }
    }

    for t in 0..n_t {
        let mut worst = f64::NEG_INFINITY;
        let mut any = false;
        for c in 0..n_c {
            if observed[c * n_t + t] {
                worst = worst.max(values[c * n_t + t]);
                any = true;
            }
        }
        if !any {
            return Err(Error::EmptyColumn {
                task_id: tasks.get(t).task_id.clone(),
            });
        }
        for c in 0..n_c {
            if !observed[c * n_t + t] {
                match matrix.policy() {
                    MissingPolicy::WorstInColumn => values[c * n_t + t] = worst,
                    MissingPolicy::Reject => {
                        return Err(Error::MissingCell {
                            task_id: tasks.get(t).task_id.clone(),
                            config_id: configs.get(c).config_id.clone(),
                        })
                    }
                }
            }
        }
    }

    Ok(PerformanceMatrix {
        configs,
        tasks,
        values,
        observed,
        policy: matrix.policy(),
    })
}
