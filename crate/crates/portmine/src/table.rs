//! Task, configuration and evaluation records.
//!
//! A task is described only by its four cheap metafeatures; raw datasets are
//! never loaded. Configurations are opaque: the hyperparameter payload is
//! carried verbatim and never interpreted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of metafeature dimensions per task.
pub const N_METAFEATURES: usize = 4;

/// A learning task identified by id, carrying its four metafeatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub n_instances: u64,
    pub n_features: u64,
    /// 0 for regression tasks.
    pub n_classes: u64,
    /// Fraction of numeric features, in [0, 1].
    pub pct_numeric: f64,
}

impl TaskRecord {
    /// The raw metafeature vector in canonical order:
    /// instances, features, classes, fraction numeric.
    pub fn metafeatures(&self) -> [f64; N_METAFEATURES] {
        [
            self.n_instances as f64,
            self.n_features as f64,
            self.n_classes as f64,
            self.pct_numeric,
        ]
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pct_numeric) || !self.pct_numeric.is_finite() {
            return Err(Error::RangeViolation {
                task_id: self.task_id.clone(),
                field: "pct_numeric",
                value: self.pct_numeric,
            });
        }
        Ok(())
    }
}

/// An opaque candidate configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub config_id: String,
    pub learner: String,
    /// Hyperparameters, uninterpreted. Keys are kept in canonical (sorted)
    /// order by the underlying map.
    pub payload: serde_json::Map<String, serde_json::Value>,
    /// Task whose offline tuning run produced this config, when known.
    pub source_task_id: Option<String>,
    pub is_library_default: bool,
}

/// One evaluation of a configuration on a task fold.
///
/// `loss` is `None` when the fold failed (empty or non-finite loss field);
/// such records never contribute to the performance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub task_id: String,
    pub config_id: String,
    pub fold: u32,
    pub loss: Option<f64>,
}

impl EvaluationRecord {
    pub fn is_failed(&self) -> bool {
        self.loss.is_none()
    }
}

/// Ordered task list with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTable {
    records: Vec<TaskRecord>,
}

impl TaskTable {
    pub fn new(records: Vec<TaskRecord>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if seen.insert(r.task_id.clone(), i).is_some() {
                return Err(Error::DuplicateTaskId {
                    task_id: r.task_id.clone(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TaskRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> &TaskRecord {
        &self.records[index]
    }

    pub fn index_of(&self, task_id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.task_id == task_id)
    }

    /// Id -> column index map for bulk lookups.
    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.task_id.as_str(), i))
            .collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaskRecord> {
        self.records.iter()
    }
}

/// Ordered configuration list with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigTable {
    records: Vec<ConfigRecord>,
}

impl ConfigTable {
    pub fn new(records: Vec<ConfigRecord>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if seen.insert(r.config_id.clone(), i).is_some() {
                return Err(Error::DuplicateConfigId {
                    config_id: r.config_id.clone(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ConfigRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> &ConfigRecord {
        &self.records[index]
    }

    pub fn index_of(&self, config_id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.config_id == config_id)
    }

    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.config_id.as_str(), i))
            .collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ConfigRecord> {
        self.records.iter()
    }
}
