//! The zero-shot decision function.
//!
//! Training tasks are stored as anchors: their raw metafeatures, the
//! standardized vector, and the portfolio member that performed best on
//! them. A query standardizes its own metafeatures with the training
//! statistics and takes the config of the nearest anchor. Answering a query
//! touches neither the regret matrix nor any evaluation record.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RegretMatrix;
use crate::mining::{Portfolio, PortfolioMetric};
use crate::table::{ConfigRecord, TaskRecord, TaskTable, N_METAFEATURES};

/// Current `portfolio.json` format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-dimension standardization statistics fitted on the training tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; N_METAFEATURES],
    /// Population standard deviations; a zero (constant feature) is replaced
    /// by one so the dimension passes through centered but unscaled.
    pub stds: [f64; N_METAFEATURES],
}

impl Standardizer {
    /// Component-wise `(x - mean) / std`.
    pub fn standardize(&self, task: &TaskRecord) -> [f64; N_METAFEATURES] {
        let x = task.metafeatures();
        let mut out = [0.0; N_METAFEATURES];
        for d in 0..N_METAFEATURES {
            out[d] = (x[d] - self.means[d]) / self.stds[d];
        }
        out
    }
}

/// Population mean and standard deviation per metafeature dimension.
pub fn fit_standardizer(tasks: &TaskTable) -> Result<Standardizer> {
    if tasks.is_empty() {
        return Err(Error::EmptyTable);
    }
    let n = tasks.len() as f64;
    let mut means = [0.0; N_METAFEATURES];
    for t in tasks.iter() {
        let x = t.metafeatures();
        for d in 0..N_METAFEATURES {
            means[d] += x[d];
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut stds = [0.0; N_METAFEATURES];
    for t in tasks.iter() {
        let x = t.metafeatures();
        for d in 0..N_METAFEATURES {
            let dx = x[d] - means[d];
            stds[d] += dx * dx;
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(Standardizer { means, stds })
}

/// A training task held by the decision model.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub task: TaskRecord,
    pub standardized: [f64; N_METAFEATURES],
    /// Index into the model's member list.
    pub member: usize,
}

/// The complete, self-contained zero-shot recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionModel {
    pub members: Vec<ConfigRecord>,
    pub standardizer: Standardizer,
    pub anchors: Vec<Anchor>,
    pub epsilon: f64,
    pub metric: PortfolioMetric,
    pub format_version: u32,
}

/// Answer to a zero-shot query.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub config: ConfigRecord,
    pub member_index: usize,
    pub neighbor_task_id: String,
    /// Euclidean distance in standardized metafeature space.
    pub distance: f64,
}

/// For each task column, the portfolio member with minimum regret on it;
/// ties go to the earliest member in portfolio order.
pub fn assign_configs(r: &RegretMatrix, portfolio: &Portfolio) -> Result<Vec<usize>> {
    if portfolio.members.is_empty() {
        return Err(Error::EmptyPortfolio);
    }
    for &c in &portfolio.members {
        if c >= r.n_configs() {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: r.n_configs(),
            });
        }
    }
    let mut labels = Vec::with_capacity(r.n_tasks());
    for t in 0..r.n_tasks() {
        let mut best = 0;
        for (m, &c) in portfolio.members.iter().enumerate() {
            if r.value(c, t) < r.value(portfolio.members[best], t) {
                best = m;
            }
        }
        labels.push(best);
    }
    Ok(labels)
}

/// Fit the decision model: standardize the training tasks, assign each one
/// its best member, and prune members that no task was assigned to (a 1-NN
/// query can never return them).
pub fn fit_decision(
    portfolio: &Portfolio,
    r: &RegretMatrix,
    tasks: &TaskTable,
) -> Result<DecisionModel> {
    if tasks.is_empty() {
        return Err(Error::EmptyTable);
    }
    let matrix_ids: Vec<&str> = r.tasks().iter().map(|t| t.task_id.as_str()).collect();
    let given_ids: Vec<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    if matrix_ids != given_ids {
        return Err(Error::DimensionMismatch {
            reason: "task table is not aligned with the regret matrix columns".into(),
        });
    }

    let standardizer = fit_standardizer(tasks)?;
    let labels = assign_configs(r, portfolio)?;

    let mut used = vec![false; portfolio.members.len()];
    for &m in &labels {
        used[m] = true;
    }
    let mut remap = vec![usize::MAX; portfolio.members.len()];
    let mut members = Vec::new();
    for (m, &config_idx) in portfolio.members.iter().enumerate() {
        if used[m] {
            remap[m] = members.len();
            members.push(r.configs().get(config_idx).clone());
        }
    }

    let anchors = tasks
        .iter()
        .zip(&labels)
        .map(|(task, &m)| Anchor {
            task: task.clone(),
            standardized: standardizer.standardize(task),
            member: remap[m],
        })
        .collect();

    Ok(DecisionModel {
        members,
        standardizer,
        anchors,
        epsilon: portfolio.epsilon,
        metric: portfolio.metric,
        format_version: MODEL_FORMAT_VERSION,
    })
}

fn squared_distance(a: &[f64; N_METAFEATURES], b: &[f64; N_METAFEATURES]) -> f64 {
    let mut acc = 0.0;
    for d in 0..N_METAFEATURES {
        let diff = a[d] - b[d];
        acc += diff * diff;
    }
    acc
}

impl DecisionModel {
    /// Nearest-anchor lookup; exact distance ties go to the
    /// lexicographically smallest task id.
    pub fn recommend(&self, task: &TaskRecord) -> Result<Recommendation> {
        if self.anchors.is_empty() {
            return Err(Error::EmptyModel);
        }
        let q = self.standardizer.standardize(task);
        let mut best: Option<(&Anchor, f64)> = None;
        for a in &self.anchors {
            let d2 = squared_distance(&q, &a.standardized);
            let better = match &best {
                None => true,
                Some((cur, cur_d2)) => {
                    d2 < *cur_d2 || (d2 == *cur_d2 && a.task.task_id < cur.task.task_id)
                }
            };
            if better {
                best = Some((a, d2));
            }
        }
        let (anchor, d2) = best.expect("anchors checked non-empty");
        Ok(Recommendation {
            config: self.members[anchor.member].clone(),
            member_index: anchor.member,
            neighbor_task_id: anchor.task.task_id.clone(),
            distance: d2.sqrt(),
        })
    }

    /// Members ordered by the distance from the query to the nearest anchor
    /// assigned to each member, ascending; the first entry always equals
    /// [`DecisionModel::recommend`]. Returns at most `k` entries.
    pub fn recommend_ranked(&self, task: &TaskRecord, k: usize) -> Result<Vec<Recommendation>> {
        if self.anchors.is_empty() {
            return Err(Error::EmptyModel);
        }
        let q = self.standardizer.standardize(task);
        // Nearest anchor per member, with the same (distance, task id) tie
        // rule as `recommend` so the ranking's head agrees with it exactly.
        let mut nearest: Vec<Option<(usize, f64)>> = vec![None; self.members.len()];
        for (i, a) in self.anchors.iter().enumerate() {
            let d2 = squared_distance(&q, &a.standardized);
            let slot = &mut nearest[a.member];
            let better = match slot {
                None => true,
                Some((cur, cur_d2)) => {
                    d2 < *cur_d2
                        || (d2 == *cur_d2
                            && a.task.task_id < self.anchors[*cur].task.task_id)
                }
            };
            if better {
                *slot = Some((i, d2));
            }
        }
        let mut order: Vec<(usize, usize, f64)> = nearest
            .iter()
            .enumerate()
            .map(|(m, slot)| {
                let (anchor, d2) = slot.expect("every member has at least one anchor");
                (m, anchor, d2)
            })
            .collect();
        order.sort_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then_with(|| {
                    self.anchors[a.1]
                        .task
                        .task_id
                        .cmp(&self.anchors[b.1].task.task_id)
                })
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(order
            .into_iter()
            .take(k.min(self.members.len()))
            .map(|(m, anchor, d2)| Recommendation {
                config: self.members[m].clone(),
                member_index: m,
                neighbor_task_id: self.anchors[anchor].task.task_id.clone(),
                distance: d2.sqrt(),
            })
            .collect())
    }

    /// Persist to the version-1 `portfolio.json` document.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile::from_model(self);
        let mut out = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut out, &file)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Load a version-1 `portfolio.json` document, revalidating every model
    /// invariant.
    pub fn read(path: impl AsRef<Path>) -> Result<DecisionModel> {
        let file = File::open(path.as_ref()).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile {
                path: path.as_ref().display().to_string(),
            },
            _ => Error::Io(e),
        })?;
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::SchemaViolation {
                reason: format!("not a JSON document: {e}"),
            })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::VersionMismatch {
                    expected: MODEL_FORMAT_VERSION,
                    found: v,
                })
            }
            None => {
                return Err(Error::SchemaViolation {
                    reason: "missing format_version".into(),
                })
            }
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::SchemaViolation {
                reason: e.to_string(),
            })?;
        file.into_model()
    }
}

// ---- on-disk representation -------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    epsilon: f64,
    metric: PortfolioMetric,
    standardizer: StandardizerFile,
    portfolio: Vec<MemberFile>,
    anchors: Vec<AnchorFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StandardizerFile {
    means: [f64; N_METAFEATURES],
    stds: [f64; N_METAFEATURES],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberFile {
    config_id: String,
    learner: String,
    payload: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_task_id: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    is_library_default: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorFile {
    task_id: String,
    metafeatures: MetafeaturesFile,
    member_index: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetafeaturesFile {
    n_instances: u64,
    n_features: u64,
    n_classes: u64,
    pct_numeric: f64,
}

impl ModelFile {
    fn from_model(m: &DecisionModel) -> Self {
        ModelFile {
            format_version: m.format_version,
            epsilon: m.epsilon,
            metric: m.metric,
            standardizer: StandardizerFile {
                means: m.standardizer.means,
                stds: m.standardizer.stds,
            },
            portfolio: m
                .members
                .iter()
                .map(|c| MemberFile {
                    config_id: c.config_id.clone(),
                    learner: c.learner.clone(),
                    payload: c.payload.clone(),
                    source_task_id: c.source_task_id.clone(),
                    is_library_default: c.is_library_default,
                })
                .collect(),
            anchors: m
                .anchors
                .iter()
                .map(|a| AnchorFile {
                    task_id: a.task.task_id.clone(),
                    metafeatures: MetafeaturesFile {
                        n_instances: a.task.n_instances,
                        n_features: a.task.n_features,
                        n_classes: a.task.n_classes,
                        pct_numeric: a.task.pct_numeric,
                    },
                    member_index: a.member,
                })
                .collect(),
        }
    }

    fn into_model(self) -> Result<DecisionModel> {
        if self.portfolio.is_empty() || self.anchors.is_empty() {
            return Err(Error::SchemaViolation {
                reason: "model must carry at least one member and one anchor".into(),
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::SchemaViolation {
                reason: format!("epsilon must be finite and >= 0, got {}", self.epsilon),
            });
        }
        for s in self.standardizer.stds {
            if !(s > 0.0) {
                return Err(Error::SchemaViolation {
                    reason: format!("standardizer stds must be strictly positive, got {s}"),
                });
            }
        }
        let mut used = vec![false; self.portfolio.len()];
        for a in &self.anchors {
            if a.member_index >= self.portfolio.len() {
                return Err(Error::SchemaViolation {
                    reason: format!(
                        "anchor {} references member {} of {}",
                        a.task_id,
                        a.member_index,
                        self.portfolio.len()
                    ),
                });
            }
            used[a.member_index] = true;
        }
        if let Some(m) = used.iter().position(|u| !u) {
            return Err(Error::SchemaViolation {
                reason: format!("member {m} has no assigned anchor"),
            });
        }

        let standardizer = Standardizer {
            means: self.standardizer.means,
            stds: self.standardizer.stds,
        };
        let anchors = self
            .anchors
            .into_iter()
            .map(|a| {
                let task = TaskRecord {
                    task_id: a.task_id,
                    n_instances: a.metafeatures.n_instances,
                    n_features: a.metafeatures.n_features,
                    n_classes: a.metafeatures.n_classes,
                    pct_numeric: a.metafeatures.pct_numeric,
                };
                task.validate().map_err(|e| Error::SchemaViolation {
                    reason: e.to_string(),
                })?;
                Ok(Anchor {
                    standardized: standardizer.standardize(&task),
                    task,
                    member: a.member_index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecisionModel {
            members: self
                .portfolio
                .into_iter()
                .map(|m| ConfigRecord {
                    config_id: m.config_id,
                    learner: m.learner,
                    payload: m.payload,
                    source_task_id: m.source_task_id,
                    is_library_default: m.is_library_default,
                })
                .collect(),
            standardizer,
            anchors,
            epsilon: self.epsilon,
            metric: self.metric,
            format_version: self.format_version,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::{Portfolio, StopReason};
    use crate::table::{ConfigRecord, ConfigTable};

    fn task(id: &str, inst: u64) -> TaskRecord {
        TaskRecord {
            task_id: id.into(),
            n_instances: inst,
            n_features: 10,
            n_classes: 2,
            pct_numeric: 0.5,
        }
    }

    fn matrix(values: Vec<Vec<f64>>, insts: &[u64]) -> RegretMatrix {
        let n_c = values.len();
        let configs = ConfigTable::new(
            (0..n_c)
                .map(|i| ConfigRecord {
                    config_id: format!("c{i}"),
                    learner: "lgbm".into(),
                    payload: serde_json::Map::new(),
                    source_task_id: None,
                    is_library_default: false,
                })
                .collect(),
        )
        .unwrap();
        let tasks = TaskTable::new(
            insts
                .iter()
                .enumerate()
                .map(|(i, &n)| task(&format!("t{i}"), n))
                .collect(),
        )
        .unwrap();
        RegretMatrix::from_parts(configs, tasks, values.into_iter().flatten().collect()).unwrap()
    }

    fn portfolio(members: Vec<usize>) -> Portfolio {
        Portfolio {
            members,
            trace: Vec::new(),
            epsilon: 0.01,
            metric: PortfolioMetric::Ser,
            stop_reason: StopReason::TargetReached,
        }
    }

    #[test]
    fn single_task_standardizer_degenerates_to_unit() {
        let tasks = TaskTable::new(vec![task("a", 100)]).unwrap();
        let s = fit_standardizer(&tasks).unwrap();
        assert_eq!(s.stds, [1.0; 4]);
        assert_eq!(s.standardize(tasks.get(0)), [0.0; 4]);
    }

    #[test]
    fn two_point_standardizer() {
        let tasks = TaskTable::new(vec![task("a", 100), task("b", 300)]).unwrap();
        let s = fit_standardizer(&tasks).unwrap();
        assert_eq!(s.means[0], 200.0);
        assert_eq!(s.stds[0], 100.0);
        let probe = task("q", 300);
        assert_eq!(s.standardize(&probe)[0], 1.0);
    }

    #[test]
    fn standardizer_empty_table_is_error() {
        let tasks = TaskTable::new(vec![]).unwrap();
        assert!(matches!(
            fit_standardizer(&tasks).unwrap_err(),
            Error::EmptyTable
        ));
    }

    #[test]
    fn assignment_argmin_and_tie_rule() {
        let r = matrix(
            vec![vec![0.5, 0.3], vec![0.5, 0.3], vec![0.0, 0.9]],
            &[100, 200],
        );
        let p = portfolio(vec![0, 1, 2]);
        // task 0: member 2 wins; task 1: members 0 and 1 tie exactly -> 0.
        assert_eq!(assign_configs(&r, &p).unwrap(), vec![2, 0]);
    }

    #[test]
    fn fit_prunes_unassigned_members() {
        // Member 1 (config c1) is never best on any task.
        let r = matrix(
            vec![vec![0.0, 0.5], vec![0.4, 0.4], vec![0.5, 0.0]],
            &[100, 200],
        );
        let p = portfolio(vec![0, 1, 2]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        assert_eq!(model.members.len(), 2);
        assert_eq!(model.members[0].config_id, "c0");
        assert_eq!(model.members[1].config_id, "c2");
        assert_eq!(model.anchors[0].member, 0);
        assert_eq!(model.anchors[1].member, 1);
    }

    #[test]
    fn recommend_self_match_at_distance_zero() {
        let r = matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]], &[100, 100_000]);
        let p = portfolio(vec![0, 1]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        let rec = model.recommend(&task("t1", 100_000)).unwrap();
        assert_eq!(rec.neighbor_task_id, "t1");
        assert_eq!(rec.distance, 0.0);
        assert_eq!(rec.config.config_id, "c1");
    }

    #[test]
    fn recommend_tie_prefers_lexicographic_task_id() {
        // Two anchors with identical metafeatures, different members.
        let r = matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]], &[100, 100]);
        let p = portfolio(vec![0, 1]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        let rec = model.recommend(&task("q", 100)).unwrap();
        assert_eq!(rec.neighbor_task_id, "t0");
    }

    #[test]
    fn ranked_prefix_matches_recommend() {
        let r = matrix(
            vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.5, 0.5, 0.0]],
            &[100, 1000, 10_000],
        );
        let p = portfolio(vec![0, 1, 2]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        for probe in [task("q", 90), task("q", 1200), task("q", 9000)] {
            let single = model.recommend(&probe).unwrap();
            let ranked = model.recommend_ranked(&probe, 1).unwrap();
            assert_eq!(ranked.len(), 1);
            assert_eq!(ranked[0], single);
        }
        let all = model.recommend_ranked(&task("q", 500), 10).unwrap();
        assert_eq!(all.len(), 3);
        let mut seen: Vec<usize> = all.iter().map(|r| r.member_index).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn model_round_trip() {
        let r = matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]], &[100, 100_000]);
        let p = portfolio(vec![0, 1]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        model.write(f.path()).unwrap();
        let back = DecisionModel::read(f.path()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn version_mismatch_detected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), r#"{"format_version": 2}"#).unwrap();
        assert!(matches!(
            DecisionModel::read(f.path()).unwrap_err(),
            Error::VersionMismatch { found: 2, .. }
        ));
    }

    #[test]
    fn anchor_index_out_of_range_is_schema_violation() {
        let r = matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]], &[100, 100_000]);
        let p = portfolio(vec![0, 1]);
        let model = fit_decision(&p, &r, &r.tasks().clone()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        model.write(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path())
            .unwrap()
            .replace("\"member_index\": 1", "\"member_index\": 7");
        std::fs::write(f.path(), text).unwrap();
        assert!(matches!(
            DecisionModel::read(f.path()).unwrap_err(),
            Error::SchemaViolation { .. }
        ));
    }
}
