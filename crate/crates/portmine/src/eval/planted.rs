//! Synthetic benchmark bundles with known cluster structure.
//!
//! Tasks fall into metafeature clusters with centroids far apart relative to
//! the within-cluster jitter. Each cluster gets a planted "cluster config"
//! that is near-optimal on every task of its cluster and bad elsewhere, and
//! each task (as far as the config budget allows) gets an "own config" that
//! is exactly optimal on that one task, mediocre on its cluster siblings and
//! bad elsewhere — mirroring per-task tuning output. Remaining configs are
//! uniform filler. Ground truth is available for tests via
//! [`generate_planted_with_truth`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::RegretMatrix;
use crate::table::{ConfigRecord, ConfigTable, TaskRecord, TaskTable};

use super::Bundle;

const LEARNERS: [&str; 6] = ["lgbm", "xgboost", "catboost", "rf", "extra_trees", "lrl1"];

/// Off-cluster regret floor for planted configs.
const OFF_CLUSTER_BASE: f64 = 0.5;
/// Regret band of a task's own config on its cluster siblings.
const SIBLING_BASE: f64 = 0.05;
const SIBLING_SPAN: f64 = 0.10;
/// Uniform filler regret band.
const FILLER_BASE: f64 = 0.2;
const FILLER_SPAN: f64 = 0.6;

/// Ground truth of a generated bundle.
#[derive(Debug, Clone)]
pub struct PlantedTruth {
    /// Cluster index of each task.
    pub cluster_of_task: Vec<usize>,
    /// Config index of each cluster's planted config.
    pub cluster_configs: Vec<usize>,
    /// Config index of each task's own config, when the budget allowed one.
    pub task_configs: Vec<Option<usize>>,
    /// Task count per cluster, descending by construction.
    pub cluster_sizes: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Role {
    Cluster(usize),
    OwnTask(usize),
    Filler,
}

/// Deterministic-in-seed synthetic bundle; see the module docs for the
/// construction. Regret columns are re-normalized so every task's best
/// config sits at exactly zero.
pub fn generate_planted(
    n_tasks: usize,
    n_configs: usize,
    n_clusters: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Bundle> {
    generate_planted_with_truth(n_tasks, n_configs, n_clusters, noise_sigma, seed)
        .map(|(bundle, _)| bundle)
}

/// [`generate_planted`] plus the planted ground truth, for verification.
pub fn generate_planted_with_truth(
    n_tasks: usize,
    n_configs: usize,
    n_clusters: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Bundle, PlantedTruth)> {
    if n_clusters == 0 || n_tasks == 0 || n_configs == 0 {
        return Err(Error::InvalidShape {
            reason: "tasks, configs and clusters must all be positive".into(),
        });
    }
    if n_clusters > n_tasks.min(n_configs) {
        return Err(Error::InvalidShape {
            reason: format!(
                "{n_clusters} clusters exceed min(tasks={n_tasks}, configs={n_configs})"
            ),
        });
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidShape {
            reason: format!("noise_sigma must be finite and >= 0, got {noise_sigma}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cluster_sizes = descending_cluster_sizes(n_tasks, n_clusters);
    let mut cluster_of_task = Vec::with_capacity(n_tasks);
    for (k, &size) in cluster_sizes.iter().enumerate() {
        cluster_of_task.extend(std::iter::repeat(k).take(size));
    }

    // Metafeature centroids are spaced linearly per dimension with jitter at
    // 1% of the gap, which keeps clusters far apart after standardization.
    let pct_step = 0.8 / (n_clusters.saturating_sub(1)).max(1) as f64;
    let tasks: Vec<TaskRecord> = (0..n_tasks)
        .map(|i| {
            let k = cluster_of_task[i] as f64;
            let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            TaskRecord {
                task_id: format!("t{i:04}"),
                n_instances: (1000.0 + 4000.0 * k + 40.0 * z[0]).round().max(1.0) as u64,
                n_features: (20.0 + 60.0 * k + 0.6 * z[1]).round().max(1.0) as u64,
                n_classes: (2.0 + 3.0 * k + 0.03 * z[2]).round().max(0.0) as u64,
                pct_numeric: (0.1 + pct_step * k + 0.004 * z[3]).clamp(0.0, 1.0),
            }
        })
        .collect();

    // Scatter the planted configs among the fillers.
    let n_own = n_tasks.min(n_configs - n_clusters);
    let mut roles: Vec<Role> = Vec::with_capacity(n_configs);
    roles.extend((0..n_clusters).map(Role::Cluster));
    roles.extend((0..n_own).map(Role::OwnTask));
    roles.extend(std::iter::repeat(Role::Filler).take(n_configs - n_clusters - n_own));
    roles.shuffle(&mut rng);

    let mut cluster_configs = vec![0; n_clusters];
    let mut task_configs = vec![None; n_tasks];
    let first_task_of_cluster: Vec<usize> = {
        let mut firsts = Vec::with_capacity(n_clusters);
        let mut offset = 0;
        for &size in &cluster_sizes {
            firsts.push(offset);
            offset += size;
        }
        firsts
    };

    let configs: Vec<ConfigRecord> = roles
        .iter()
        .enumerate()
        .map(|(i, role)| {
            let n_estimators = 50 + (rng.random::<f64>() * 450.0) as u64;
            let learning_rate = 0.01 + 0.99 * rng.random::<f64>();
            let mut payload = serde_json::Map::new();
            payload.insert("n_estimators".into(), n_estimators.into());
            payload.insert("learning_rate".into(), serde_json::json!(learning_rate));
            let source_task_id = match role {
                Role::Cluster(k) => {
                    cluster_configs[*k] = i;
                    Some(format!("t{:04}", first_task_of_cluster[*k]))
                }
                Role::OwnTask(u) => {
                    task_configs[*u] = Some(i);
                    Some(format!("t{u:04}"))
                }
                Role::Filler => None,
            };
            ConfigRecord {
                config_id: format!("c{i:04}"),
                learner: LEARNERS[i % LEARNERS.len()].into(),
                payload,
                source_task_id,
                is_library_default: false,
            }
        })
        .collect();

    let mut values = vec![0.0; n_configs * n_tasks];
    for (c, role) in roles.iter().enumerate() {
        for t in 0..n_tasks {
            let v = match role {
                Role::Cluster(k) => {
                    if cluster_of_task[t] == *k {
                        let z: f64 = rng.sample(StandardNormal);
                        (noise_sigma * z).abs()
                    } else {
                        OFF_CLUSTER_BASE + 0.3 * rng.random::<f64>()
                    }
                }
                Role::OwnTask(u) => {
                    if t == *u {
                        0.0
                    } else if cluster_of_task[t] == cluster_of_task[*u] {
                        SIBLING_BASE + SIBLING_SPAN * rng.random::<f64>()
                    } else {
                        OFF_CLUSTER_BASE + 0.3 * rng.random::<f64>()
                    }
                }
                Role::Filler => FILLER_BASE + FILLER_SPAN * rng.random::<f64>(),
            };
            values[c * n_tasks + t] = v;
        }
    }

    // Re-normalize every column's minimum to exactly zero.
    for t in 0..n_tasks {
        let min = (0..n_configs)
            .map(|c| values[c * n_tasks + t])
            .fold(f64::INFINITY, f64::min);
        for c in 0..n_configs {
            values[c * n_tasks + t] -= min;
        }
    }

    let regret = RegretMatrix::from_parts(
        ConfigTable::new(configs)?,
        TaskTable::new(tasks)?,
        values,
    )?;
    Ok((
        Bundle::new(regret),
        PlantedTruth {
            cluster_of_task,
            cluster_configs,
            task_configs,
            cluster_sizes,
        },
    ))
}

/// Split `n_tasks` into `n_clusters` parts with strictly descending weights
/// (K, K-1, ..., 1), every part non-empty.
fn descending_cluster_sizes(n_tasks: usize, n_clusters: usize) -> Vec<usize> {
    let total_weight: usize = (1..=n_clusters).sum();
    let spare = n_tasks - n_clusters;
    let mut sizes: Vec<usize> = (0..n_clusters)
        .map(|k| 1 + spare * (n_clusters - k) / total_weight)
        .collect();
    let mut assigned: usize = sizes.iter().sum();
    // Distribute the rounding remainder to the largest clusters first.
    let mut k = 0;
    while assigned < n_tasks {
        sizes[k % n_clusters] += 1;
        assigned += 1;
        k += 1;
    }
    sizes
}
