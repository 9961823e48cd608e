//! Mining correctness against independent brute-force oracles.
//!
//! The oracles below work on plain `Vec<Vec<f64>>` regret values and
//! recompute every score from scratch — no code shared with the library's
//! incremental scoring — so an agreement failure points at a real bug.

use portmine::eval::generate_planted_with_truth;
use portmine::matrix::RegretMatrix;
use portmine::mining::{
    best_single, greedy_build, mean_regret, mine_greedy_mean, mine_per_task_best, ser, Metric,
    MiningOptions, StopReason, DEFAULT_TIE_TOLERANCE,
};
use portmine::table::{ConfigRecord, ConfigTable, TaskRecord, TaskTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_matrix(values: &[Vec<f64>]) -> RegretMatrix {
    let n_c = values.len();
    let n_t = values[0].len();
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
        (0..n_t)
            .map(|i| TaskRecord {
                task_id: format!("t{i}"),
                n_instances: 100 + i as u64,
                n_features: 10,
                n_classes: 2,
                pct_numeric: 0.5,
            })
            .collect(),
    )
    .unwrap();
    RegretMatrix::from_parts(
        configs,
        tasks,
        values.iter().flatten().copied().collect(),
    )
    .unwrap()
}

fn random_values(rng: &mut ChaCha8Rng, n_c: usize, n_t: usize, quantize: bool) -> Vec<Vec<f64>> {
    (0..n_c)
        .map(|_| {
            (0..n_t)
                .map(|_| {
                    let v = rng.random::<f64>() * 1.0 - 0.1;
                    if quantize {
                        // Dyadic grid: exact arithmetic, frequent exact ties.
                        (v * 32.0).round() / 32.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

// ---- oracle ----------------------------------------------------------------

fn oracle_ser(values: &[Vec<f64>], members: &[usize], epsilon: f64) -> f64 {
    if members.is_empty() {
        return f64::INFINITY;
    }
    let n_t = values[0].len();
    let mut total = 0.0;
    for t in 0..n_t {
        let mut min = f64::INFINITY;
        for &c in members {
            min = min.min(values[c][t]);
        }
        total += (min - epsilon).max(0.0);
    }
    total
}

fn oracle_mean(values: &[Vec<f64>], members: &[usize]) -> f64 {
    let n_t = values[0].len();
    let mut total = 0.0;
    for t in 0..n_t {
        let mut min = f64::INFINITY;
        for &c in members {
            min = min.min(values[c][t]);
        }
        total += min;
    }
    total / n_t as f64
}

fn oracle_tied(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Exhaustive argmin over all one-config extensions under the contract's tie
/// chain: score within relative tolerance, then lower extension mean regret,
/// then lower config index.
fn oracle_step(
    values: &[Vec<f64>],
    members: &[usize],
    candidates: &[usize],
    metric: Metric,
    epsilon: f64,
    tol: f64,
) -> (usize, f64) {
    let scored: Vec<(usize, f64, f64)> = candidates
        .iter()
        .map(|&c| {
            let mut ext = members.to_vec();
            ext.push(c);
            let mean = oracle_mean(values, &ext);
            let score = match metric {
                Metric::Ser => oracle_ser(values, &ext, epsilon),
                Metric::Mean => mean,
            };
            (c, score, mean)
        })
        .collect();
    let min_score = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut best: Option<(usize, f64, f64)> = None;
    for &(c, score, mean) in &scored {
        if !oracle_tied(score, min_score, tol) {
            continue;
        }
        best = match best {
            None => Some((c, score, mean)),
            Some((bc, bs, bm)) => {
                if mean < bm || (mean == bm && c < bc) {
                    Some((c, score, mean))
                } else {
                    Some((bc, bs, bm))
                }
            }
        };
    }
    let (c, score, _) = best.expect("candidate set is non-empty");
    (c, score)
}

/// Reference greedy miner: scores every extension from scratch each step.
fn oracle_greedy(
    values: &[Vec<f64>],
    metric: Metric,
    epsilon: f64,
    early_stopping: bool,
    max_size: Option<usize>,
    tol: f64,
) -> (Vec<usize>, StopReason) {
    let mut members: Vec<usize> = Vec::new();
    let mut candidates: Vec<usize> = (0..values.len()).collect();
    let mut e = f64::INFINITY;
    loop {
        let min_score = candidates
            .iter()
            .map(|&c| {
                let mut ext = members.clone();
                ext.push(c);
                match metric {
                    Metric::Ser => oracle_ser(values, &ext, epsilon),
                    Metric::Mean => oracle_mean(values, &ext),
                }
            })
            .fold(f64::INFINITY, f64::min);
        if early_stopping && e.is_finite() && (1.0 - epsilon / 2.0) * e < min_score {
            return (members, StopReason::EarlyStopped);
        }
        let (chosen, score) = oracle_step(values, &members, &candidates, metric, epsilon, tol);
        members.push(chosen);
        candidates.retain(|&c| c != chosen);
        e = score;
        if e <= epsilon {
            return (members, StopReason::TargetReached);
        }
        if Some(members.len()) == max_size {
            return (members, StopReason::SizeCap);
        }
        if candidates.is_empty() {
            return (members, StopReason::Exhausted);
        }
    }
}

// ---- tests -------------------------------------------------------------------

#[test]
fn greedy_matches_enumeration_oracle_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    for round in 0..80 {
        let n_c = rng.random_range(2..=8);
        let n_t = rng.random_range(1..=10);
        let quantize = round % 2 == 0;
        let values = random_values(&mut rng, n_c, n_t, quantize);
        let r = to_matrix(&values);
        for metric in [Metric::Ser, Metric::Mean] {
            for epsilon in [0.0, 0.01, 0.05] {
                for early in [true, false] {
                    let opts = MiningOptions {
                        epsilon,
                        metric,
                        early_stopping: early,
                        max_size: None,
                        tie_tolerance: DEFAULT_TIE_TOLERANCE,
                    };
                    let got = greedy_build(&r, &opts).unwrap();
                    let (want_members, want_stop) = oracle_greedy(
                        &values,
                        metric,
                        epsilon,
                        early,
                        None,
                        DEFAULT_TIE_TOLERANCE,
                    );
                    assert_eq!(
                        got.members, want_members,
                        "round {round} metric {metric:?} eps {epsilon} early {early}"
                    );
                    assert_eq!(got.stop_reason, want_stop, "round {round}");
                }
            }
        }
    }
}

#[test]
fn ser_and_mean_match_oracle_on_random_member_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let n_c = rng.random_range(3..=10);
        let n_t = rng.random_range(1..=8);
        let values = random_values(&mut rng, n_c, n_t, false);
        let r = to_matrix(&values);
        let size = rng.random_range(1..=n_c);
        let mut members: Vec<usize> = (0..n_c).collect();
        for i in (1..members.len()).rev() {
            members.swap(i, rng.random_range(0..=i));
        }
        members.truncate(size);
        let eps = rng.random::<f64>() * 0.05;
        assert_eq!(
            ser(&r, &members, eps).unwrap(),
            oracle_ser(&values, &members, eps)
        );
        assert_eq!(
            mean_regret(&r, &members).unwrap(),
            oracle_mean(&values, &members)
        );
    }
}

#[test]
fn ser_monotone_under_extension_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E2);
    for _ in 0..300 {
        let n_c = rng.random_range(2..=10);
        let n_t = rng.random_range(1..=8);
        let values = random_values(&mut rng, n_c, n_t, false);
        let r = to_matrix(&values);
        let size = rng.random_range(1..n_c);
        let members: Vec<usize> = (0..size).collect();
        let extra = rng.random_range(size..n_c);
        let mut extended = members.clone();
        extended.push(extra);
        let eps = rng.random::<f64>() * 0.05;
        assert!(ser(&r, &extended, eps).unwrap() <= ser(&r, &members, eps).unwrap());
    }
}

#[test]
fn per_task_best_matches_column_argmin_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..20 {
        let n_c = rng.random_range(3..=12);
        let n_t = 20;
        let values = random_values(&mut rng, n_c, n_t, round % 2 == 0);
        let r = to_matrix(&values);
        let got = mine_per_task_best(&r).unwrap();

        let mut want: Vec<usize> = Vec::new();
        for t in 0..n_t {
            let mut best = 0;
            for c in 1..n_c {
                if values[c][t] < values[best][t] {
                    best = c;
                }
            }
            if !want.contains(&best) {
                want.push(best);
            }
        }
        assert_eq!(got.members, want, "round {round}");
    }
}

#[test]
fn greedy_mean_steps_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..25 {
        let values = random_values(&mut rng, 6, 6, false);
        let r = to_matrix(&values);
        let got = mine_greedy_mean(&r, 3).unwrap();

        let mut members: Vec<usize> = Vec::new();
        let mut candidates: Vec<usize> = (0..6).collect();
        for _ in 0..3 {
            let (chosen, _) = oracle_step(
                &values,
                &members,
                &candidates,
                Metric::Mean,
                0.0,
                DEFAULT_TIE_TOLERANCE,
            );
            members.push(chosen);
            candidates.retain(|&c| c != chosen);
        }
        assert_eq!(got.members, members);
    }
}

#[test]
fn best_single_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..30 {
        let values = random_values(&mut rng, 10, 8, false);
        let r = to_matrix(&values);
        for (metric, eps) in [(Metric::Mean, 0.0), (Metric::Ser, 0.01)] {
            let got = best_single(&r, metric, eps).unwrap();
            let all: Vec<usize> = (0..10).collect();
            let (want, _) = oracle_step(&values, &[], &all, metric, eps, DEFAULT_TIE_TOLERANCE);
            assert_eq!(got, want);
        }
    }
}

#[test]
fn first_greedy_pick_equals_best_single_under_ser() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for _ in 0..40 {
        let values = random_values(&mut rng, 7, 6, true);
        let r = to_matrix(&values);
        let p = greedy_build(&r, &MiningOptions::default()).unwrap();
        assert_eq!(
            p.members[0],
            best_single(&r, Metric::Ser, MiningOptions::default().epsilon).unwrap()
        );
    }
}

#[test]
fn exact_ser_tie_resolved_by_lower_mean_then_verified_by_oracle() {
    // Both extensions reach SER 0 (all regrets below the target), so the
    // miner must fall through to the mean-regret tie-break.
    let values = vec![vec![0.25, 0.375], vec![0.25, 0.125]];
    let r = to_matrix(&values);
    let opts = MiningOptions {
        epsilon: 0.5,
        ..Default::default()
    };
    let got = greedy_build(&r, &opts).unwrap();
    let (chosen, _) = oracle_step(
        &values,
        &[],
        &[0, 1],
        Metric::Ser,
        0.5,
        DEFAULT_TIE_TOLERANCE,
    );
    assert_eq!(got.members[0], 1);
    assert_eq!(chosen, 1);
}

#[test]
fn planted_clusters_recovered_in_descending_size_order() {
    // Noise-free: every accepted step must pick the planted config of the
    // largest uncovered cluster, checked against exhaustive enumeration.
    let (bundle, truth) = generate_planted_with_truth(24, 40, 3, 0.0, 9).unwrap();
    let r = bundle.regret();
    let values: Vec<Vec<f64>> = (0..r.n_configs()).map(|c| r.row(c).to_vec()).collect();

    let p = greedy_build(r, &MiningOptions::default()).unwrap();
    let expected: Vec<usize> = truth.cluster_configs.clone();
    assert_eq!(p.members, expected, "sizes {:?}", truth.cluster_sizes);
    assert!(truth.cluster_sizes.windows(2).all(|w| w[0] > w[1]));

    let (oracle_members, oracle_stop) =
        oracle_greedy(&values, Metric::Ser, 0.01, true, None, DEFAULT_TIE_TOLERANCE);
    assert_eq!(p.members, oracle_members);
    assert_eq!(p.stop_reason, oracle_stop);
    assert_eq!(p.stop_reason, StopReason::TargetReached);
}
