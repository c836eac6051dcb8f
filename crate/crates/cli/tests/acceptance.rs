//! Acceptance criteria 1-8. Each criterion prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test --release -p tdrp-cli --test acceptance -- --nocapture`.
//! Criteria run one after another in a single test so that the wall-clock
//! budgets are measured without competing test threads. Set
//! `TDRP_ACCEPTANCE=2,5` to run a subset.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use tdrp_core::clustering::kmeans;
use tdrp_core::envs::EnvSpec;
use tdrp_core::harness::{
    io, presets, pretrain_skills, run_single_task, run_skill_chain, run_step_ablation, scripted_trajectories,
};
use tdrp_core::numcore::{finite_diff_check, squared_distance, Activation, MlpParams};
use tdrp_core::ppo::{compute_gae, ClippedSurrogate, Policy, Sample, ValueRegression};
use tdrp_core::rewards::{chain_reward, clustered_goal_reward, goal_reward, nearest_distance, RewardMode};
use tdrp_core::tdrp::{
    build_contrast_sets, embedding_gap_correlation, raw_gap_correlation, ContrastBatch, ContrastSample, Encoder,
    EncoderSnapshot, TripletObjective,
};
use tdrp_core::{seeding, stats, Trajectory, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    // Written to the process stdout directly so the line survives test output capture.
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "criterion {n} [{name}]: {} | {} | {:.1}s of {:.0}s budget",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    )
    .unwrap();
    stdout.flush().unwrap();
    pass
}

fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

// ---------------------------------------------------------------- 1

fn gradient_correctness() -> Outcome {
    let h = 1e-5;
    let (mut triplet, mut value, mut surrogate) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let mut rng = seeding::rng(seed);
        let enc = MlpParams::init(&[3, 5, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let batch = ContrastBatch {
            samples: (0..3)
                .map(|_| ContrastSample {
                    anchor: random_vec(&mut rng, 3, 1.0),
                    positives: (0..2).map(|_| random_vec(&mut rng, 3, 1.0)).collect(),
                    negatives: (0..2).map(|_| random_vec(&mut rng, 3, 1.0)).collect(),
                    positive_weight: 1.0,
                    negative_weight: 1.0,
                })
                .collect(),
        };
        triplet = triplet.max(finite_diff_check(&TripletObjective { margin: 1.0 }, &enc, &batch, h).unwrap());

        let policy = Policy::new(3, 2, &[5], -0.3, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..6)
            .map(|_| {
                let state = random_vec(&mut rng, 3, 1.0);
                let (action, lp, _) = policy.act(&state, &mut rng).unwrap();
                Sample {
                    state,
                    action,
                    // fixed behaviour probabilities away from the current policy
                    old_log_prob: lp + rng.random_range(-0.5..0.5),
                    advantage: rng.random_range(-2.0..2.0),
                    value_target: rng.random_range(-1.0..1.0),
                }
            })
            .collect();
        value = value.max(finite_diff_check(&ValueRegression { coef: 2.0 }, &policy.value, &samples[..], h).unwrap());
        surrogate = surrogate.max(finite_diff_check(&ClippedSurrogate { clip: 0.2 }, &policy, &samples[..], h).unwrap());
    }
    Outcome {
        pass: triplet < 1e-4 && value < 1e-4 && surrogate < 1e-4,
        detail: format!("max rel. error triplet {triplet:.2e}, value {value:.2e}, surrogate {surrogate:.2e} (20 nets, < 1e-4)"),
    }
}

// ---------------------------------------------------------------- 2

fn umaze_property() -> Outcome {
    let spec = EnvSpec::umaze();
    let demo = presets::umaze_demonstrator();
    let (mut emb, mut raw) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let train = scripted_trajectories(&spec, demo, 50, seeding::derive(seed, "train")).unwrap();
        let held_out = scripted_trajectories(&spec, demo, 20, seeding::derive(seed, "test")).unwrap();
        let mut encoder =
            Encoder::new(spec.state_dim(), presets::umaze_encoder(), &mut seeding::child_rng(seed, "encoder")).unwrap();
        encoder.train(&train, &mut seeding::child_rng(seed, "encoder-train")).unwrap();
        let eval: Vec<&Trajectory> = held_out.iter().collect();
        emb.push(embedding_gap_correlation(&encoder, &eval).unwrap());
        raw.push(raw_gap_correlation(&eval).unwrap());
    }
    let (e, r) = (stats::mean(&emb), stats::mean(&raw));
    Outcome {
        pass: e >= 0.8 && e - r >= 0.2,
        detail: format!(
            "embedding rho {e:.3} (per seed {}), raw rho {r:.3}, gap {:.3} (need >= 0.8 and >= 0.2)",
            fmt_list(&emb),
            e - r
        ),
    }
}

// ---------------------------------------------------------------- 3

fn step_robustness() -> Outcome {
    let spec = presets::ablation_chain();
    let walker = presets::ablation_walker();
    let steps = [4, 8, 16, 24];
    let mut per_step = vec![Vec::new(); steps.len()];
    for seed in 0..5u64 {
        let train = scripted_trajectories(&spec, walker, 50, seeding::derive(seed, "train")).unwrap();
        let held_out = scripted_trajectories(&spec, walker, 20, seeding::derive(seed, "test")).unwrap();
        let rows = run_step_ablation(&presets::ablation_encoder(), &steps, &train, &held_out, seed, None).unwrap();
        for (acc, row) in per_step.iter_mut().zip(rows) {
            acc.push(row.spearman);
        }
    }
    let means: Vec<f64> = per_step.iter().map(|v| stats::mean(v)).collect();
    let detail = steps
        .iter()
        .zip(&means)
        .map(|(s, m)| format!("step {s}: {m:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        pass: means.iter().all(|&m| m >= 0.7),
        detail: format!("{detail} (5-seed means, need >= 0.7 each)"),
    }
}

// ---------------------------------------------------------------- 4

fn record_umaze_demos(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let spec = EnvSpec::umaze();
    let demos = scripted_trajectories(&spec, presets::umaze_demonstrator(), 50, seeding::derive(0, "demo")).unwrap();
    let goals: Vec<Vector> = demos.iter().filter(|t| t.succeeded()).map(|t| t.final_state().clone()).collect();
    let (g, t) = (dir.join("demo_goals.csv"), dir.join("demo_trajectories.csv"));
    io::write_states(&g, &goals).unwrap();
    io::write_trajectories(&t, &demos).unwrap();
    (g, t)
}

fn success_curves(mode: RewardMode, dir: &Path, goals: &Path, trajs: &Path) -> Vec<Vec<f64>> {
    let mut config = presets::umaze(mode);
    config.seeds = (0..5).collect();
    config.output_dir = dir.join(mode.name());
    config.demo_file = Some(goals.to_path_buf());
    config.demo_trajectories = Some(trajs.to_path_buf());
    run_single_task(&config)
        .unwrap()
        .into_iter()
        .map(|s| s.rows.iter().map(|r| r.success_rate).collect())
        .collect()
}

fn learning_improvement() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (goals, trajs) = record_umaze_demos(dir.path());
    let shaped = success_curves(RewardMode::ClusteredGoals, dir.path(), &goals, &trajs);
    let raw = success_curves(RewardMode::None, dir.path(), &goals, &trajs);
    let finals = |c: &[Vec<f64>]| c.iter().map(|s| *s.last().unwrap()).collect::<Vec<_>>();
    let (fs, fr) = (finals(&shaped), finals(&raw));
    let (ms, mr) = (stats::mean(&fs), stats::mean(&fr));
    let floor_after = |s: &[f64]| match s.iter().position(|&x| x >= 0.8) {
        Some(i) => s[i..].iter().cloned().fold(1.0, f64::min),
        None => f64::NAN,
    };
    // stability is judged on the seed-mean curve, per-seed floors are informational
    let mean_curve: Vec<f64> = (0..shaped[0].len())
        .map(|i| stats::mean(&shaped.iter().map(|s| s[i]).collect::<Vec<_>>()))
        .collect();
    let floor = floor_after(&mean_curve);
    let floors: Vec<f64> = shaped.iter().map(|s| floor_after(s)).collect();
    let stable = floor.is_nan() || floor >= 0.6;
    Outcome {
        pass: ms >= 0.8 && mr <= 0.3 && stable,
        detail: format!(
            "shaped final success {ms:.2} (per seed {}), raw {mr:.2} (per seed {}), mean-curve floor after 0.8 {floor:.2} (per seed {}) (need >= 0.8, <= 0.3, >= 0.6)",
            fmt_list(&fs),
            fmt_list(&fr),
            fmt_list(&floors)
        ),
    }
}

// ---------------------------------------------------------------- 5

fn skill_chaining() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = presets::chain2skill();
    let (mut pre, mut post, mut monotone, mut shape) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let out = dir.path().join(format!("seed_{seed}"));
        let (a, b) = pretrain_skills(&config, seed, &out).unwrap();
        let r = run_skill_chain(&config, seed, &a, &b, &out).unwrap();
        pre.push(r.success_pre);
        post.push(r.success_post);
        let d: Vec<f64> = r.rows.iter().map(|row| row.eval_center_distance).collect();
        monotone.push(non_increasing_within(&stats::moving_average(&d, 5), 0.10));
        let low = d.iter().copied().fold(f64::INFINITY, f64::min);
        shape.push(format!("{:.3}/{low:.3}/{:.3}", d[0], d[d.len() - 1]));
    }
    let gain = stats::mean(&post) - stats::mean(&pre);
    let all_monotone = monotone.iter().all(|m| *m);
    Outcome {
        pass: gain >= 0.10 && all_monotone,
        detail: format!(
            "chained success {:.3} -> {:.3} (+{:.1} pp, need >= 10), distance non-increasing after smoothing: {:?} (first/min/last {})",
            stats::mean(&pre),
            stats::mean(&post),
            100.0 * gain,
            monotone,
            shape.join(" ")
        ),
    }
}

/// True when no point exceeds the running minimum by more than `tol`
/// (relative).
fn non_increasing_within(values: &[f64], tol: f64) -> bool {
    let mut best = f64::INFINITY;
    for &v in values {
        if v > best * (1.0 + tol) {
            return false;
        }
        best = best.min(v);
    }
    true
}

// ---------------------------------------------------------------- 6

fn brute_force_inertia(points: &[Vector], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let cost = |members: &[&Vector]| -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        let mean: Vector =
            (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        members.iter().map(|p| squared_distance(p, &mean)).sum()
    };
    if k == 1 || n == 1 {
        return cost(&points.iter().collect::<Vec<_>>());
    }
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) - 1 {
        let a: Vec<&Vector> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &points[i]).collect();
        let b: Vec<&Vector> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| &points[i]).collect();
        best = best.min(cost(&a) + cost(&b));
    }
    best
}

/// Advantages from the explicit sum `A_t = sum_l (gamma lambda)^l delta_{t+l}`.
fn gae_by_sum(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    (0..n)
        .map(|t| (t..n).map(|l| (gamma * lambda).powi((l - t) as i32) * (rewards[l] + gamma * next(l) - values[l])).sum())
        .collect()
}

fn oracle_equivalences() -> Outcome {
    let mut rng = seeding::rng(6);
    let mut kmeans_err: f64 = 0.0;
    for trial in 0..300u64 {
        let n = rng.random_range(1..=10);
        let points: Vec<Vector> = (0..n).map(|_| random_vec(&mut rng, 2, 3.0)).collect();
        for k in 1..=2 {
            let r = kmeans(&points, k, trial, 100, 1e-12).unwrap();
            kmeans_err = kmeans_err.max((r.inertia - brute_force_inertia(&points, k)).abs());
        }
    }
    let mut gae_err: f64 = 0.0;
    for _ in 0..500 {
        let rewards = random_vec(&mut rng, 10, 1.0);
        let values = random_vec(&mut rng, 10, 1.0);
        let bootstrap = rng.random_range(-1.0..1.0);
        let (gamma, lambda) = (rng.random_range(0.0..0.999), rng.random_range(0.0..=1.0));
        let (adv, _) = compute_gae(&rewards, &values, bootstrap, gamma, lambda).unwrap();
        for (a, b) in adv.iter().zip(gae_by_sum(&rewards, &values, bootstrap, gamma, lambda)) {
            gae_err = gae_err.max((a - b).abs());
        }
    }
    let mut set_mismatch = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..60usize);
        let t = rng.random_range(0..len);
        let step = rng.random_range(1..30usize);
        let traj = Trajectory::from_states((0..len).map(|i| vec![i as f64]).collect());
        let (pos, neg) = build_contrast_sets(&traj, t, step).unwrap();
        let got = |w: &[Vector]| w.iter().map(|s| s[0] as usize).collect::<Vec<_>>();
        let want_pos: Vec<usize> = (0..len).filter(|&i| i > t && i <= t + step).collect();
        let want_neg: Vec<usize> = (0..len).filter(|&i| i > t + step && i <= t + 2 * step).collect();
        if got(pos) != want_pos || got(neg) != want_neg {
            set_mismatch += 1;
        }
    }
    Outcome {
        pass: kmeans_err <= 1e-9 && gae_err <= 1e-10 && set_mismatch == 0,
        detail: format!(
            "k-means vs exhaustive max |diff| {kmeans_err:.1e} (<= 1e-9), GAE vs explicit sum {gae_err:.1e} (<= 1e-10), window mismatches {set_mismatch}/1000"
        ),
    }
}

// ---------------------------------------------------------------- 7

fn reward_contracts() -> Outcome {
    let mut rng = seeding::rng(7);
    let dim = 4;
    let mut violations = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok && violations.len() < 5 {
            violations.push(what.to_string());
        }
        ok
    };
    let mut count = 0;
    for _ in 0..10_000 {
        let params = MlpParams::init(&[dim, 6, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let snap = EncoderSnapshot::from_params(params.clone(), 0);
        let raw = rng.random_range(-1.0..1.0);
        let lambda = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.01..2.0) };
        let state = random_vec(&mut rng, dim, 1.0);
        let goal = random_vec(&mut rng, dim, 1.0);
        let k = rng.random_range(1..6);
        let centers: Vec<Vector> = (0..k).map(|_| random_vec(&mut rng, 3, 1.0)).collect();
        let emb = snap.encode(&state).unwrap();
        let (idx, d) = nearest_distance(&emb, &centers).unwrap();

        let r6 = goal_reward(raw, &state, &goal, lambda, &snap).unwrap();
        let r7 = clustered_goal_reward(raw, &state, &centers, lambda, &snap).unwrap();
        let r8 = chain_reward(raw, &state, &centers, lambda, &snap).unwrap();
        check(r6 <= raw && r7 <= raw && r8 <= raw, "r' <= R");
        let d6 = snap.embedding_distance(&state, &goal).unwrap();
        check((r6 == raw) == (lambda == 0.0 || d6 == 0.0), "eq. 6 equality iff lambda = 0 or d = 0");
        check((r7 == raw) == (lambda == 0.0 || d == 0.0), "eq. 7 equality iff lambda = 0 or d = 0");
        check(goal_reward(raw, &state, &state, lambda, &snap).unwrap() == raw, "eq. 6 at the goal");
        let mut at_center = centers.clone();
        at_center.push(emb.clone());
        check(clustered_goal_reward(raw, &state, &at_center, lambda, &snap).unwrap() == raw, "eq. 7 at a center");
        check(chain_reward(raw, &state, &at_center, lambda, &snap).unwrap() == raw, "eq. 8 at a center");

        let mut superset = centers.clone();
        superset.push(random_vec(&mut rng, 3, 2.0));
        check(clustered_goal_reward(raw, &state, &superset, lambda, &snap).unwrap() >= r7, "eq. 7 superset");
        check(chain_reward(raw, &state, &superset, lambda, &snap).unwrap() >= r8, "eq. 8 superset");

        let alpha = rng.random_range(0.05..20.0);
        let mut scaled = params;
        scaled.scale_output_layer(alpha);
        let scaled_snap = EncoderSnapshot::from_params(scaled, 0);
        let scaled_centers: Vec<Vector> = centers.iter().map(|c| c.iter().map(|x| x * alpha).collect()).collect();
        let (idx2, d2) = nearest_distance(&scaled_snap.encode(&state).unwrap(), &scaled_centers).unwrap();
        check(idx2 == idx, "argmin under scaling");
        check((d2 - alpha * d).abs() <= 1e-9 * (1.0 + alpha * d), "shaping term scales with alpha");
        count += 1;
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "{count} random draws, violations: {}",
            if violations.is_empty() { "none".to_string() } else { violations.join("; ") }
        ),
    }
}

// ---------------------------------------------------------------- 8

fn tdrp(args: &[&str], seed: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tdrp")).args(args).env("TDRP_SEED", seed).output().unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let goals = root.join("goals.csv");
    let trajs = root.join("trajs.csv");
    let rec = tdrp(
        &[
            "demo-record",
            "--preset",
            "umaze-shaped",
            "--episodes",
            "10",
            "--out",
            goals.to_str().unwrap(),
            "--trajectories",
            trajs.to_str().unwrap(),
        ],
        "0",
    );
    if !rec.status.success() {
        return Outcome {
            pass: false,
            detail: format!("demo-record failed: {}", String::from_utf8_lossy(&rec.stderr)),
        };
    }
    let mut metrics = Vec::new();
    for run in ["a", "b"] {
        let out = root.join(run);
        let o = tdrp(
            &[
                "train",
                "--preset",
                "umaze-shaped",
                "--set",
                "iterations=4",
                "--set",
                "encoder_warmup=100",
                "--set",
                &format!("demo_file={}", goals.display()),
                "--set",
                &format!("demo_trajectories={}", trajs.display()),
                "--set",
                &format!("output_dir={}", out.display()),
            ],
            "11",
        );
        if !o.status.success() {
            return Outcome {
                pass: false,
                detail: format!("train failed: {}", String::from_utf8_lossy(&o.stderr)),
            };
        }
        metrics.push(std::fs::read(out.join("seed_11").join("metrics.csv")).unwrap());
    }
    let rows = String::from_utf8_lossy(&metrics[0]).lines().count().saturating_sub(1);
    Outcome {
        pass: metrics[0] == metrics[1] && rows == 4,
        detail: format!(
            "two `tdrp train` runs (umaze-shaped, seed 11): metrics.csv {} ({rows} rows, {} bytes)",
            if metrics[0] == metrics[1] { "bitwise identical" } else { "DIFFER" },
            metrics[0].len()
        ),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/")
}

/// Comma-separated criterion numbers to run; every criterion when unset.
const SELECT_VAR: &str = "TDRP_ACCEPTANCE";

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let criteria: [(usize, &str, Duration, fn() -> Outcome); 8] = [
        (1, "gradient correctness", secs(30), gradient_correctness),
        (2, "transition-distance property (umaze)", secs(300), umaze_property),
        (3, "step robustness (chain)", secs(300), step_robustness),
        (4, "learning improvement (umaze)", secs(1800), learning_improvement),
        (5, "skill chaining (chain2skill)", secs(1200), skill_chaining),
        (6, "oracle equivalences", secs(60), oracle_equivalences),
        (7, "reward contracts", secs(60), reward_contracts),
        (8, "determinism (CLI train)", secs(300), determinism),
    ];
    let selected: Option<Vec<usize>> = std::env::var(SELECT_VAR)
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let (mut run, mut passed) = (0, 0);
    for (n, name, budget, check) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&n)) {
            continue;
        }
        run += 1;
        passed += usize::from(report(n, name, budget, check));
    }
    writeln!(std::io::stdout().lock(), "acceptance: {passed}/{run} criteria pass").unwrap();
}
