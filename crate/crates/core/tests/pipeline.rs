//! End-to-end checks of the training loop, the chain pipeline and the encoder.

use tdrp_core::clustering::kmeans;
use tdrp_core::envs::{EnvSpec, ScriptedPolicy};
use tdrp_core::harness::{
    checkpoint_dir, presets, pretrain_skills, read_metrics, run_single_task, run_skill_chain, run_step_ablation,
    scripted_trajectories,
};
use tdrp_core::rewards::{refresh_centers, GoalSet};
use tdrp_core::tdrp::{embedding_gap_correlation, Encoder, TdrpConfig};
use tdrp_core::{seeding, Trajectory};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn zero_iterations_gives_initial_checkpoint_and_empty_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = presets::chain_sanity();
    config.iterations = 0;
    config.seeds = vec![4];
    config.output_dir = dir.path().to_path_buf();
    let runs = run_single_task(&config).unwrap();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].rows.is_empty());
    assert!(read_metrics(&runs[0].run_dir.join("metrics.csv")).unwrap().is_empty());
    assert!(runs[0].final_checkpoint.starts_with(checkpoint_dir(&runs[0].run_dir, 0)));
    assert!(runs[0].final_checkpoint.exists());
}

#[test]
fn zero_finetune_leaves_chained_success_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = presets::chain2skill();
    for s in [
        "chain.pretrain_a=1",
        "chain.pretrain_b=1",
        "chain.finetune=0",
        "chain.explore_episodes=4",
        "chain.skill_episodes=4",
        "chain.init_samples=20",
        "chain.eval_episodes=20",
        "tdrp.grad_steps=10",
        "ppo.rollout_steps=64",
        "ppo.minibatch=32",
        "eval_episodes=2",
    ] {
        config.set_assignment(s).unwrap();
    }
    let (a, b) = pretrain_skills(&config, 1, dir.path()).unwrap();
    let report = run_skill_chain(&config, 1, &a, &b, dir.path()).unwrap();
    assert!(report.rows.is_empty());
    assert_eq!(report.success_pre, report.success_post);
    assert_eq!(report.handoff_pre, report.handoff_post);
}

#[test]
fn chain_encoder_training_orders_states_by_time() {
    let spec = EnvSpec::chain();
    let walker = ScriptedPolicy { speed: 0.5, noise: 0.0 };
    let one = scripted_trajectories(&spec, walker, 1, 3).unwrap().remove(0);
    assert!(one.len() >= 8);
    let buffer: Vec<Trajectory> = vec![one; 4];
    let config = TdrpConfig {
        step: 2,
        grad_steps: 500,
        embedding_dim: 8,
        hidden: vec![32, 32],
        anchors: 16,
        ..TdrpConfig::default()
    };
    let mut encoder = Encoder::new(spec.state_dim(), config, &mut seeding::rng(5)).unwrap();
    let stats = encoder.train(&buffer, &mut seeding::rng(6)).unwrap();
    let n = 25;
    let first = mean(&stats.losses[..n]);
    let last = mean(&stats.losses[stats.losses.len() - n..]);
    assert!(last < first, "loss {first} -> {last}");
    let refs: Vec<&Trajectory> = buffer.iter().take(1).collect();
    let rho = embedding_gap_correlation(&encoder, &refs).unwrap();
    assert!(rho >= 0.8, "spearman {rho}");
}

#[test]
fn refreshed_centers_match_direct_clustering() {
    let spec = EnvSpec::umaze();
    let encoder = Encoder::new(spec.state_dim(), presets::desk_tdrp(8), &mut seeding::rng(8)).unwrap();
    let snapshot = encoder.snapshot();
    let goals = scripted_trajectories(&spec, presets::umaze_demonstrator(), 40, 12).unwrap();
    let mut set = GoalSet::new(128);
    for t in &goals {
        set.insert(t.final_state().clone());
    }
    assert_eq!(set.len(), 40);
    let centers = refresh_centers(&mut set, &snapshot, 8, 21).unwrap();
    assert_eq!(centers.len(), 8);

    let embedded: Vec<_> = set.states().map(|s| snapshot.encode(s).unwrap()).collect();
    let direct = kmeans(&embedded, 8, 21, 100, 1e-9).unwrap();
    let inertia = |cs: &[Vec<f64>]| -> f64 {
        embedded
            .iter()
            .map(|e| {
                cs.iter()
                    .map(|c| c.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    assert!((inertia(&centers) - direct.inertia).abs() <= 1e-9 * (1.0 + direct.inertia));
}

#[test]
fn ablation_report_is_reproducible() {
    let spec = presets::ablation_chain();
    let walker = presets::ablation_walker();
    let buffer = scripted_trajectories(&spec, walker, 6, 1).unwrap();
    let eval = scripted_trajectories(&spec, walker, 3, 2).unwrap();
    let config = TdrpConfig {
        grad_steps: 30,
        ..presets::desk_tdrp(4)
    };
    let a = run_step_ablation(&config, &[4, 8], &buffer, &eval, 7, None).unwrap();
    let b = run_step_ablation(&config, &[4, 8], &buffer, &eval, 7, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
}

#[test]
fn raw_ppo_solves_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = presets::chain_sanity();
    config.seeds = vec![0];
    config.output_dir = dir.path().to_path_buf();
    let runs = run_single_task(&config).unwrap();
    let rows = &runs[0].rows;
    assert!(rows.len() <= 200);
    let best = rows.iter().map(|r| r.success_rate).fold(0.0, f64::max);
    let first = rows.iter().position(|r| r.success_rate >= 0.95);
    println!("chain sanity: first iteration at >= 0.95 {first:?}, best {best:.2}");
    assert!(first.is_some(), "best success {best}");
}
