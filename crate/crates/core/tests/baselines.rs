//! Monte Carlo baselines and scripted-policy checks on the environments.

use tdrp_core::envs::{random_action, Env, EnvSpec, ScriptedPolicy, SKILL_B_INIT};
use tdrp_core::harness::{eval_actor, run_episode};
use tdrp_core::ppo::{collect_rollout, Policy};
use tdrp_core::rewards::RewardShaper;
use tdrp_core::seeding;

#[test]
fn random_policy_rarely_solves_umaze() {
    let spec = EnvSpec::umaze();
    let mut rng = seeding::rng(17);
    let r = eval_actor(&spec, 500, 5, |_| Ok(random_action(&spec, &mut rng))).unwrap();
    println!("random umaze success {:.3}", r.success_rate);
    assert!(r.success_rate < 0.1, "{}", r.success_rate);
}

#[test]
fn naive_handoff_mostly_misses_skill_b_start() {
    let spec = EnvSpec::chain2skill();
    let spec_a = spec.skill_a();
    let mut env = Env::new(spec_a.clone()).unwrap();
    let mut rng = seeding::rng(23);
    let episodes = 1000;
    let mut inside = 0;
    for i in 0..episodes {
        let initial = env.reset(seeding::mix(9, i));
        let t = run_episode(&mut env, initial, |_| Ok(random_action(&spec_a, &mut rng))).unwrap();
        if SKILL_B_INIT.contains(spec_a.intrinsic(t.final_state())) {
            inside += 1;
        }
    }
    let rate = inside as f64 / episodes as f64;
    println!("naive handoff rate {rate:.3} over {episodes} random skill-A episodes");
    assert!(rate < 0.5, "{rate}");
}

#[test]
fn scripted_forward_chain_episode() {
    let spec = EnvSpec::chain();
    let expected = (spec.chain_length / spec.max_step).round() as usize;
    let mut rng = seeding::rng(0);
    let walker = ScriptedPolicy::default();
    let r = eval_actor(&spec, 10, 3, |s| Ok(walker.act(&spec, s, &mut rng))).unwrap();
    for t in &r.episodes {
        assert_eq!(t.len(), expected);
        assert_eq!(t.raw_rewards.iter().filter(|&&x| x > 0.0).count(), 1);
        assert!(t.succeeded());
    }
}

#[test]
fn rollout_of_untrained_policy_respects_horizon() {
    let spec = EnvSpec::umaze();
    let mut rng = seeding::rng(2);
    let policy = Policy::new(spec.state_dim(), spec.action_dim(), &[16], 0.0, &mut rng).unwrap();
    let mut env = Env::new(spec.clone()).unwrap();
    let batch = collect_rollout(&mut env, &policy, &RewardShaper::identity(), 400, &mut rng, None).unwrap();
    for t in batch.trajectories() {
        assert!(t.len() <= spec.horizon);
        assert!(t.states.iter().all(|s| s.len() == spec.state_dim()));
    }
}
