use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tdrp_core::envs::{EnvId, ScriptedPolicy};
use tdrp_core::harness::{
    self, eval_policy, io, presets, pretrain_skills, run_single_task, run_skill_chain, run_step_ablation,
    scripted_trajectories, scripted_trajectories_from_anywhere, Checkpoint, ExperimentConfig,
};
use tdrp_core::Trajectory;

/// Environment variable overriding the root seed(s) of every command.
const SEED_VAR: &str = "TDRP_SEED";

#[derive(Parser)]
#[command(name = "tdrp", version, about = "Transition-distance representations and auxiliary rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Start from a named preset.
    #[arg(long)]
    preset: Option<String>,
    /// key=value config file, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set ppo.learning_rate=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single task for every configured seed.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Skill-chaining pipeline: pretrain (unless checkpoints are given),
    /// fine-tune skill A against skill B's initial set, report chained success.
    Chain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        ckpt_a: Option<PathBuf>,
        #[arg(long)]
        ckpt_b: Option<PathBuf>,
    },
    /// Train one encoder per `step` value on a shared scripted buffer.
    AblateStep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,24")]
        steps: Vec<usize>,
        /// Scripted training episodes.
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        /// Held-out scripted episodes for the correlation (0 = training buffer).
        #[arg(long, default_value_t = 20)]
        eval_episodes: usize,
    },
    /// Evaluate a checkpoint with mean actions and raw rewards.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export embeddings of stored trajectories under a checkpoint's encoder.
    Embed {
        checkpoint: PathBuf,
        /// Trajectory CSV as written by `demo-record --trajectories`.
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long, default_value = "embeddings.csv")]
        out: PathBuf,
    },
    /// Record scripted solutions: successful final states as a goal-seed
    /// file and, optionally, the full trajectories.
    DemoRecord {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value = "demo_goals.csv")]
        out: PathBuf,
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Start episodes from uniformly drawn free positions.
        #[arg(long)]
        anywhere: bool,
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn root_seeds() -> Result<Option<Vec<u64>>> {
    let Ok(raw) = std::env::var(SEED_VAR) else {
        return Ok(None);
    };
    let seeds = raw
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| anyhow!("{SEED_VAR}={raw:?} is not a comma-separated list of seeds"))?;
    Ok(Some(seeds))
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.preset {
        Some(name) => presets::by_name(name)
            .ok_or_else(|| anyhow!("unknown preset {name:?} (known: {})", presets::NAMES.join(", ")))?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text)?;
    }
    for s in &args.sets {
        config.set_assignment(s)?;
    }
    if let Some(seeds) = root_seeds()? {
        config.seeds = seeds;
    }
    config.validate()?;
    Ok(config)
}

fn first_seed(config: &ExperimentConfig) -> u64 {
    config.seeds[0]
}

fn demonstrator(config: &ExperimentConfig) -> ScriptedPolicy {
    match config.env.id {
        EnvId::Umaze => presets::umaze_demonstrator(),
        _ => presets::ablation_walker(),
    }
}

fn train(cfg: &ConfigArgs) -> Result<()> {
    let config = load_config(cfg)?;
    for s in run_single_task(&config)? {
        let last = s.rows.last();
        println!(
            "seed {} iterations {} success {:.3} return {:.3} -> {}",
            s.seed,
            s.rows.len(),
            last.map_or(f64::NAN, |r| r.success_rate),
            last.map_or(f64::NAN, |r| r.mean_raw_return),
            s.run_dir.display()
        );
    }
    Ok(())
}

fn chain(cfg: &ConfigArgs, ckpt_a: Option<&Path>, ckpt_b: Option<&Path>) -> Result<()> {
    let config = load_config(cfg)?;
    if config.env.id != EnvId::Chain2Skill {
        bail!("chain needs the chain2skill environment (try --preset chain2skill)");
    }
    for &seed in &config.seeds {
        let dir = harness::run_dir(&config.output_dir, seed);
        let (a, b) = match (ckpt_a, ckpt_b) {
            (Some(a), Some(b)) => (a.to_path_buf(), b.to_path_buf()),
            (None, None) => pretrain_skills(&config, seed, &dir)?,
            _ => bail!("give both --ckpt-a and --ckpt-b, or neither to pretrain"),
        };
        let r = run_skill_chain(&config, seed, &a, &b, &dir)?;
        println!(
            "seed {seed} chained success {:.3} -> {:.3} handoff {:.3} -> {:.3} -> {}",
            r.success_pre,
            r.success_post,
            r.handoff_pre,
            r.handoff_post,
            dir.join("chain_report.csv").display()
        );
    }
    Ok(())
}

fn ablate(cfg: &ConfigArgs, steps: &[usize], episodes: usize, eval_episodes: usize) -> Result<()> {
    let config = load_config(cfg)?;
    let seed = first_seed(&config);
    let walker = demonstrator(&config);
    let buffer = scripted_trajectories(&config.env, walker, episodes, tdrp_core::seeding::derive(seed, "train"))?;
    let eval = scripted_trajectories(&config.env, walker, eval_episodes, tdrp_core::seeding::derive(seed, "test"))?;
    let rows = run_step_ablation(&config.tdrp, steps, &buffer, &eval, seed, Some(&config.output_dir))?;
    for r in rows {
        println!("step {} spearman {:.3} raw {:.3} loss {:.4}", r.step, r.spearman, r.raw_spearman, r.final_loss);
    }
    Ok(())
}

fn eval(checkpoint: &Path, episodes: usize, seed: u64) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let seed = root_seeds()?.map_or(seed, |s| s[0]);
    let r = eval_policy(&ckpt.policy, &ckpt.config.env, episodes, seed)?;
    println!("success {:.3} return {:.3} episodes {episodes}", r.success_rate, r.mean_raw_return);
    Ok(())
}

fn embed(checkpoint: &Path, trajectories: &Path, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let encoder = ckpt
        .encoder
        .ok_or_else(|| anyhow!("{} holds no encoder (raw-reward run)", checkpoint.display()))?;
    let trajs = io::read_trajectories(trajectories)?;
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    io::export_embeddings(out, &encoder, &refs)?;
    println!("{} trajectories -> {}", trajs.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn demo_record(
    cfg: &ConfigArgs,
    episodes: usize,
    out: &Path,
    trajectories: Option<&Path>,
    anywhere: bool,
    speed: Option<f64>,
    noise: Option<f64>,
) -> Result<()> {
    let config = load_config(cfg)?;
    let mut policy = demonstrator(&config);
    policy.speed = speed.unwrap_or(policy.speed);
    policy.noise = noise.unwrap_or(policy.noise);
    let seed = tdrp_core::seeding::derive(first_seed(&config), "demo");
    let demos = if anywhere {
        scripted_trajectories_from_anywhere(&config.env, policy, episodes, seed)?
    } else {
        scripted_trajectories(&config.env, policy, episodes, seed)?
    };
    let goals: Vec<_> = demos.iter().filter(|t| t.succeeded()).map(|t| t.final_state().clone()).collect();
    if goals.is_empty() {
        bail!("no scripted episode reached the goal; nothing to record");
    }
    io::write_states(out, &goals)?;
    if let Some(path) = trajectories {
        io::write_trajectories(path, &demos)?;
    }
    println!("{} of {} episodes succeeded -> {}", goals.len(), demos.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg } => train(&cfg),
        Command::Chain { cfg, ckpt_a, ckpt_b } => chain(&cfg, ckpt_a.as_deref(), ckpt_b.as_deref()),
        Command::AblateStep {
            cfg,
            steps,
            episodes,
            eval_episodes,
        } => ablate(&cfg, &steps, episodes, eval_episodes),
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => eval(&checkpoint, episodes, seed),
        Command::Embed {
            checkpoint,
            trajectories,
            out,
        } => embed(&checkpoint, &trajectories, &out),
        Command::DemoRecord {
            cfg,
            episodes,
            out,
            trajectories,
            anywhere,
            speed,
            noise,
        } => demo_record(&cfg, episodes, &out, trajectories.as_deref(), anywhere, speed, noise),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
