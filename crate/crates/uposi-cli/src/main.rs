//! Command-line frontend: train policies and identification networks, run
//! the evaluation experiments, and self-verify the numerics.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use uposi::ckpt::{OsiCheckpoint, PolicyCheckpoint};
use uposi::env::{make_env, Task};
use uposi::experiments::{
    extrapolation_experiment, linear_grid, sweep_mu, varying_friction_experiment, EvalController,
};
use uposi::osi::{train_osi, OsiNetwork, OsiTrainOptions};
use uposi::presets::{self, RunConfig};
use uposi::report::{
    write_extrapolation_csv, write_friction_csv, write_mu_trace_csv, write_sweep_csv, RunManifest,
};
use uposi::trpo::{train_up, TrainOptions};
use uposi::RandomSource;

#[derive(Parser)]
#[command(name = "uposi", version, about = "Universal policies with online system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a universal policy with TRPO.
    TrainUp {
        /// Task: dpend, arm, hopper or cartpole.
        task: String,
        /// TOML run config; replaces the built-in preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: $UPOSI_OUT_DIR or ./out/<task>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Built-in preset when no config file is given: desk or paper.
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Train the conventional state-only baseline policy.
        #[arg(long)]
        regular: bool,
        /// Override the preset iteration count.
        #[arg(long)]
        iterations: Option<usize>,
        /// Override the per-iteration sample budget.
        #[arg(long)]
        samples: Option<usize>,
        /// Checkpoint every N iterations (0 = final checkpoint only).
        #[arg(long, default_value_t = 0)]
        checkpoint_interval: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Train the identification network against a trained policy.
    TrainOsi {
        task: String,
        /// Trained policy checkpoint.
        #[arg(long)]
        up: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the preset round count.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluation experiments.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the numeric and physics verification suite.
    Verify,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Performance across a μ grid for one controller.
    Sweep {
        task: String,
        #[arg(long)]
        up: PathBuf,
        #[arg(long)]
        osi: Option<PathBuf>,
        /// up-true, up-osi, regular or up-fixed.
        #[arg(long, default_value = "up-true")]
        controller: String,
        /// μ value (task units, first component) for up-fixed.
        #[arg(long)]
        fixed_mu: Option<f64>,
        #[arg(long, default_value_t = 25)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        n_eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hopper on the varying-friction track (0.9 outside 20–30 m).
    FrictionTrack {
        task: String,
        #[arg(long)]
        up: PathBuf,
        #[arg(long)]
        osi: PathBuf,
        /// Comma-separated μ values for the 20–30 m region.
        #[arg(long, default_value = "0.3,0.4,0.5,0.55,0.6,0.7,0.8,0.9,1.0")]
        mu_vary: String,
        #[arg(long, default_value_t = 4)]
        n_eval: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// μ_vary whose rollout gets a predicted-vs-actual trace.
        #[arg(long, default_value_t = 0.55)]
        trace_at: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cart-pole along the coupled (length, mass) line beyond training.
    Extrapolate {
        task: String,
        #[arg(long)]
        up: PathBuf,
        #[arg(long)]
        osi: PathBuf,
        #[arg(long, default_value_t = 13)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        n_eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn out_dir(explicit: Option<PathBuf>, task: &str, kind: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let base = std::env::var_os("UPOSI_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        base.join(task).join(kind)
    })
}

/// Resolve the run config: an explicit TOML file wins, otherwise the preset.
fn load_config(task: Task, config: &Option<PathBuf>, scale: &str) -> Result<RunConfig> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
        }
        None => match scale {
            "desk" => Ok(presets::desk(task)),
            "paper" => Ok(presets::paper(task)),
            other => bail!("unknown scale `{other}` (expected desk or paper)"),
        },
    }
}

/// Write the resolved config next to the outputs and return its exact text
/// (the manifest hashes this).
fn persist_config(config: &RunConfig, dir: &Path) -> Result<String> {
    let text = toml::to_string_pretty(config).context("serializing resolved config")?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), &text)
        .with_context(|| format!("writing {}", dir.join("config.toml").display()))?;
    Ok(text)
}

fn load_policy(path: &Path, task: Task) -> Result<PolicyCheckpoint> {
    let ckpt = PolicyCheckpoint::load(path)
        .with_context(|| format!("loading policy {}", path.display()))?;
    if ckpt.task != task.name() {
        bail!(
            "policy {} was trained for `{}`, not `{}`",
            path.display(),
            ckpt.task,
            task.name()
        );
    }
    Ok(ckpt)
}

fn load_osi(path: &Path, task: Task) -> Result<OsiNetwork> {
    let ckpt = OsiCheckpoint::load(path)
        .with_context(|| format!("loading identification network {}", path.display()))?;
    if ckpt.task != task.name() {
        bail!(
            "identification network {} was trained for `{}`, not `{}`",
            path.display(),
            ckpt.task,
            task.name()
        );
    }
    Ok(OsiNetwork::from_checkpoint(ckpt))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainUp {
            task,
            config,
            seed,
            out,
            scale,
            regular,
            iterations,
            samples,
            checkpoint_interval,
            quiet,
        } => {
            let task = Task::parse(&task)?;
            let mut run_config = load_config(task, &config, &scale)?;
            if let Some(k) = iterations {
                run_config.trpo.iterations = k;
            }
            if let Some(n) = samples {
                run_config.trpo.samples_per_iteration = n;
            }
            run_config.trpo.regular = regular;

            let kind = if regular { "regular" } else { "up" };
            let dir = out_dir(out, task.name(), kind);
            let config_text = persist_config(&run_config, &dir)?;

            let env_config = run_config.env.clone();
            let factory = move || make_env(task, &env_config);
            let options = TrainOptions {
                log_path: Some(dir.join("train_log.csv")),
                checkpoint_dir: if checkpoint_interval > 0 {
                    Some(dir.join("checkpoints"))
                } else {
                    None
                },
                checkpoint_interval,
                quiet,
            };
            let (policy, _, stats) = train_up(&factory, &run_config.trpo, &options, seed)?;

            let spec = make_env(task, &run_config.env)?.spec().clone();
            let ckpt_path = dir.join("policy.json");
            PolicyCheckpoint::from_policy(&policy, &spec).save(&ckpt_path)?;
            RunManifest::new(&format!("train-up {}", task.name()), task.name(), seed, &config_text)
                .save(&dir.join("manifest.json"))?;
            if let Some(last) = stats.last() {
                println!(
                    "trained {} for {} iterations (final mean return {:.1}); checkpoint at {}",
                    kind,
                    stats.len(),
                    last.mean_return,
                    ckpt_path.display()
                );
            }
            Ok(())
        }

        Command::TrainOsi {
            task,
            up,
            config,
            seed,
            out,
            rounds,
            quiet,
        } => {
            let task = Task::parse(&task)?;
            let mut run_config = load_config(task, &config, "desk")?;
            if let Some(r) = rounds {
                run_config.osi.outer_iterations = r;
            }
            let policy = load_policy(&up, task)?;
            if policy.policy.mu_dim() == 0 {
                bail!("a regular (state-only) policy cannot drive identification training");
            }

            let dir = out_dir(out, task.name(), "osi");
            let config_text = persist_config(&run_config, &dir)?;
            let env_config = run_config.env.clone();
            let factory = move || make_env(task, &env_config);
            let options = OsiTrainOptions {
                log_path: Some(dir.join("osi_log.csv")),
                quiet,
            };
            let (osi, stats) = train_osi(&policy.policy, &factory, &run_config.osi, &options, seed)?;
            let ckpt_path = dir.join("osi.json");
            osi.to_checkpoint(task.name()).save(&ckpt_path)?;
            RunManifest::new(
                &format!("train-osi {}", task.name()),
                task.name(),
                seed,
                &config_text,
            )
            .save(&dir.join("manifest.json"))?;
            if let Some(last) = stats.last() {
                println!(
                    "identification trained over {} rounds (holdout mse {:.5}); checkpoint at {}",
                    stats.len(),
                    last.holdout_mse,
                    ckpt_path.display()
                );
            }
            Ok(())
        }

        Command::Eval(eval) => run_eval(eval),

        Command::Verify => {
            let results = uposi::verify::run_all();
            let mut failed = 0;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag}  {}  ({})", r.name, r.detail);
                if !r.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
            println!("all {} checks passed", results.len());
            Ok(())
        }
    }
}

fn run_eval(eval: EvalCommand) -> Result<()> {
    match eval {
        EvalCommand::Sweep {
            task,
            up,
            osi,
            controller,
            fixed_mu,
            grid,
            n_eval,
            seed,
            config,
            out,
        } => {
            let task = Task::parse(&task)?;
            let run_config = load_config(task, &config, "desk")?;
            let policy = load_policy(&up, task)?;
            let osi_net = match &osi {
                Some(path) => Some(load_osi(path, task)?),
                None => None,
            };

            let eval_controller = match controller.as_str() {
                "up-true" => EvalController::UpTrue,
                "regular" => EvalController::Regular,
                "up-osi" => EvalController::UpOsi(
                    osi_net
                        .as_ref()
                        .context("--controller up-osi needs --osi <ckpt>")?,
                ),
                "up-fixed" => {
                    let v = fixed_mu.context("--controller up-fixed needs --fixed-mu <value>")?;
                    let mut raw = policy.mu_bounds.midpoint().values().to_vec();
                    raw[0] = v;
                    EvalController::UpFixed(uposi::types::normalize_mu(&raw, &policy.mu_bounds))
                }
                other => bail!("unknown controller `{other}`"),
            };

            let dir = out_dir(out, task.name(), "sweep");
            let config_text = persist_config(&run_config, &dir)?;
            let grid_points = linear_grid(task, &run_config.env, grid)?;
            let root = RandomSource::new(seed);
            let result = sweep_mu(
                &policy.policy,
                &eval_controller,
                task,
                &run_config.env,
                &grid_points,
                n_eval,
                &root,
            )?;
            let csv_path = dir.join(format!("sweep_{}.csv", result.controller));
            write_sweep_csv(&result, &csv_path)?;
            RunManifest::new(
                &format!("eval sweep {} --controller {}", task.name(), result.controller),
                task.name(),
                seed,
                &config_text,
            )
            .save(&dir.join(format!("manifest_{}.json", result.controller)))?;
            let mean: f64 =
                result.points.iter().map(|p| p.mean_perf).sum::<f64>() / result.points.len() as f64;
            println!(
                "swept {} points × {} evals ({}): grid-mean performance {:.4} -> {}",
                grid,
                n_eval,
                result.controller,
                mean,
                csv_path.display()
            );
            Ok(())
        }

        EvalCommand::FrictionTrack {
            task,
            up,
            osi,
            mu_vary,
            n_eval,
            steps,
            trace_at,
            seed,
            config,
            out,
        } => {
            let task = Task::parse(&task)?;
            if task != Task::Hopper {
                bail!("the friction-track experiment is a hopper experiment");
            }
            let run_config = load_config(task, &config, "desk")?;
            let policy = load_policy(&up, task)?;
            let osi_net = load_osi(&osi, task)?;
            let grid: Vec<f64> = mu_vary
                .split(',')
                .map(|s| s.trim().parse::<f64>().context("parsing --mu-vary"))
                .collect::<Result<_>>()?;

            let dir = out_dir(out, task.name(), "friction-track");
            let config_text = persist_config(&run_config, &dir)?;
            let root = RandomSource::new(seed);
            let result = varying_friction_experiment(
                &policy.policy,
                &osi_net,
                &run_config.env,
                &grid,
                n_eval,
                steps,
                Some(trace_at),
                &root,
            )?;
            write_friction_csv(&result, &dir.join("friction_curve.csv"))?;
            if result.trace.is_some() {
                write_mu_trace_csv(&result, &dir.join("mu_trace.csv"))?;
            }
            RunManifest::new(
                &format!("eval friction-track {}", task.name()),
                task.name(),
                seed,
                &config_text,
            )
            .save(&dir.join("manifest.json"))?;
            println!(
                "friction track over {:?}: results in {}",
                grid,
                dir.display()
            );
            Ok(())
        }

        EvalCommand::Extrapolate {
            task,
            up,
            osi,
            grid,
            n_eval,
            seed,
            config,
            out,
        } => {
            let task = Task::parse(&task)?;
            if task != Task::Cartpole {
                bail!("the extrapolation experiment is a cart-pole experiment");
            }
            let run_config = load_config(task, &config, "desk")?;
            let policy = load_policy(&up, task)?;
            let osi_net = load_osi(&osi, task)?;

            let dir = out_dir(out, task.name(), "extrapolate");
            let config_text = persist_config(&run_config, &dir)?;
            let root = RandomSource::new(seed);
            let result = extrapolation_experiment(
                &policy.policy,
                &osi_net,
                &run_config.env,
                grid,
                n_eval,
                &root,
            )?;
            write_extrapolation_csv(&result, &dir.join("extrapolation.csv"))?;
            RunManifest::new(
                &format!("eval extrapolate {}", task.name()),
                task.name(),
                seed,
                &config_text,
            )
            .save(&dir.join("manifest.json"))?;
            println!("extrapolation over {grid} points: results in {}", dir.display());
            Ok(())
        }
    }
}
