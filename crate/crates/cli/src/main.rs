mod config;
mod plot;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddqn_core::harness::{EpisodeStats, RunSummary, TrainObserver};
use ddqn_core::{evaluate, sweep, train_with, Agent, Axis, Checkpoint, Execution, SweepOptions};
use serde::{Deserialize, Serialize};

use crate::config::RunConfigFile;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "ddqn",
    version,
    about = "Double deep Q-learning on a 2D lunar lander"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes log.csv, checkpoint.json and result.json.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Overrides the configured episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Greedy evaluation of a checkpoint; writes eval.csv.
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train and evaluate over a hyperparameter grid; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        shared: Shared,
        /// Axis as name=v1,v2 (repeatable), e.g. gamma=0.9,0.99 or hidden=64x128,128x256.
        #[arg(long = "axes")]
        axes: Vec<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Concurrent trials; 1 runs sequentially, 0 uses every core.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        eval_trials: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Render a log.csv or sweep.csv as an SVG line chart.
    Plot {
        #[command(flatten)]
        shared: Shared,
        /// CSV produced by train or sweep.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Contents of result.json.
#[derive(Serialize, Deserialize)]
pub struct ResultFile {
    pub config: RunConfigFile,
    pub summary: RunSummary,
    /// Relative to the directory holding result.json.
    pub checkpoint: PathBuf,
}

fn out_dir(shared: &Shared, cfg: &RunConfigFile) -> PathBuf {
    shared
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(runtime("cannot create output directory"))
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(runtime("cannot create output file"))?;
    let mut out = BufWriter::new(file);
    write(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

struct Progress {
    quiet: bool,
    window: Vec<f64>,
}

impl TrainObserver for Progress {
    fn on_episode(&mut self, stats: &EpisodeStats, agent: &Agent) {
        self.window.push(stats.cumulative_reward);
        if self.quiet || !stats.episode.is_multiple_of(10) {
            return;
        }
        let tail = &self.window[self.window.len().saturating_sub(10)..];
        println!(
            "episode {:>5}  steps {:>8}  reward {:>9.2}  ma10 {:>9.2}  epsilon {:.4}",
            stats.episode,
            agent.action_steps(),
            stats.cumulative_reward,
            tail.iter().sum::<f64>() / tail.len() as f64,
            stats.epsilon
        );
    }
}

fn cmd_train(shared: Shared, episodes: Option<usize>) -> Result<(), CliError> {
    let mut cfg = RunConfigFile::load(shared.config.as_deref())?;
    if let Some(seed) = shared.seed {
        cfg.run.seed = seed;
    }
    if let Some(e) = episodes {
        cfg.agent.episodes = e;
    }
    cfg.agent
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = out_dir(&shared, &cfg);
    create_dir(&dir)?;

    let mut progress = Progress {
        quiet: shared.quiet,
        window: Vec::new(),
    };
    let run = train_with(&cfg.agent, &cfg.env, cfg.run.seed, &mut progress)
        .map_err(runtime("training failed"))?;

    write_file(&dir.join("log.csv"), |out| {
        run.write_log_csv(out).map_err(io::Error::other)
    })?;
    let checkpoint = PathBuf::from("checkpoint.json");
    Checkpoint::from_agent(&run.agent)
        .save(dir.join(&checkpoint))
        .map_err(runtime("cannot write checkpoint"))?;
    let summary = run.summary();
    if !shared.quiet {
        eprintln!("elapsed {:.1}s", run.duration_secs);
        println!(
            "trained {} episodes ({} steps); final ma100 {}",
            summary.episodes,
            summary.action_steps,
            summary
                .final_ma100
                .map_or("n/a".to_string(), |v| format!("{v:.2}"))
        );
    }
    let result = ResultFile {
        config: cfg,
        summary,
        checkpoint,
    };
    let text = serde_json::to_string_pretty(&result).map_err(runtime("cannot encode result"))?;
    fs::write(dir.join("result.json"), text + "\n").map_err(runtime("cannot write result.json"))
}

fn cmd_eval(shared: Shared, checkpoint: PathBuf, trials: Option<usize>) -> Result<(), CliError> {
    let cfg = RunConfigFile::load(shared.config.as_deref())?;
    let trials = trials.unwrap_or(cfg.run.eval_trials);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let seed = shared.seed.unwrap_or(cfg.run.eval_seed);
    let params = Checkpoint::load(&checkpoint)
        .and_then(|ck| ck.params())
        .map_err(|e| CliError::Runtime(format!("cannot load {}: {e}", checkpoint.display())))?;
    let result = evaluate(&params, &cfg.env, trials, seed, Execution::Sequential)
        .map_err(runtime("evaluation failed"))?;

    let dir = shared.out.clone().unwrap_or_else(|| {
        checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    create_dir(&dir)?;
    write_file(&dir.join("eval.csv"), |out| {
        writeln!(out, "trial,reward,steps,outcome")?;
        for (i, ((r, s), o)) in result
            .rewards
            .iter()
            .zip(&result.steps)
            .zip(&result.outcomes)
            .enumerate()
        {
            writeln!(out, "{},{},{},{}", i + 1, r, s, o.as_str())?;
        }
        Ok(())
    })?;
    println!("mean {} std {} trials {}", result.mean, result.std, trials);
    Ok(())
}

fn cmd_sweep(
    shared: Shared,
    axes: Vec<String>,
    seeds: Vec<u64>,
    threads: Option<usize>,
    eval_trials: Option<usize>,
    episodes: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = RunConfigFile::load(shared.config.as_deref())?;
    if !axes.is_empty() {
        cfg.run.axes = axes;
    }
    if cfg.run.axes.is_empty() {
        cfg.run.axes = vec!["lambda=0.3,0.4,0.5,0.6".to_string()];
    }
    if !seeds.is_empty() {
        cfg.run.seeds = seeds;
    } else if let Some(seed) = shared.seed {
        cfg.run.seeds = vec![seed];
    }
    if let Some(t) = threads {
        cfg.run.threads = t;
    }
    if let Some(t) = eval_trials {
        cfg.run.eval_trials = t;
    }
    if let Some(e) = episodes {
        cfg.agent.episodes = e;
    }
    let parsed: Vec<Axis> = cfg
        .run
        .axes
        .iter()
        .map(|a| a.parse())
        .collect::<Result<_, _>>()
        .map_err(|e: ddqn_core::Error| CliError::Usage(e.to_string()))?;
    if cfg.run.eval_trials == 0 {
        return Err(CliError::Usage("eval_trials must be at least 1".into()));
    }

    let options = SweepOptions {
        eval_trials: cfg.run.eval_trials,
        eval_seed: cfg.run.eval_seed,
    };
    let table = sweep(
        &cfg.agent,
        &cfg.env,
        &parsed,
        &cfg.run.seeds,
        &options,
        Execution::from_threads(cfg.run.threads),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let dir = out_dir(&shared, &cfg);
    create_dir(&dir)?;
    write_file(&dir.join("sweep.csv"), |out| {
        table.write_csv(out).map_err(io::Error::other)
    })?;
    if !shared.quiet {
        println!("{}", table.header());
        for row in &table.rows {
            let values: Vec<String> = row.values.iter().map(ToString::to_string).collect();
            println!(
                "{},{},{:.2},{:.2},{:.2},{}",
                values.join(","),
                row.seed,
                row.final_ma100,
                row.eval_mean,
                row.eval_std,
                row.status
            );
        }
    }
    Ok(())
}

fn cmd_plot(shared: Shared, input: PathBuf) -> Result<(), CliError> {
    let text = fs::read_to_string(&input)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", input.display())))?;
    let chart = plot::chart_from_csv(&text)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into());
    let target = match shared.out {
        Some(p) if p.is_dir() => p.join(format!("{stem}.svg")),
        Some(p) => p,
        None => input.with_extension("svg"),
    };
    fs::write(&target, plot::render_svg(&chart)).map_err(runtime("cannot write SVG"))?;
    if !shared.quiet {
        println!("wrote {}", target.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { shared, episodes } => cmd_train(shared, episodes),
        Command::Eval {
            shared,
            checkpoint,
            trials,
        } => cmd_eval(shared, checkpoint, trials),
        Command::Sweep {
            shared,
            axes,
            seeds,
            threads,
            eval_trials,
            episodes,
        } => cmd_sweep(shared, axes, seeds, threads, eval_trials, episodes),
        Command::Plot { shared, input } => cmd_plot(shared, input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
