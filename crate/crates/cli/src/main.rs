use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use allseason::env::{make_schedule, orthonormal_parameters, ChangeSchedule, Pattern};
use allseason::harness::{self, runner::stream, ExperimentConfig};

#[derive(Parser)]
#[command(name = "allseason", version, about = "Seasonal contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy of a config and write per-step CSV logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output` or `results`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune each policy's grid on the head of the stream (the config's
    /// `validation_fraction`, 10% by default).
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the report and the tuned config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate step logs into a mean ± std table.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print a change schedule as TOML, either generated from a pattern or
    /// from an explicit sequence of parameter ids over equal periods.
    Schedule(ScheduleArgs),
}

fn output_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let config = load(config)?;
    let seeds = seed.map_or_else(|| config.seeds.clone(), |s| vec![s]);
    let out = output_dir(&config, out);
    log::info!(
        "running {} policies x {} seeds, horizon {}",
        config.policies.len(),
        seeds.len(),
        config.horizon
    );
    let logs = harness::run_seeds(&config, &seeds)?;
    for log in &logs {
        println!(
            "{:<24} seed {:<6} mean reward {:.4}",
            log.algorithm,
            log.seed,
            log.mean_reward()
        );
    }
    for path in harness::write_logs(&config, &logs, &out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn grid(config_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let config = load(config_path)?;
    let out = output_dir(&config, out);
    let (reports, tuned) = harness::grid_search_all(&config)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.to_text());
    }
    print!("{text}");
    fs::create_dir_all(&out)?;
    let slug = harness::config::slugify(&config.name);
    fs::write(out.join(format!("{slug}.grid.txt")), &text)?;
    let tuned_path = out.join(format!("{slug}.tuned.toml"));
    fs::write(&tuned_path, tuned.to_toml())?;
    println!("tuned config: {}", tuned_path.display());
    Ok(())
}

fn summarize(input: &Path) -> Result<()> {
    let summary = harness::summarize_dir(input)?;
    let file = fs::File::create(input.join("summary.csv"))?;
    summary.write_csv(file)?;
    print!("{}", summary.to_text());
    Ok(())
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, required_unless_present = "sequence", conflicts_with = "sequence")]
    pattern: Option<Pattern>,
    #[arg(long, value_delimiter = ',')]
    sequence: Option<Vec<usize>>,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 4)]
    parameters: usize,
    #[arg(long, default_value_t = 600)]
    min_segment: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attach orthonormal parameter vectors of this dimension.
    #[arg(long)]
    theta_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    theta_seed: u64,
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let mut s = match (&a.pattern, &a.sequence) {
        (Some(p), _) => {
            make_schedule(*p, a.horizon, a.parameters, a.min_segment, &mut stream(a.seed, 0))?
        }
        (None, Some(seq)) => ChangeSchedule::from_sequence(a.horizon, seq)?,
        (None, None) => anyhow::bail!("either --pattern or --sequence is required"),
    };
    if let Some(dim) = a.theta_dim {
        let count = s.param_ids().into_iter().max().unwrap_or(0) + 1;
        s = s.with_parameters(orthonormal_parameters(count, dim, a.theta_seed)?)?;
    }
    print!("{}", s.to_file(a.pattern.map(|p| p.name())).to_toml());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Grid { config, out } => grid(&config, out),
        Command::Summarize { input } => summarize(&input),
        Command::Schedule(args) => schedule(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
