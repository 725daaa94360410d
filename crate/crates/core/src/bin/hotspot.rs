use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hotspot::environment::{Environment, ResetOptions};
use hotspot::harness::{
    dump_field, dump_posterior, evaluate, field_csv, load_policy, parse_raw_curve, parse_records,
    postprocess_curve, posterior_csv, qtable_text, raw_curve_csv, records_text, smoothed_curve_csv,
    ExperimentConfig, StartSpec,
};
use hotspot::qlearning::{rollout, train_with_checkpoints};
use hotspot::rng::seeded;
use hotspot::{Error, Result, RewardKind};

#[derive(Parser)]
#[command(name = "hotspot", version, about = "Drone hotspot flux estimation: training, evaluation and data dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with [scenario], [train] and [eval] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-table and write it as text.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reward: Option<RewardKind>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Raw learning curve (episode,reward_sum) destination.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Write `<out>.<episodes>` every this many episodes.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Evaluate a Q-table or path file over many flights and write a JSON report.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Q-table file, path file, or `grid-path` for the shipped baseline.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        flights: Option<usize>,
        #[arg(long)]
        flux: Option<f64>,
        /// upwind, downwind, crosswind or cx,cy. Repeatable.
        #[arg(long)]
        start: Vec<StartSpec>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep every flight record in the report.
        #[arg(long)]
        keep_flights: bool,
    },
    /// Fly once and write the full record as a JSON line.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        start: Option<StartSpec>,
        /// True flux; drawn from the scenario range when omitted.
        #[arg(long)]
        flux: Option<f64>,
        #[arg(long)]
        reward: Option<RewardKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Noise-free concentration at every cell centre as CSV.
    DumpField {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 250.0)]
        flux: f64,
    },
    /// Prior and fitted posterior densities of one recorded flight as CSV.
    DumpPosterior {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        record: PathBuf,
        /// Which record of the file, 0-based.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Smooth and normalize a raw learning curve.
    Curve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, reward, episodes, seed, curve, checkpoint_every } => {
            let mut cfg = load_config(common.config.as_deref())?;
            let train = &mut cfg.train;
            train.reward_kind = reward.unwrap_or(train.reward_kind);
            train.episodes = episodes.unwrap_or(train.episodes);
            train.seed = seed.unwrap_or(train.seed);
            train.checkpoint_every = checkpoint_every.or(train.checkpoint_every);
            if train.checkpoint_every.is_some() && common.out.is_none() {
                return Err(Error::Config("--checkpoint-every needs --out".into()));
            }
            let out = common.out.clone();
            let outcome = train_with_checkpoints(&cfg.train, &cfg.scenario, |done, table| {
                let mut path = out.clone().expect("checked above").into_os_string();
                path.push(format!(".{done}"));
                Ok(std::fs::write(path, qtable_text(table))?)
            })?;
            if let Some(path) = curve {
                std::fs::write(path, raw_curve_csv(&outcome.curve))?;
            }
            emit(common.out.as_deref(), &qtable_text(&outcome.table))
        }
        Command::Eval { common, policy, flights, flux, start, seed, workers, keep_flights } => {
            let mut cfg = load_config(common.config.as_deref())?;
            let policy = load_policy(&policy)?;
            let eval = &mut cfg.eval;
            eval.n_flights = flights.unwrap_or(eval.n_flights);
            eval.true_flux = flux.unwrap_or(eval.true_flux);
            if !start.is_empty() {
                eval.starts = start;
            }
            eval.seed = seed.unwrap_or(eval.seed);
            eval.workers = workers.or(eval.workers);
            eval.keep_flights |= keep_flights;
            let report = evaluate(&policy, &cfg.eval, &cfg.scenario)?;
            for g in &report.groups {
                eprintln!("{:>10} {:?}: CRPS {:.3} ± {:.3} over {} flights", g.label, g.start_cell, g.mean_crps, g.sd_crps, g.n_flights);
            }
            emit(common.out.as_deref(), &report.to_json()?)
        }
        Command::Simulate { common, policy, start, flux, reward, seed } => {
            let cfg = load_config(common.config.as_deref())?;
            let policy = load_policy(&policy)?;
            let start = start.map(|s| s.resolve(&cfg.scenario)).transpose()?;
            let kind = reward.unwrap_or(cfg.train.reward_kind);
            let mut env = Environment::new(cfg.scenario, kind)?;
            let opts = ResetOptions { true_flux: flux, start };
            let record = rollout(&policy, &mut env, &opts, &mut seeded(seed))?;
            emit(common.out.as_deref(), &records_text(&[record])?)
        }
        Command::DumpField { common, flux } => {
            let cfg = load_config(common.config.as_deref())?;
            emit(common.out.as_deref(), &field_csv(&dump_field(&cfg.scenario, flux)?))
        }
        Command::DumpPosterior { common, record, index, points } => {
            let cfg = load_config(common.config.as_deref())?;
            let records = parse_records(&std::fs::read_to_string(&record)?)?;
            let rec = records.get(index).ok_or_else(|| {
                Error::Config(format!("record file has {} records, no index {index}", records.len()))
            })?;
            let rows = dump_posterior(rec, &cfg.scenario.prior, points)?;
            emit(common.out.as_deref(), &posterior_csv(&rows))
        }
        Command::Curve { input, window, out } => {
            let raw = parse_raw_curve(&std::fs::read_to_string(&input)?)?;
            emit(out.as_deref(), &smoothed_curve_csv(&postprocess_curve(&raw, window)?))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hotspot: {e}");
            ExitCode::FAILURE
        }
    }
}
