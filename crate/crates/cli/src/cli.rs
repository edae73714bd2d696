//! Command-line surface. Every flag overrides the config key of the same
//! name; `--records` and `--group` add entries to the dataset and group maps.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::RunError;

#[derive(Debug, Parser)]
#[command(name = "cocoa", version, about = "Uncertainty scoring and PRR evaluation for generation records")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score records with the configured estimators.
    Score(RunArgs),
    /// Compute PRR reports from previously written scores.
    Evaluate(RunArgs),
    /// Run the estimator × backend × strategy grid.
    Ablate(AblateArgs),
    /// Generate synthetic records.
    Synth(SynthArgs),
    /// Precompute similarity blocks into the records.
    Sim(RunArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset as NAME=PATH, or PATH (named after the file stem). Repeatable.
    #[arg(long = "records")]
    pub records: Vec<String>,
    /// Comma-separated estimator names, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_rejection: Option<f64>,
    /// Task group as NAME=DS1,DS2. Repeatable.
    #[arg(long = "group")]
    pub groups: Vec<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    pub ablate_backends: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub ablate_strategies: Option<Vec<String>>,
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; defaults to `<out_dir>/synth.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_records: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub info_signal: Option<f64>,
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig, RunError> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    pub fn into_config(self) -> Result<RunConfig, RunError> {
        let mut cfg = base_config(&self.config)?;
        for entry in self.records {
            let (name, path) = match entry.split_once('=') {
                Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                None => {
                    let path = PathBuf::from(&entry);
                    let stem = path
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .ok_or_else(|| RunError::Config(format!("cannot name dataset from `{entry}`")))?
                        .to_string();
                    (stem, path)
                }
            };
            cfg.datasets.insert(name, path);
        }
        for entry in self.groups {
            let (name, members) = entry
                .split_once('=')
                .ok_or_else(|| RunError::Config(format!("--group expects NAME=DS1,DS2, got `{entry}`")))?;
            cfg.groups
                .insert(name.to_string(), members.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect());
        }
        set(&mut cfg.estimators, self.estimators);
        set(&mut cfg.strategy, self.strategy);
        set(&mut cfg.backend, self.backend);
        cfg.endpoint = self.endpoint.or(cfg.endpoint);
        set(&mut cfg.temperature, self.temperature);
        set(&mut cfg.max_rejection, self.max_rejection);
        set(&mut cfg.out_dir, self.out_dir);
        cfg.cache = self.cache.or(cfg.cache);
        set(&mut cfg.workers, self.workers);
        Ok(cfg)
    }
}

/// Runs one command; the returned text is a short summary for stdout.
pub fn run(cli: Cli) -> Result<String, RunError> {
    match cli.command {
        Command::Score(args) => {
            let written = commands::cmd_score(&args.into_config()?.resolve()?)?;
            Ok(list("wrote", &written))
        }
        Command::Evaluate(args) => {
            let path = commands::cmd_evaluate(&args.into_config()?.resolve()?)?;
            Ok(format!("wrote {}", path.display()))
        }
        Command::Ablate(args) => {
            let mut cfg = args.run.into_config()?;
            set(&mut cfg.ablate.backends, args.ablate_backends);
            set(&mut cfg.ablate.strategies, args.ablate_strategies);
            let path = commands::cmd_ablate(&cfg.resolve()?)?;
            Ok(format!("wrote {}", path.display()))
        }
        Command::Synth(args) => {
            let mut cfg = base_config(&args.config)?;
            set(&mut cfg.out_dir, args.out_dir);
            let s = &mut cfg.synth;
            set(&mut s.seed, args.seed);
            set(&mut s.n_records, args.n_records);
            set(&mut s.samples, args.samples);
            set(&mut s.vocab_size, args.vocab_size);
            set(&mut s.overlap, args.overlap);
            set(&mut s.rho, args.rho);
            set(&mut s.info_signal, args.info_signal);
            let output = args.output.unwrap_or_else(|| cfg.out_dir.join("synth.jsonl"));
            commands::cmd_synth(&cfg.synth, &output)?;
            Ok(format!("wrote {}", output.display()))
        }
        Command::Sim(args) => {
            let written = commands::cmd_sim(&args.into_config()?.resolve()?)?;
            Ok(list("wrote", &written))
        }
    }
}

fn list(verb: &str, paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("{verb} {}", p.display())).collect::<Vec<_>>().join("\n")
}
