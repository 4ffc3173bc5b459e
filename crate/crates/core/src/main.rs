use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use advexp::collectors::CollectorKind;
use advexp::env::EnvId;
use advexp::experiment::{read_logs, run_trial, sweep, write_logs_loss_pdf, write_trial, Preset, TrialConfig};

/// Adversarial data collection for inverse dynamics models.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial.
    Run(RunArgs),
    /// Run collectors × seeds in parallel and aggregate the curves.
    Sweep(SweepArgs),
    /// Loss densities from the logs below a directory.
    Kde {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON trial config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvId>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    delta: Option<f64>,
    /// Reward the raw inverse loss instead of the shaped one.
    #[arg(long)]
    no_stabilize: bool,
    #[arg(long)]
    warmup_samples: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Output directory; defaults to a path below `$ADVEXP_OUT_ROOT`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "ADVEXP_OUT_ROOT", default_value = "runs")]
    out_root: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    collector: Option<CollectorKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated collector names.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "adversarial,random,curiosity,noise,demo"
    )]
    collectors: Vec<CollectorKind>,
    /// Inclusive range `a..b` or a comma-separated list.
    #[arg(long, default_value = "0..4", value_parser = parse_seeds)]
    seeds: SeedList,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let bad = |_| format!("bad seed list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let r: RangeInclusive<u64> = a.trim().parse().map_err(bad)?..=b.trim().parse().map_err(bad)?;
        if r.is_empty() {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok(SeedList(r.collect()));
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(bad))
        .collect::<Result<_, _>>()
        .map(SeedList)
}

impl Common {
    fn base(&self) -> Result<Option<TrialConfig>> {
        match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(Some(
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
                ))
            }
            None => Ok(None),
        }
    }

    fn build(&self, base: Option<&TrialConfig>, collector: Option<CollectorKind>, seed: Option<u64>) -> TrialConfig {
        let mut c = match (base, self.preset) {
            (Some(b), None) => b.clone(),
            (b, preset) => {
                let env = self.env.or(b.map(|b| b.env)).unwrap_or(EnvId::PushBlock);
                let kind = collector
                    .or(b.map(|b| b.collector.kind))
                    .unwrap_or(CollectorKind::Adversarial);
                TrialConfig::preset(preset.unwrap_or(Preset::Full), env, kind, b.map_or(0, |b| b.seed))
            }
        };
        if let Some(env) = self.env {
            c.env = env;
        }
        if let Some(kind) = collector {
            c.collector.kind = kind;
        }
        if let Some(seed) = seed {
            c.seed = seed;
        }
        if let Some(d) = self.delta {
            c.collector.delta = d;
        }
        if self.no_stabilize {
            c.collector.stabilize = false;
        }
        if self.warmup_samples.is_some() {
            c.collector.warmup_samples = self.warmup_samples;
        }
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        c
    }
}

fn report(dir: &Path, log: &advexp::experiment::TrialLog) {
    let success = log.final_success().map_or("n/a".to_string(), |s| format!("{s:.3}"));
    println!(
        "{} seed {}: final success {success}, {} env samples, {:.1}s -> {}",
        log.label,
        log.config.seed,
        log.env_samples,
        log.wall_clock_secs,
        dir.display()
    );
    if let Some(e) = &log.error {
        eprintln!("{} seed {} failed: {e}", log.label, log.config.seed);
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run(args) => {
            let base = args.common.base()?;
            let config = args.common.build(base.as_ref(), args.collector, args.seed);
            let dir = args.common.out.clone().unwrap_or_else(|| {
                args.common
                    .out_root
                    .join(config.env.as_str())
                    .join(config.label())
                    .join(format!("seed_{}", config.seed))
            });
            let log = run_trial(&config)?;
            write_trial(&dir, &log)?;
            report(&dir, &log);
            Ok(log.completed())
        }
        Command::Sweep(args) => {
            let base = args.common.base()?;
            if args.collectors.is_empty() {
                bail!("no collectors given");
            }
            let configs: Vec<TrialConfig> = args
                .collectors
                .iter()
                .flat_map(|&k| args.seeds.0.iter().map(move |&s| (k, s)))
                .map(|(k, s)| args.common.build(base.as_ref(), Some(k), Some(s)))
                .collect();
            let dir = args
                .common
                .out
                .clone()
                .unwrap_or_else(|| args.common.out_root.join(configs[0].env.as_str()));
            let logs = sweep(&configs, &dir)?;
            for log in &logs {
                report(&dir.join(&log.label).join(format!("seed_{}", log.config.seed)), log);
            }
            Ok(logs.iter().all(|l| l.completed()))
        }
        Command::Kde { input, out } => {
            let logs = read_logs(&input)?;
            if logs.is_empty() {
                bail!("no log.json below {}", input.display());
            }
            write_logs_loss_pdf(&out, &logs.iter().collect::<Vec<_>>())?;
            println!("{} logs -> {}", logs.len(), out.display());
            Ok(true)
        }
    }
}
