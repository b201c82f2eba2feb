//! Batch entry points behind the `evospike` binary.
//!
//! ```text
//! evospike run      [--config F] [--set k=v].. [--seed N] [--generations N] [--strategy S]
//!                   --out DIR [--dump-trajectory] [--dump-phenotypes]
//! evospike ensemble [same config flags] --seeds N [--jobs N] --out DIR [dumps]
//! evospike analyze  --mode single|ensemble|compare INPUT [INPUT] [--out DIR]
//! ```
//!
//! Config keys can also come from `EVOSPIKE_<SECTION>__<KEY>` environment
//! variables. Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    compare_strategies, fit_trajectory, summarize_strategy, Histogram, HistogramSpec, LogisticFit,
    StrategySummary,
};
use crate::config::{self, Config, ConfigError};
use crate::evolution::Strategy;
use crate::experiment::{run_ensemble_with, run_experiment_with, ExperimentError};
use crate::io::{self, ChannelSink, DumpObserver, FileSink, IoError};
use crate::rng::RNG_ALGORITHM;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Ensemble(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evospike", version, about = "Evolve spiking-network foraging bots and fit their learning curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One evolutionary run.
    Run(RunArgs),
    /// Seeds `seed .. seed + seeds - 1`, one subdirectory each.
    Ensemble(EnsembleArgs),
    /// Fit trajectories and summarise ensembles.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set arena.n_food=8`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub generations: Option<u64>,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    /// Per-step poses, food and spike counts as JSON lines.
    #[arg(long)]
    pub dump_trajectory: bool,
    /// Every phenotype after each generation as JSON lines.
    #[arg(long)]
    pub dump_phenotypes: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub dumps: DumpArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub dumps: DumpArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    Single,
    Ensemble,
    Compare,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
    /// A trajectory file or run directory (single), an ensemble directory
    /// (ensemble), or two ensemble directories (compare).
    #[arg(required = true, num_args = 1..=2)]
    pub inputs: Vec<PathBuf>,
    /// Defaults to the input directory for single and ensemble.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

/// Resolves the config: file, then environment, then `--set`, then flags.
pub fn resolve_config(
    args: &ConfigArgs,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<Config, CliError> {
    let mut c = config::load(args.config.as_deref(), env, &args.set)?;
    if let Some(s) = args.seed {
        c.experiment.seed = s;
    }
    if let Some(g) = args.generations {
        c.experiment.max_generations = g;
    }
    if let Some(s) = args.strategy {
        c.evolution.strategy = s;
    }
    c.validate()?;
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

/// Provenance of one `run` or `ensemble` invocation. `config` together with
/// `seeds` reproduces every output bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub rng_algorithm: String,
    pub config: Config,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub started: String,
    pub finished: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub failures: Vec<Failure>,
}

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn finish_manifest(out: &Path, mut m: RunManifest) -> Result<RunManifest, CliError> {
    io::write_file(&out.join(CONFIG_SNAPSHOT), &m.config.to_toml_string())?;
    m.outputs.push(CONFIG_SNAPSHOT.into());
    m.outputs.push(MANIFEST.into());
    m.finished = now();
    io::write_file(&out.join(MANIFEST), &io::to_json_pretty(&m))?;
    Ok(m)
}

pub fn cmd_run(config: &Config, out: &Path, dumps: &DumpArgs) -> Result<RunManifest, CliError> {
    let started = now();
    io::create_dir(out)?;
    let mut outputs = Vec::new();
    let mut observer = DumpObserver {
        sink: FileSink::create(out, dumps.dump_trajectory, dumps.dump_phenotypes)?,
        steps: dumps.dump_trajectory,
        phenotypes: dumps.dump_phenotypes,
    };
    let result = run_experiment_with(config, &mut observer);
    observer
        .sink
        .flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let output = result?;
    outputs.extend(io::write_run(out, config, &output)?);
    if dumps.dump_trajectory {
        outputs.push(io::TRAJECTORY_DUMP.into());
    }
    if dumps.dump_phenotypes {
        outputs.push(io::PHENOTYPE_DUMP.into());
    }
    finish_manifest(
        out,
        RunManifest {
            tool: "evospike".into(),
            version: io::VERSION.into(),
            command: "run".into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            config: config.clone(),
            seeds: vec![config.experiment.seed],
            jobs: 1,
            started,
            finished: String::new(),
            outputs,
            failures: Vec::new(),
        },
    )
}

pub fn seed_dir_name(seed: u64) -> String {
    format!("seed_{seed}")
}

/// Runs the ensemble on `jobs` workers. Dump lines stream to one writer
/// thread; result files are written afterwards from this thread, in seed
/// order. Fails only when every member fails.
pub fn cmd_ensemble(
    config: &Config,
    n_seeds: usize,
    jobs: usize,
    out: &Path,
    dumps: &DumpArgs,
) -> Result<RunManifest, CliError> {
    if n_seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let started = now();
    io::create_dir(out)?;
    let seeds = crate::experiment::ensemble_seeds(config.experiment.seed, n_seeds);
    for &s in &seeds {
        io::create_dir(&out.join(seed_dir_name(s)))?;
    }
    let want_dumps = dumps.dump_trajectory || dumps.dump_phenotypes;

    let (members, dump_error) = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::sync_channel::<(u64, io::DumpKind, String)>(4096);
        let writer = want_dumps.then(|| {
            scope.spawn(move || -> Result<(), CliError> {
                let mut sinks: BTreeMap<u64, FileSink> = BTreeMap::new();
                for (seed, kind, line) in rx {
                    let sink = match sinks.entry(seed) {
                        std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                        std::collections::btree_map::Entry::Vacant(e) => e.insert(FileSink::create(
                            &out.join(seed_dir_name(seed)),
                            dumps.dump_trajectory,
                            dumps.dump_phenotypes,
                        )?),
                    };
                    io::LineSink::emit(sink, kind, line)
                        .map_err(|e| CliError::Runtime(e.to_string()))?;
                }
                for s in sinks.values_mut() {
                    s.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
                }
                Ok(())
            })
        });
        let members = run_ensemble_with(config, n_seeds, jobs, |seed| DumpObserver {
            sink: ChannelSink {
                seed,
                tx: tx.clone(),
            },
            steps: dumps.dump_trajectory,
            phenotypes: dumps.dump_phenotypes,
        });
        drop(tx);
        let dump_error = writer.and_then(|w| w.join().expect("dump writer panicked").err());
        (members, dump_error)
    });
    let members = members?;
    if let Some(e) = dump_error {
        return Err(e);
    }

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for m in &members {
        let name = seed_dir_name(m.seed);
        match &m.outcome {
            Ok(output) => {
                let mut c = config.clone();
                c.experiment.seed = m.seed;
                for f in io::write_run(&out.join(&name), &c, output)? {
                    outputs.push(format!("{name}/{f}"));
                }
                for (on, kind) in [
                    (dumps.dump_trajectory, io::DumpKind::Steps),
                    (dumps.dump_phenotypes, io::DumpKind::Phenotypes),
                ] {
                    if on {
                        outputs.push(format!("{name}/{}", kind.file_name()));
                    }
                }
            }
            Err(e) => failures.push(Failure {
                seed: m.seed,
                error: e.to_string(),
            }),
        }
    }
    let all_failed = failures.len() == members.len();
    let manifest = finish_manifest(
        out,
        RunManifest {
            tool: "evospike".into(),
            version: io::VERSION.into(),
            command: "ensemble".into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            config: config.clone(),
            seeds,
            jobs,
            started,
            finished: String::new(),
            outputs,
            failures,
        },
    )?;
    if all_failed {
        return Err(CliError::Runtime(format!(
            "all {} ensemble members failed; see {}",
            members.len(),
            out.join(MANIFEST).display()
        )));
    }
    Ok(manifest)
}

fn require_dir(p: &Path) -> Result<(), CliError> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{}: no such directory", p.display())))
    }
}

/// Run directories under `dir` that hold a trajectory, ordered by seed.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    require_dir(dir)?;
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut runs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(io::TRAJECTORY_CSV).is_file())
        .collect();
    let key = |p: &PathBuf| {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let seed = name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok());
        (seed.is_none(), seed, name)
    };
    runs.sort_by_key(key);
    if runs.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no run directories containing {}",
            dir.display(),
            io::TRAJECTORY_CSV
        )));
    }
    Ok(runs)
}

fn run_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Fits every run in an ensemble directory, in seed order.
pub fn fit_ensemble_dir(dir: &Path, config: &Config) -> Result<Vec<(String, LogisticFit)>, CliError> {
    let runs = find_runs(dir)?;
    let points = runs
        .iter()
        .map(|r| io::read_trajectory_csv(&r.join(io::TRAJECTORY_CSV)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(runs
        .par_iter()
        .zip(points.par_iter())
        .map(|(r, p)| (run_label(r), fit_trajectory(p, &config.analysis)))
        .collect())
}

fn ensemble_label(dir: &Path, runs: &[PathBuf]) -> String {
    runs.first()
        .and_then(|r| io::read_meta(&r.join(io::TRAJECTORY_META)).ok())
        .map(|m| m.strategy.to_string())
        .unwrap_or_else(|| run_label(dir))
}

fn write_histograms(out: &Path, prefix: &str, s: &StrategySummary, fits: &[(String, LogisticFit)], config: &Config) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    let g0: Vec<f64> = fits
        .iter()
        .filter(|(_, f)| f.is_accepted())
        .map(|(_, f)| f.params.inflection)
        .collect();
    if let Ok(h) = Histogram::build(&g0, &HistogramSpec::new(config.analysis.inflection_bin_width)) {
        let name = format!("{prefix}inflection_histogram.csv");
        io::write_file(&out.join(&name), &io::histogram_csv(&h))?;
        written.push(name);
    }
    if let Some(v) = &s.convergence {
        let name = format!("{prefix}convergence_histogram.csv");
        io::write_file(&out.join(&name), &io::histogram_csv(&v.histogram))?;
        written.push(name);
    }
    Ok(written)
}

/// Returns the list of files written.
pub fn cmd_analyze(args: &AnalyzeArgs, config: &Config) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    match args.mode {
        AnalyzeMode::Single => {
            let [input] = args.inputs.as_slice() else {
                return Err(CliError::Usage("single mode takes one input".into()));
            };
            let file = if input.is_dir() {
                input.join(io::TRAJECTORY_CSV)
            } else {
                input.clone()
            };
            if !file.exists() {
                return Err(CliError::Runtime(format!("{}: not found", file.display())));
            }
            let points = io::read_trajectory_csv(&file)?;
            let fit = fit_trajectory(&points, &config.analysis);
            let out = match &args.out {
                Some(o) => o.clone(),
                None => file.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            io::create_dir(&out)?;
            let path = out.join("fit.json");
            io::write_file(&path, &io::to_json_pretty(&fit))?;
            let p = fit.params;
            println!(
                "L = {} k = {} g0 = {} c = {} converged = {} accepted = {}",
                p.amplitude,
                p.rate,
                p.inflection,
                p.floor,
                fit.converged,
                fit.is_accepted()
            );
            if let Some(d) = &fit.diagnostic {
                eprintln!("note: {d}");
            }
            written.push(path);
        }
        AnalyzeMode::Ensemble => {
            let [input] = args.inputs.as_slice() else {
                return Err(CliError::Usage("ensemble mode takes one input directory".into()));
            };
            let runs = find_runs(input)?;
            let fits = fit_ensemble_dir(input, config)?;
            let label = ensemble_label(input, &runs);
            let only: Vec<LogisticFit> = fits.iter().map(|(_, f)| f.clone()).collect();
            let summary = summarize_strategy(&label, &only, &config.analysis);
            let out = args.out.clone().unwrap_or_else(|| input.clone());
            io::create_dir(&out)?;
            io::write_file(&out.join("fits.csv"), &io::fits_csv(&fits))?;
            io::write_file(&out.join("summary.json"), &io::to_json_pretty(&summary))?;
            written.push(out.join("fits.csv"));
            written.push(out.join("summary.json"));
            for n in write_histograms(&out, "", &summary, &fits, config)? {
                written.push(out.join(n));
            }
            println!(
                "{label}: {}/{} fits accepted; g0 mean {:.1} ± {:.1} (SE); c mean {:.1}; convergence {}",
                summary.n_accepted,
                summary.n_trajectories,
                summary.inflection_stats.mean,
                summary.inflection_stats.std_error,
                summary.convergence_stats.mean,
                if summary.bimodal() { "bimodal" } else { "unimodal" }
            );
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
        }
        AnalyzeMode::Compare => {
            let [a, b] = args.inputs.as_slice() else {
                return Err(CliError::Usage("compare mode takes two ensemble directories".into()));
            };
            let out = args
                .out
                .clone()
                .ok_or_else(|| CliError::Usage("compare mode needs --out".into()))?;
            let fa = fit_ensemble_dir(a, config)?;
            let fb = fit_ensemble_dir(b, config)?;
            let mut la = ensemble_label(a, &find_runs(a)?);
            let mut lb = ensemble_label(b, &find_runs(b)?);
            if la == lb {
                la = format!("{la} ({})", run_label(a));
                lb = format!("{lb} ({})", run_label(b));
            }
            let va: Vec<LogisticFit> = fa.iter().map(|(_, f)| f.clone()).collect();
            let vb: Vec<LogisticFit> = fb.iter().map(|(_, f)| f.clone()).collect();
            let table = compare_strategies((&la, &va), (&lb, &vb), &config.analysis);
            io::create_dir(&out)?;
            for (name, body) in [
                ("comparison.csv", table.to_csv()),
                ("comparison.txt", table.to_text()),
                ("comparison.json", io::to_json_pretty(&table)),
                ("fits_a.csv", io::fits_csv(&fa)),
                ("fits_b.csv", io::fits_csv(&fb)),
            ] {
                io::write_file(&out.join(name), &body)?;
                written.push(out.join(name));
            }
            for n in write_histograms(&out, "a_", &table.baseline, &fa, config)? {
                written.push(out.join(n));
            }
            for n in write_histograms(&out, "b_", &table.candidate, &fb, config)? {
                written.push(out.join(n));
            }
            print!("{}", table.to_text());
        }
    }
    Ok(written)
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let config = resolve_config(&a.config, std::env::vars())?;
            let m = cmd_run(&config, &a.out, &a.dumps)?;
            println!(
                "seed {}: wrote {} files to {}",
                config.experiment.seed,
                m.outputs.len(),
                a.out.display()
            );
        }
        Command::Ensemble(a) => {
            let config = resolve_config(&a.config, std::env::vars())?;
            let jobs = a.jobs.map_or_else(
                || std::thread::available_parallelism().map_or(1, |n| n.get()),
                |j| j as usize,
            );
            let m = cmd_ensemble(&config, a.seeds as usize, jobs, &a.out, &a.dumps)?;
            println!(
                "{} seeds ({} failed) written to {}",
                m.seeds.len(),
                m.failures.len(),
                a.out.display()
            );
            for f in &m.failures {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
        }
        Command::Analyze(a) => {
            let cfg_args = ConfigArgs {
                config: a.config.clone(),
                set: a.set.clone(),
                seed: None,
                generations: None,
                strategy: None,
            };
            let config = resolve_config(&cfg_args, std::env::vars())?;
            cmd_analyze(&a, &config)?;
        }
    }
    Ok(())
}
