//! On-disk formats.
//!
//! | file | content |
//! |------|---------|
//! | `trajectory.csv` | `generation,T` |
//! | `trajectory.meta.json` | seed, strategy, RNG algorithm, crate version, full config |
//! | `captures.csv` | `timestep,bot_id,generation` |
//! | `trajectory_dump.jsonl` | one line per time-step (see [`step_record`]) |
//! | `phenotypes.jsonl` | one line per generation (see [`phenotype_record`]) |
//! | `fit.json`, `fits.csv` | logistic fits |
//! | `*_histogram.csv` | `lower,upper,count` |
//!
//! Floats are written in shortest round-trip form, so files are
//! byte-identical across runs with the same seed and config.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{Histogram, LogisticFit};
use crate::arena::ArenaState;
use crate::config::Config;
use crate::evolution::{GenerationEvent, Strategy};
use crate::experiment::{CaptureLog, ExperimentOutput, Observer, TPoint};
use crate::rng::RNG_ALGORITHM;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAJECTORY_META: &str = "trajectory.meta.json";
pub const CAPTURES_CSV: &str = "captures.csv";
pub const TRAJECTORY_DUMP: &str = "trajectory_dump.jsonl";
pub const PHENOTYPE_DUMP: &str = "phenotypes.jsonl";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn trajectory_csv(points: &[TPoint]) -> String {
    let mut out = String::from("generation,T\n");
    for p in points {
        writeln!(out, "{},{}", p.generation, p.t).unwrap();
    }
    out
}

/// Parses `generation,T` text; errors carry the 1-based line number.
pub fn parse_trajectory_csv(text: &str, path: &Path) -> Result<Vec<TPoint>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad = |line: u64, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "generation" || &headers[1] != "T" {
        return Err(bad(1, "expected header 'generation,T'".into()));
    }
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let generation = rec[0]
            .parse::<u64>()
            .map_err(|e| bad(line, format!("generation '{}': {e}", &rec[0])))?;
        let t = rec[1]
            .parse::<f64>()
            .map_err(|e| bad(line, format!("T '{}': {e}", &rec[1])))?;
        if !t.is_finite() {
            return Err(bad(line, format!("T '{}' is not finite", &rec[1])));
        }
        if let Some(prev) = points.last().map(|p: &TPoint| p.generation) {
            if generation <= prev {
                return Err(bad(line, "generations must increase".into()));
            }
        }
        points.push(TPoint { generation, t });
    }
    Ok(points)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TPoint>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_trajectory_csv(&text, path)
}

pub fn captures_csv(log: &CaptureLog) -> String {
    let mut out = String::from("timestep,bot_id,generation\n");
    for r in &log.records {
        writeln!(out, "{},{},{}", r.timestep, r.bot_id, r.generation).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub strategy: Strategy,
    pub rng_algorithm: String,
    pub version: String,
    pub captures: usize,
    pub steps: u64,
    pub config: Config,
}

impl TrajectoryMeta {
    pub fn new(config: &Config, output: &ExperimentOutput) -> Self {
        TrajectoryMeta {
            seed: config.experiment.seed,
            strategy: config.evolution.strategy,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            version: VERSION.to_string(),
            captures: output.captures.len(),
            steps: output.steps,
            config: config.clone(),
        }
    }
}

pub fn read_meta(path: &Path) -> Result<TrajectoryMeta, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes trajectory, sidecar and capture log into `dir`; returns the file
/// names written.
pub fn write_run(dir: &Path, config: &Config, output: &ExperimentOutput) -> Result<Vec<String>, IoError> {
    create_dir(dir)?;
    write_file(&dir.join(TRAJECTORY_CSV), &trajectory_csv(&output.trajectory.points))?;
    write_file(
        &dir.join(TRAJECTORY_META),
        &to_json_pretty(&TrajectoryMeta::new(config, output)),
    )?;
    write_file(&dir.join(CAPTURES_CSV), &captures_csv(&output.captures))?;
    Ok(vec![
        TRAJECTORY_CSV.into(),
        TRAJECTORY_META.into(),
        CAPTURES_CSV.into(),
    ])
}

/// `{"t":..,"bots":[[id,x,y,theta,spikes],..],"food":[[x,y,theta],..]}`
/// where `spikes` counts the bot's neurons that fired this step.
pub fn step_record(arena: &ArenaState) -> String {
    let bots: Vec<_> = arena
        .bots
        .iter()
        .map(|b| json!([b.id, b.pose.x, b.pose.y, b.pose.theta, b.neurons.spike_count()]))
        .collect();
    let food: Vec<_> = arena
        .food
        .iter()
        .map(|f| json!([f.pose.x, f.pose.y, f.pose.theta]))
        .collect();
    json!({"t": arena.timestep, "bots": bots, "food": food}).to_string()
}

/// `{"generation":..,"timestep":..,"parents":[..],"children":[..],
/// "eliminated":[..],"bots":[{"id","age","captures","b","v","w"}]}`
/// with `w` row-major (row = receiving neuron).
pub fn phenotype_record(arena: &ArenaState, event: &GenerationEvent) -> String {
    let bots: Vec<_> = arena
        .bots
        .iter()
        .map(|b| {
            json!({
                "id": b.id,
                "age": b.age,
                "captures": b.captures,
                "b": b.phenotype.spontaneous_rate,
                "v": b.phenotype.visual_angle,
                "w": b.phenotype.weights.as_row_major(),
            })
        })
        .collect();
    json!({
        "generation": event.generation,
        "timestep": arena.timestep,
        "parents": event.parents,
        "children": event.children,
        "eliminated": event.eliminated,
        "bots": bots,
    })
    .to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    Steps,
    Phenotypes,
}

impl DumpKind {
    pub fn file_name(self) -> &'static str {
        match self {
            DumpKind::Steps => TRAJECTORY_DUMP,
            DumpKind::Phenotypes => PHENOTYPE_DUMP,
        }
    }
}

/// Destination for dump lines.
pub trait LineSink {
    fn emit(&mut self, kind: DumpKind, line: String) -> std::io::Result<()>;
}

/// Buffered files in one run directory.
pub struct FileSink {
    steps: Option<BufWriter<fs::File>>,
    phenotypes: Option<BufWriter<fs::File>>,
}

impl FileSink {
    pub fn create(dir: &Path, steps: bool, phenotypes: bool) -> Result<Self, IoError> {
        let open = |kind: DumpKind| -> Result<BufWriter<fs::File>, IoError> {
            let p = dir.join(kind.file_name());
            fs::File::create(&p).map(BufWriter::new).map_err(io_err(&p))
        };
        Ok(FileSink {
            steps: steps.then(|| open(DumpKind::Steps)).transpose()?,
            phenotypes: phenotypes.then(|| open(DumpKind::Phenotypes)).transpose()?,
        })
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        for w in [&mut self.steps, &mut self.phenotypes].into_iter().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}

impl LineSink for FileSink {
    fn emit(&mut self, kind: DumpKind, line: String) -> std::io::Result<()> {
        let w = match kind {
            DumpKind::Steps => self.steps.as_mut(),
            DumpKind::Phenotypes => self.phenotypes.as_mut(),
        };
        if let Some(w) = w {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Forwards lines, tagged with the run's seed, to a single writer thread.
pub struct ChannelSink {
    pub seed: u64,
    pub tx: std::sync::mpsc::SyncSender<(u64, DumpKind, String)>,
}

impl LineSink for ChannelSink {
    fn emit(&mut self, kind: DumpKind, line: String) -> std::io::Result<()> {
        self.tx
            .send((self.seed, kind, line))
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "dump writer stopped"))
    }
}

/// Experiment observer that renders the enabled dumps into a sink.
pub struct DumpObserver<S> {
    pub sink: S,
    pub steps: bool,
    pub phenotypes: bool,
}

impl<S: LineSink> Observer for DumpObserver<S> {
    fn on_step(&mut self, arena: &ArenaState) -> std::io::Result<()> {
        if self.steps {
            self.sink.emit(DumpKind::Steps, step_record(arena))?;
        }
        Ok(())
    }

    fn on_generation(&mut self, arena: &ArenaState, event: &GenerationEvent) -> std::io::Result<()> {
        if self.phenotypes {
            self.sink.emit(DumpKind::Phenotypes, phenotype_record(arena, event))?;
        }
        Ok(())
    }
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("lower,upper,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{}", h.edges[k], h.edges[k + 1], c).unwrap();
    }
    out
}

/// One row per labelled fit.
pub fn fits_csv(fits: &[(String, LogisticFit)]) -> String {
    let mut out = String::from(
        "run,L,k,g0,c,L_err,k_err,g0_err,c_err,chi2,n_points,converged,accepted\n",
    );
    for (label, f) in fits {
        let p = &f.params;
        let u = &f.uncertainties;
        writeln!(
            out,
            "{label},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.amplitude,
            p.rate,
            p.inflection,
            p.floor,
            u.amplitude,
            u.rate,
            u.inflection,
            u.floor,
            f.chi2,
            f.n_points,
            f.converged,
            f.is_accepted()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let pts = vec![
            TPoint { generation: 49, t: 2875.2 },
            TPoint { generation: 50, t: 1.0 / 3.0 },
        ];
        let text = trajectory_csv(&pts);
        assert_eq!(text.lines().next(), Some("generation,T"));
        assert_eq!(parse_trajectory_csv(&text, Path::new("x")).unwrap(), pts);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "generation,T\n1,2.0\n2,abc\n";
        match parse_trajectory_csv(text, Path::new("t.csv")) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "generation,T\n1,2.0\n2,3.0,4\n";
        match parse_trajectory_csv(text, Path::new("t.csv")) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_trajectory_csv("gen,T\n", Path::new("t.csv")).is_err());
    }

    #[test]
    fn histogram_rows() {
        let h = Histogram {
            edges: vec![0.0, 10.0, 20.0],
            counts: vec![3, 4],
        };
        assert_eq!(histogram_csv(&h), "lower,upper,count\n0,10,3\n10,20,4\n");
    }
}
