//! Full evolutionary runs, the learning metric `T`, and seeded ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{ArenaState, BotState};
use crate::config::{Config, ConfigError};
use crate::evolution::{Evolver, GenerationEvent, Parent, Strategy};
use crate::rng::{streams, SimRng};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "no capture for {steps} consecutive steps (timestep {timestep}, generation {generation})"
    )]
    Stalled {
        steps: u64,
        timestep: u64,
        generation: u64,
    },
    #[error("observer failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid ensemble: {0}")]
    Ensemble(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub seed: u64,
    pub max_generations: u64,
    /// Trailing window, in generations, of the `T` average.
    pub window: usize,
    /// Abort after this many consecutive steps without a capture.
    pub stall_steps: u64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            seed: 1,
            max_generations: 10_000,
            window: 50,
            stall_steps: 10_000_000,
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<(), String> {
        if self.window == 0 {
            return Err("experiment.window must be at least 1".into());
        }
        if self.stall_steps == 0 {
            return Err("experiment.stall_steps must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub timestep: u64,
    pub bot_id: u64,
    /// Generation counter when the capture happened.
    pub generation: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureLog {
    pub records: Vec<CaptureRecord>,
}

impl CaptureLog {
    pub fn push(&mut self, r: CaptureRecord) {
        debug_assert!(self.records.last().is_none_or(|p| p.timestep <= r.timestep));
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TPoint {
    pub generation: u64,
    /// Mean time-steps for two consecutive captures.
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub strategy: Strategy,
    pub points: Vec<TPoint>,
}

/// Interval spanned by two consecutive captures, starting at the first
/// capture of each generation, for every generation that has one.
///
/// Under crossover a generation is exactly two captures, so this is
/// `s(2g + 2) - s(2g)` with `s(m)` the time-step of the m-th capture.
pub fn capture_pair_intervals(log: &CaptureLog) -> Vec<(u64, u64)> {
    let recs = &log.records;
    let mut out = Vec::new();
    let mut idx = 0;
    while idx < recs.len() {
        let g = recs[idx].generation;
        if idx + 2 >= recs.len() {
            break;
        }
        out.push((g, recs[idx + 2].timestep - recs[idx].timestep));
        while idx < recs.len() && recs[idx].generation == g {
            idx += 1;
        }
    }
    out
}

/// Trailing `window`-generation mean of the two-capture interval. The first
/// point sits at the first generation with a full window behind it.
pub fn compute_t(log: &CaptureLog, window: usize) -> Vec<TPoint> {
    assert!(window >= 1, "window must be at least 1");
    let deltas = capture_pair_intervals(log);
    if deltas.len() < window {
        return Vec::new();
    }
    let mut sum: u64 = deltas[..window].iter().map(|d| d.1).sum();
    let mut out = Vec::with_capacity(deltas.len() - window + 1);
    out.push(TPoint {
        generation: deltas[window - 1].0,
        t: sum as f64 / window as f64,
    });
    for k in window..deltas.len() {
        sum = sum + deltas[k].1 - deltas[k - window].1;
        out.push(TPoint {
            generation: deltas[k].0,
            t: sum as f64 / window as f64,
        });
    }
    out
}

/// Hooks for streaming per-step and per-generation dumps.
pub trait Observer {
    fn on_step(&mut self, _arena: &ArenaState) -> std::io::Result<()> {
        Ok(())
    }
    fn on_generation(
        &mut self,
        _arena: &ArenaState,
        _event: &GenerationEvent,
    ) -> std::io::Result<()> {
        Ok(())
    }
}

impl Observer for () {}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub trajectory: Trajectory,
    pub captures: CaptureLog,
    pub population: Vec<BotState>,
    pub steps: u64,
}

pub fn run_experiment(config: &Config) -> Result<ExperimentOutput, ExperimentError> {
    run_experiment_with(config, &mut ())
}

/// Steps the arena until the generation counter reaches
/// `experiment.max_generations`, feeding each capture to the evolver.
pub fn run_experiment_with(
    config: &Config,
    observer: &mut dyn Observer,
) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let settings = config.experiment;
    let seed = settings.seed;
    let mut arena = ArenaState::new(
        config.arena.clone(),
        config.snn,
        &config.evolution.init,
        seed,
    );
    let mut evolver = Evolver::new(config.evolution, SimRng::new(seed, streams::EVOLUTION));
    let mut log = CaptureLog::default();
    let mut idle: u64 = 0;

    while arena.generation < settings.max_generations {
        let events = arena.step();
        observer.on_step(&arena)?;
        if events.is_empty() {
            idle += 1;
            if idle >= settings.stall_steps {
                return Err(ExperimentError::Stalled {
                    steps: idle,
                    timestep: arena.timestep,
                    generation: arena.generation,
                });
            }
            continue;
        }
        idle = 0;
        // Genomes are taken before any elimination in this step.
        let parents: Vec<Parent> = events
            .iter()
            .map(|e| Parent {
                bot_id: e.bot_id,
                phenotype: arena
                    .bot(e.bot_id)
                    .expect("capturer is alive during its own step")
                    .phenotype
                    .clone(),
            })
            .collect();
        for (event, parent) in events.iter().zip(parents) {
            if arena.generation >= settings.max_generations {
                break;
            }
            log.push(CaptureRecord {
                timestep: event.timestep,
                bot_id: event.bot_id,
                generation: arena.generation,
            });
            if let Some(ev) = evolver.on_capture(&mut arena, parent) {
                observer.on_generation(&arena, &ev)?;
            }
        }
    }

    let points = compute_t(&log, settings.window);
    Ok(ExperimentOutput {
        trajectory: Trajectory {
            seed,
            strategy: config.evolution.strategy,
            points,
        },
        captures: log,
        steps: arena.timestep,
        population: arena.bots,
    })
}

#[derive(Debug)]
pub struct EnsembleMember {
    pub seed: u64,
    pub outcome: Result<ExperimentOutput, ExperimentError>,
}

/// Seeds `base, base + 1, ..., base + n_seeds - 1`.
pub fn ensemble_seeds(base: u64, n_seeds: usize) -> Vec<u64> {
    (0..n_seeds as u64).map(|k| base.wrapping_add(k)).collect()
}

pub fn run_ensemble(
    config: &Config,
    n_seeds: usize,
    jobs: usize,
) -> Result<Vec<EnsembleMember>, ExperimentError> {
    run_ensemble_with(config, n_seeds, jobs, |_| ())
}

/// Runs one experiment per seed on a pool of `jobs` workers. Members come
/// back sorted by seed; a failed member does not stop the others.
pub fn run_ensemble_with<O, F>(
    config: &Config,
    n_seeds: usize,
    jobs: usize,
    make_observer: F,
) -> Result<Vec<EnsembleMember>, ExperimentError>
where
    O: Observer,
    F: Fn(u64) -> O + Sync,
{
    if n_seeds == 0 {
        return Err(ExperimentError::Ensemble("n_seeds must be at least 1".into()));
    }
    if jobs == 0 {
        return Err(ExperimentError::Ensemble("jobs must be at least 1".into()));
    }
    config.validate()?;
    let seeds = ensemble_seeds(config.experiment.seed, n_seeds);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Ensemble(e.to_string()))?;
    let members = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut c = config.clone();
                c.experiment.seed = seed;
                let mut obs = make_observer(seed);
                EnsembleMember {
                    seed,
                    outcome: run_experiment_with(&c, &mut obs),
                }
            })
            .collect()
    });
    Ok(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_from(times: &[u64], per_generation: usize) -> CaptureLog {
        CaptureLog {
            records: times
                .iter()
                .enumerate()
                .map(|(i, &t)| CaptureRecord {
                    timestep: t,
                    bot_id: 0,
                    generation: (i / per_generation) as u64,
                })
                .collect(),
        }
    }

    #[test]
    fn uniform_stream_gives_constant_t() {
        let times: Vec<u64> = (0..400).map(|i| i * 100).collect();
        for per_gen in [1, 2] {
            let pts = compute_t(&log_from(&times, per_gen), 50);
            assert!(!pts.is_empty());
            assert!(pts.iter().all(|p| p.t == 200.0));
            assert_eq!(pts[0].generation, 49);
        }
    }

    #[test]
    fn window_one_is_raw_interval() {
        let times = [0, 5, 17, 20, 44, 45, 90, 91];
        let pts = compute_t(&log_from(&times, 2), 1);
        let expect = [17.0, 27.0, 46.0];
        assert_eq!(pts.iter().map(|p| p.t).collect::<Vec<_>>(), expect);
        assert_eq!(
            pts.iter().map(|p| p.generation).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn too_few_events_is_empty() {
        let times: Vec<u64> = (0..20).map(|i| i * 10).collect();
        assert!(compute_t(&log_from(&times, 2), 50).is_empty());
        assert!(compute_t(&CaptureLog::default(), 1).is_empty());
    }

    #[test]
    fn zero_generations_is_empty_run() {
        let mut c = Config::default();
        c.experiment.max_generations = 0;
        let out = run_experiment(&c).unwrap();
        assert!(out.trajectory.points.is_empty());
        assert!(out.captures.is_empty());
        assert_eq!(out.steps, 0);
        assert_eq!(out.population.len(), 10);
    }

    #[test]
    fn ensemble_rejects_zero() {
        let c = Config::default();
        assert!(run_ensemble(&c, 0, 1).is_err());
        assert!(run_ensemble(&c, 1, 0).is_err());
    }

    #[test]
    fn stall_guard_fires() {
        let mut c = Config::default();
        c.experiment.stall_steps = 10;
        c.experiment.max_generations = 5;
        c.evolution.init.spontaneous_rate = 0.0;
        c.evolution.init.weight_min = 0.0;
        c.evolution.init.weight_max = 0.0;
        c.arena.food_speed_max = 0.0;
        match run_experiment(&c) {
            Err(ExperimentError::Stalled { steps, .. }) => assert_eq!(steps, 10),
            other => panic!("expected stall, got {other:?}"),
        }
    }
}
