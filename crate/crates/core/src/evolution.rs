//! Genomes, fitness and the two inheritance schemes.
//!
//! Every capture event drives one pass of selection, reproduction and
//! elimination. Under [`Strategy::Mutation`] the capturing bot is cloned with
//! Gaussian noise and the least fit bot is removed. Under
//! [`Strategy::Crossover`] captures are queued in pairs; each pair produces
//! two children by swapping the right half of the weight-matrix columns,
//! both children are mutated, and the two least fit bots are removed. The
//! population size never changes.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{ArenaState, BotState};
use crate::rng::SimRng;
use crate::snn::WeightMatrix;

/// Lower clamp for the visual angle; the field of view never closes fully.
pub const MIN_VISUAL_ANGLE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("crossover needs equal matrix dimensions, got {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid evolution parameters: {0}")]
    InvalidParams(String),
}

/// Evolvable parameters of one bot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    pub weights: WeightMatrix,
    /// Per-neuron, per-step spontaneous firing probability `b`.
    pub spontaneous_rate: f64,
    /// Opening angle `v` of the field of view, radians.
    pub visual_angle: f64,
}

impl Phenotype {
    pub fn random(n: usize, init: &InitParams, rng: &mut SimRng) -> Self {
        Phenotype {
            weights: WeightMatrix::random_uniform(n, init.weight_min, init.weight_max, rng),
            spontaneous_rate: init.spontaneous_rate,
            visual_angle: init.visual_angle,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.weights.diagonal_is_zero()
            && self.weights.as_row_major().iter().all(|w| w.is_finite())
            && (0.0..=1.0).contains(&self.spontaneous_rate)
            && self.visual_angle > 0.0
            && self.visual_angle <= TAU
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Mutation,
    #[serde(alias = "crossover_with_mutation")]
    Crossover,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Mutation => "mutation",
            Strategy::Crossover => "crossover",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mutation" => Ok(Strategy::Mutation),
            "crossover" | "crossover_with_mutation" => Ok(Strategy::Crossover),
            other => Err(format!(
                "unknown strategy '{other}', expected mutation or crossover"
            )),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distribution of the founding population's genomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitParams {
    pub weight_min: f64,
    pub weight_max: f64,
    pub spontaneous_rate: f64,
    pub visual_angle: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams {
            weight_min: -0.5,
            weight_max: 0.5,
            spontaneous_rate: 0.01,
            visual_angle: FRAC_PI_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionParams {
    pub strategy: Strategy,
    /// Mutation standard deviation for weights and spontaneous rate.
    pub mu_mod: f64,
    /// Mutation standard deviation for the visual angle.
    pub mu_visual: f64,
    /// Refuse to queue the same bot twice as a crossover parent.
    pub distinct_parents: bool,
    pub init: InitParams,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            strategy: Strategy::Mutation,
            mu_mod: 0.05,
            mu_visual: 0.008,
            distinct_parents: false,
            init: InitParams::default(),
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::InvalidParams(m));
        if !(self.mu_mod >= 0.0 && self.mu_mod.is_finite()) {
            return bad(format!("mu_mod must be >= 0, got {}", self.mu_mod));
        }
        if !(self.mu_visual >= 0.0 && self.mu_visual.is_finite()) {
            return bad(format!("mu_visual must be >= 0, got {}", self.mu_visual));
        }
        let i = &self.init;
        if !(i.weight_min.is_finite() && i.weight_max.is_finite() && i.weight_min <= i.weight_max)
        {
            return bad(format!(
                "init weight range [{}, {}] is not a finite interval",
                i.weight_min, i.weight_max
            ));
        }
        if !(0.0..=1.0).contains(&i.spontaneous_rate) {
            return bad(format!(
                "init spontaneous_rate must lie in [0, 1], got {}",
                i.spontaneous_rate
            ));
        }
        if !(i.visual_angle > 0.0 && i.visual_angle <= TAU) {
            return bad(format!(
                "init visual_angle must lie in (0, 2pi], got {}",
                i.visual_angle
            ));
        }
        Ok(())
    }
}

/// Lifetime captures per time-step alive, `N / tau`.
pub fn fitness(bot: &BotState) -> f64 {
    if bot.age == 0 {
        0.0
    } else {
        bot.captures as f64 / bot.age as f64
    }
}

/// Exact fitness comparison by cross-multiplication, so ties are detected
/// without rounding.
pub fn compare_fitness(a: &BotState, b: &BotState) -> Ordering {
    let lhs = a.captures as u128 * b.age.max(1) as u128;
    let rhs = b.captures as u128 * a.age.max(1) as u128;
    lhs.cmp(&rhs)
}

/// Returns a mutated copy; the input is untouched.
///
/// Draw order: off-diagonal weights row-major, then `b`, then `v`.
pub fn mutate(parent: &Phenotype, params: &EvolutionParams, rng: &mut SimRng) -> Phenotype {
    let mut child = parent.clone();
    child
        .weights
        .for_each_off_diagonal(|_, _, w| *w += rng.normal(params.mu_mod));
    child.spontaneous_rate = (child.spontaneous_rate + rng.normal(params.mu_mod)).clamp(0.0, 1.0);
    child.visual_angle =
        (child.visual_angle + rng.normal(params.mu_visual)).clamp(MIN_VISUAL_ANGLE, TAU);
    child
}

/// Half-column swap. The first child keeps the left columns of `first` and
/// takes the right columns of `second`; the second child is the complement.
/// Spontaneous rate and visual angle pass through unchanged.
pub fn crossover(
    first: &Phenotype,
    second: &Phenotype,
) -> Result<(Phenotype, Phenotype), EvolutionError> {
    let n = first.weights.dim();
    if n != second.weights.dim() {
        return Err(EvolutionError::DimensionMismatch(n, second.weights.dim()));
    }
    let half = n / 2;
    let mut a = first.clone();
    let mut b = second.clone();
    for i in 0..n {
        for j in half..n {
            if i != j {
                let wa = first.weights.get(i, j);
                let wb = second.weights.get(i, j);
                a.weights.set(i, j, wb);
                b.weights.set(i, j, wa);
            }
        }
    }
    Ok((a, b))
}

/// Picks the bot to eliminate: lowest fitness, then oldest, then lowest id.
fn least_fit(bots: &[BotState], protected: &[u64]) -> Option<usize> {
    bots.iter()
        .enumerate()
        .filter(|(_, b)| !protected.contains(&b.id))
        .min_by(|(_, a), (_, b)| {
            compare_fitness(a, b)
                .then_with(|| b.age.cmp(&a.age))
                .then_with(|| a.id.cmp(&b.id))
        })
        .map(|(i, _)| i)
}

/// Removes `count` bots by [`least_fit`] order, never touching `protected`.
/// Returns the removed ids.
pub fn eliminate(bots: &mut Vec<BotState>, count: usize, protected: &[u64]) -> Vec<u64> {
    let mut removed = Vec::with_capacity(count);
    for _ in 0..count {
        match least_fit(bots, protected) {
            Some(idx) => removed.push(bots.remove(idx).id),
            None => break,
        }
    }
    removed
}

/// A capture as seen by the evolutionary machinery: who captured, and their
/// genome at the moment of capture.
#[derive(Clone, Debug)]
pub struct Parent {
    pub bot_id: u64,
    pub phenotype: Phenotype,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationEvent {
    /// Generation counter after this event.
    pub generation: u64,
    pub parents: Vec<u64>,
    pub children: Vec<u64>,
    pub eliminated: Vec<u64>,
}

/// Selection, reproduction and elimination state for one arena.
#[derive(Clone, Debug)]
pub struct Evolver {
    params: EvolutionParams,
    rng: SimRng,
    queue: Vec<Parent>,
}

impl Evolver {
    pub fn new(params: EvolutionParams, rng: SimRng) -> Self {
        Evolver {
            params,
            rng,
            queue: Vec::with_capacity(2),
        }
    }

    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    /// Parents waiting for a crossover partner.
    pub fn pending(&self) -> &[Parent] {
        &self.queue
    }

    /// Handles one capture. Returns the generation event if this capture
    /// completed one.
    pub fn on_capture(&mut self, arena: &mut ArenaState, parent: Parent) -> Option<GenerationEvent> {
        match self.params.strategy {
            Strategy::Mutation => {
                let child = mutate(&parent.phenotype, &self.params, &mut self.rng);
                Some(self.reproduce(arena, vec![parent.bot_id], vec![child]))
            }
            Strategy::Crossover => {
                if self.params.distinct_parents
                    && self.queue.iter().any(|p| p.bot_id == parent.bot_id)
                {
                    return None;
                }
                self.queue.push(parent);
                if self.queue.len() < 2 {
                    return None;
                }
                let second = self.queue.pop().expect("queue holds two parents");
                let first = self.queue.pop().expect("queue holds two parents");
                let (a, b) = crossover(&first.phenotype, &second.phenotype)
                    .expect("population shares one network size");
                let a = mutate(&a, &self.params, &mut self.rng);
                let b = mutate(&b, &self.params, &mut self.rng);
                Some(self.reproduce(arena, vec![first.bot_id, second.bot_id], vec![a, b]))
            }
        }
    }

    fn reproduce(
        &mut self,
        arena: &mut ArenaState,
        parents: Vec<u64>,
        genomes: Vec<Phenotype>,
    ) -> GenerationEvent {
        let generation = arena.generation + 1;
        let count = genomes.len();
        let children: Vec<u64> = genomes
            .into_iter()
            .map(|g| arena.spawn_bot(g, generation))
            .collect();
        let eliminated = eliminate(&mut arena.bots, count, &children);
        arena.generation = generation;
        GenerationEvent {
            generation,
            parents,
            children,
            eliminated,
        }
    }
}
