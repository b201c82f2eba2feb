//! The 2D foraging arena.
//!
//! Bots and food live in a `width x height` box with reflective walls. Each
//! bot sees food through a fan-shaped field of view split into three radial
//! bands and three angular thirds; each band and each third drives one
//! sensory neuron. Four motor neurons step the bot forward or back by one
//! unit and turn it by a fixed increment.
//!
//! Angles are measured counter-clockwise from the +x axis.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{InitParams, Phenotype};
use crate::rng::{streams, SimRng, UniformSource};
use crate::snn::{
    step_network, NeuronState, SnnParams, MOTOR_ANTICLOCKWISE, MOTOR_BACKWARD, MOTOR_CLOCKWISE,
    MOTOR_FORWARD, SENSORY_START,
};

#[derive(Debug, Error, PartialEq)]
pub enum ArenaError {
    #[error("invalid arena configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaConfig {
    pub width: f64,
    pub height: f64,
    pub n_bots: usize,
    pub n_food: usize,
    /// Capture happens when squared bot-food distance is strictly below this.
    pub capture_dist_sq: f64,
    /// Body area of a bot; informational, capture uses `capture_dist_sq`.
    pub bot_area: f64,
    pub move_step: f64,
    pub turn_step: f64,
    /// Outer edges of the three radial vision bands.
    pub radial_bands: [f64; 3],
    /// Food speed is drawn from `[0, food_speed_max)`.
    pub food_speed_max: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            width: 500.0,
            height: 500.0,
            n_bots: 10,
            n_food: 5,
            capture_dist_sq: 13.0,
            bot_area: 40.0,
            move_step: 1.0,
            turn_step: 0.1,
            radial_bands: [30.0, 60.0, 100.0],
            food_speed_max: 1.0,
        }
    }
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<(), ArenaError> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("capture_dist_sq", self.capture_dist_sq),
            ("bot_area", self.bot_area),
            ("move_step", self.move_step),
            ("turn_step", self.turn_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ArenaError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.n_bots == 0 || self.n_food == 0 {
            return Err(ArenaError::InvalidConfig(
                "n_bots and n_food must be at least 1".into(),
            ));
        }
        let [a, b, c] = self.radial_bands;
        if !(a > 0.0 && a < b && b < c && c.is_finite()) {
            return Err(ArenaError::InvalidConfig(format!(
                "radial_bands must be increasing and positive, got {:?}",
                self.radial_bands
            )));
        }
        if !(self.food_speed_max >= 0.0 && self.food_speed_max.is_finite()) {
            return Err(ArenaError::InvalidConfig(format!(
                "food_speed_max must be >= 0, got {}",
                self.food_speed_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    fn random(config: &ArenaConfig, rng: &mut impl UniformSource) -> Self {
        let x = rng.uniform() * config.width;
        let y = rng.uniform() * config.height;
        let theta = rng.uniform() * TAU;
        Pose { x, y, theta }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BotState {
    pub id: u64,
    pub pose: Pose,
    pub phenotype: Phenotype,
    pub neurons: NeuronState,
    /// Lifetime captures `N`.
    pub captures: u64,
    /// Age `tau` in time-steps.
    pub age: u64,
    pub birth_generation: u64,
    pub rng: SimRng,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodState {
    pub pose: Pose,
    pub speed: f64,
}

/// Which vision segments currently contain food.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VisionReport {
    /// Near, middle and far radial bands.
    pub radial: [bool; 3],
    /// Angular thirds, clockwise-most first.
    pub angular: [bool; 3],
}

impl VisionReport {
    pub fn is_empty(&self) -> bool {
        !self.radial.iter().chain(&self.angular).any(|&h| h)
    }
}

/// Reports which vision segments of a bot at `pose` with opening angle
/// `visual_angle` contain food.
///
/// Segment edges are closed below and open above; the outer radius and the
/// outer angular edges are closed.
pub fn sense(
    pose: &Pose,
    visual_angle: f64,
    food: &[FoodState],
    radial_bands: &[f64; 3],
) -> VisionReport {
    let mut report = VisionReport::default();
    let half = 0.5 * visual_angle;
    let third = visual_angle / 3.0;
    let reach_sq = radial_bands[2] * radial_bands[2];
    for f in food {
        let dx = f.pose.x - pose.x;
        let dy = f.pose.y - pose.y;
        let d2 = dx * dx + dy * dy;
        if d2 > reach_sq {
            continue;
        }
        let offset = if d2 == 0.0 {
            0.0
        } else {
            wrap_angle(dy.atan2(dx) - pose.theta)
        };
        if offset.abs() > half {
            continue;
        }
        let d = d2.sqrt();
        let band = if d < radial_bands[0] {
            0
        } else if d < radial_bands[1] {
            1
        } else {
            2
        };
        let sector = (((offset + half) / third).floor() as usize).min(2);
        report.radial[band] = true;
        report.angular[sector] = true;
    }
    report
}

/// Writes the sensory drive for `report` into `drive`, clearing every other
/// entry. Radial bands map to neurons 4-6, angular thirds to 7-9.
pub fn write_sensory_drive(report: &VisionReport, drive: &mut [bool]) {
    drive.iter_mut().for_each(|d| *d = false);
    for (k, &hit) in report.radial.iter().chain(&report.angular).enumerate() {
        drive[SENSORY_START + k] = hit;
    }
}

pub fn vision_to_sensory_drive(report: &VisionReport, n_neurons: usize) -> Vec<bool> {
    let mut drive = vec![false; n_neurons];
    write_sensory_drive(report, &mut drive);
    drive
}

/// Reflects a pose off the arena walls and clamps it inside. A vertical wall
/// maps `theta` to `pi - theta`, a horizontal wall to `-theta`. Returns
/// whether any wall was hit.
pub fn reflect(pose: &mut Pose, width: f64, height: f64) -> bool {
    let mut hit = false;
    if pose.x < 0.0 || pose.x > width {
        pose.x = pose.x.clamp(0.0, width);
        pose.theta = PI - pose.theta;
        hit = true;
    }
    if pose.y < 0.0 || pose.y > height {
        pose.y = pose.y.clamp(0.0, height);
        pose.theta = -pose.theta;
        hit = true;
    }
    hit
}

/// Moves and turns according to the motor spikes, then reflects.
///
/// Opposing motors cancel exactly: the net forward count and the net
/// anticlockwise count are formed before any floating-point motion.
pub fn apply_motor(pose: &mut Pose, fired: &[bool], config: &ArenaConfig) {
    let advance = fired[MOTOR_FORWARD] as i32 - fired[MOTOR_BACKWARD] as i32;
    let turn = fired[MOTOR_ANTICLOCKWISE] as i32 - fired[MOTOR_CLOCKWISE] as i32;
    if advance != 0 {
        let step = advance as f64 * config.move_step;
        pose.x += step * pose.theta.cos();
        pose.y += step * pose.theta.sin();
    }
    if turn != 0 {
        pose.theta = wrap_angle(pose.theta + turn as f64 * config.turn_step);
    }
    reflect(pose, config.width, config.height);
}

/// Advances food along its fixed heading, reflecting at walls.
pub fn move_food(food: &mut FoodState, config: &ArenaConfig) {
    food.pose.x += food.speed * food.pose.theta.cos();
    food.pose.y += food.speed * food.pose.theta.sin();
    reflect(&mut food.pose, config.width, config.height);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capture {
    pub bot_id: u64,
    pub food_index: usize,
}

/// Every food item with a bot strictly within capture range goes to the
/// nearest such bot, ties to the lower id. Results are in food order.
pub fn detect_captures(bots: &[BotState], food: &[FoodState], capture_dist_sq: f64) -> Vec<Capture> {
    let mut out = Vec::new();
    for (food_index, f) in food.iter().enumerate() {
        let mut best: Option<(f64, u64)> = None;
        for b in bots {
            let dx = b.pose.x - f.pose.x;
            let dy = b.pose.y - f.pose.y;
            let d2 = dx * dx + dy * dy;
            if d2 >= capture_dist_sq {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bid)) => d2 < bd || (d2 == bd && b.id < bid),
            };
            if better {
                best = Some((d2, b.id));
            }
        }
        if let Some((_, bot_id)) = best {
            out.push(Capture { bot_id, food_index });
        }
    }
    out
}

/// Uniform position, heading and speed. Consumes exactly four draws in the
/// order x, y, heading, speed.
pub fn spawn_food(rng: &mut impl UniformSource, config: &ArenaConfig) -> FoodState {
    let pose = Pose::random(config, rng);
    let speed = rng.uniform() * config.food_speed_max;
    FoodState { pose, speed }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CaptureEvent {
    pub timestep: u64,
    pub bot_id: u64,
    pub food_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArenaState {
    pub config: ArenaConfig,
    pub snn: SnnParams,
    pub bots: Vec<BotState>,
    pub food: Vec<FoodState>,
    /// World stream: poses, food and founding genomes.
    pub rng: SimRng,
    pub seed: u64,
    pub timestep: u64,
    pub generation: u64,
    next_id: u64,
    drive: Vec<bool>,
}

impl ArenaState {
    /// Founding population and food from the world stream: for each bot its
    /// genome then its pose, then each food item.
    pub fn new(config: ArenaConfig, snn: SnnParams, init: &InitParams, seed: u64) -> Self {
        let mut rng = SimRng::new(seed, streams::WORLD);
        let mut bots = Vec::with_capacity(config.n_bots);
        for id in 0..config.n_bots as u64 {
            let phenotype = Phenotype::random(snn.n_neurons, init, &mut rng);
            let pose = Pose::random(&config, &mut rng);
            bots.push(BotState {
                id,
                pose,
                phenotype,
                neurons: NeuronState::new(snn.n_neurons),
                captures: 0,
                age: 0,
                birth_generation: 0,
                rng: SimRng::for_bot(seed, id),
            });
        }
        let food = (0..config.n_food)
            .map(|_| spawn_food(&mut rng, &config))
            .collect();
        ArenaState {
            next_id: config.n_bots as u64,
            drive: vec![false; snn.n_neurons],
            config,
            snn,
            bots,
            food,
            rng,
            seed,
            timestep: 0,
            generation: 0,
        }
    }

    /// Adds a newborn with a random pose, fresh neurons, no captures and age
    /// one. Returns its id.
    pub fn spawn_bot(&mut self, phenotype: Phenotype, generation: u64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let pose = Pose::random(&self.config, &mut self.rng);
        self.bots.push(BotState {
            id,
            pose,
            neurons: NeuronState::new(phenotype.weights.dim()),
            phenotype,
            captures: 0,
            age: 1,
            birth_generation: generation,
            rng: SimRng::for_bot(self.seed, id),
        });
        id
    }

    pub fn bot(&self, id: u64) -> Option<&BotState> {
        self.bots.iter().find(|b| b.id == id)
    }

    /// One time-step: every bot senses, thinks and moves in id order; then
    /// food drifts; then captures are resolved and the eaten food respawned.
    pub fn step(&mut self) -> Vec<CaptureEvent> {
        let ArenaState {
            config,
            snn,
            bots,
            food,
            drive,
            ..
        } = self;
        for bot in bots.iter_mut() {
            let report = sense(
                &bot.pose,
                bot.phenotype.visual_angle,
                food,
                &config.radial_bands,
            );
            write_sensory_drive(&report, drive);
            let fired = step_network(
                &mut bot.neurons,
                &bot.phenotype.weights,
                bot.phenotype.spontaneous_rate,
                snn,
                drive,
                &mut bot.rng,
            );
            apply_motor(&mut bot.pose, fired, config);
        }
        for f in food.iter_mut() {
            move_food(f, config);
        }

        let captures = detect_captures(bots, food, config.capture_dist_sq);
        let mut events = Vec::with_capacity(captures.len());
        for c in captures {
            self.food[c.food_index] = spawn_food(&mut self.rng, &self.config);
            if let Some(b) = self.bots.iter_mut().find(|b| b.id == c.bot_id) {
                b.captures += 1;
            }
            events.push(CaptureEvent {
                timestep: self.timestep,
                bot_id: c.bot_id,
                food_index: c.food_index,
            });
        }
        for b in self.bots.iter_mut() {
            b.age += 1;
        }
        self.timestep += 1;
        events
    }
}

/// Free-function form of [`ArenaState::step`].
pub fn arena_step(state: &mut ArenaState) -> Vec<CaptureEvent> {
    state.step()
}
