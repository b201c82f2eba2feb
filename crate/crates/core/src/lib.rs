//! Evolving spiking-network foraging bots.
//!
//! A population of bots, each driven by a small leaky integrate-and-fire
//! network, hunts moving food in a walled arena. Every capture triggers a
//! steady-state evolutionary step (mutation, or crossover with mutation),
//! and the population's learning is tracked by `T`, the trailing mean time
//! between consecutive captures. The [`analysis`] module fits `T(g)` with a
//! logistic step on a pedestal and compares strategy ensembles.
//!
//! The runnable `examples/` directory walks through each piece; the
//! `evospike` binary wraps [`cli`] for batch use.

pub mod analysis;
pub mod arena;
pub mod cli;
pub mod config;
pub mod evolution;
pub mod experiment;
pub mod io;
pub mod rng;
pub mod snn;

pub use arena::{ArenaConfig, ArenaState};
pub use config::Config;
pub use evolution::{EvolutionParams, Phenotype, Strategy};
pub use experiment::{run_ensemble, run_experiment, Trajectory};
