//! Runs a Mutation and a Crossover-with-Mutation ensemble from the same
//! seeds, fits every trajectory, and prints the strategy comparison table.
//!
//! ```text
//! cargo run --release --example compare -- [seeds] [generations] [jobs]
//! ```

use std::time::Instant;

use evospike::analysis::{compare_strategies, fit_trajectory, LogisticFit};
use evospike::{run_ensemble, Config, Strategy};

fn fits_for(config: &Config, seeds: usize, jobs: usize) -> Result<Vec<LogisticFit>, Box<dyn std::error::Error>> {
    let members = run_ensemble(config, seeds, jobs)?;
    let mut fits = Vec::new();
    for m in members {
        match m.outcome {
            Ok(out) => {
                let fit = fit_trajectory(&out.trajectory.points, &config.analysis);
                let p = fit.params;
                println!(
                    "  {:<9} seed {:>3}: g0 = {:>7.0}  c = {:>6.0}  L = {:>8.0}  accepted = {}",
                    config.evolution.strategy.to_string(),
                    m.seed,
                    p.inflection,
                    p.floor,
                    p.amplitude,
                    fit.is_accepted()
                );
                fits.push(fit);
            }
            Err(e) => println!("  seed {} failed: {e}", m.seed),
        }
    }
    Ok(fits)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let generations: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let jobs: usize = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut config = Config::default();
    config.experiment.max_generations = generations;
    let start = Instant::now();

    config.evolution.strategy = Strategy::Mutation;
    let mutation = fits_for(&config, seeds, jobs)?;
    config.evolution.strategy = Strategy::Crossover;
    let crossover = fits_for(&config, seeds, jobs)?;

    let table = compare_strategies(
        ("Mutation", &mutation),
        ("Crossover with Mutation", &crossover),
        &config.analysis,
    );
    println!("\n{}", table.to_text());
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
