//! One evolutionary run with the default parameter set, printing the
//! learning metric every few hundred generations.
//!
//! ```text
//! cargo run --release --example single_run -- [generations] [seed] [mutation|crossover]
//! ```

use std::time::Instant;

use evospike::analysis::fit_trajectory;
use evospike::{run_experiment, Config, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = Config::default();
    config.experiment.max_generations = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    config.experiment.seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    if let Some(s) = args.next() {
        config.evolution.strategy = s.parse::<Strategy>()?;
    }

    let start = Instant::now();
    let out = run_experiment(&config)?;
    let elapsed = start.elapsed();
    println!(
        "{} generations, {} captures, {} steps in {:.1?}",
        config.experiment.max_generations,
        out.captures.len(),
        out.steps,
        elapsed
    );

    let stride = (out.trajectory.points.len() / 20).max(1);
    for p in out.trajectory.points.iter().step_by(stride) {
        println!("g = {:>6}  T = {:>8.1}", p.generation, p.t);
    }

    let fit = fit_trajectory(&out.trajectory.points, &config.analysis);
    let p = fit.params;
    println!(
        "logistic fit: L = {:.0}, k = {:.4}, g0 = {:.0}, c = {:.0} (accepted: {})",
        p.amplitude,
        p.rate,
        p.inflection,
        p.floor,
        fit.is_accepted()
    );
    Ok(())
}
