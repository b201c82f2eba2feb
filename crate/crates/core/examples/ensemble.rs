//! A small seeded ensemble run in parallel, then the distribution of the
//! fitted inflection points. Any config key can be overridden from the
//! environment, e.g. `EVOSPIKE_EVOLUTION__STRATEGY=crossover`.

use evospike::analysis::{fit_trajectory, summarize_strategy};
use evospike::config;
use evospike::run_ensemble;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let generations: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1500);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let mut config = config::load(None, std::env::vars(), &[])?;
    config.experiment.max_generations = generations;
    let members = run_ensemble(&config, seeds, jobs)?;

    let mut fits = Vec::new();
    for m in members {
        let out = m.outcome?;
        let first = out.trajectory.points.first().map_or(f64::NAN, |p| p.t);
        let last = out.trajectory.points.last().map_or(f64::NAN, |p| p.t);
        let fit = fit_trajectory(&out.trajectory.points, &config.analysis);
        println!(
            "seed {:>3}: T {first:>7.1} -> {last:>6.1}  g0 = {:>6.0}  c = {:>5.0}  accepted = {}",
            m.seed,
            fit.params.inflection,
            fit.params.floor,
            fit.is_accepted()
        );
        fits.push(fit);
    }
    let s = summarize_strategy(config.evolution.strategy.as_str(), &fits, &config.analysis);
    println!(
        "g0 = {:.0} ± {:.0} (sd) over {} accepted fits",
        s.inflection_stats.mean, s.inflection_stats.std_dev, s.n_accepted
    );
    for w in &s.warnings {
        println!("note: {w}");
    }
    Ok(())
}
