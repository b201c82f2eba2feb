//! Fits the logistic-on-pedestal model to a noisy synthetic learning curve
//! and compares the recovered parameters with the generator.

use evospike::analysis::{fit_logistic, LogisticFitOptions, LogisticParams};
use evospike::rng::SimRng;

fn main() {
    let truth = LogisticParams::new(2935.0, 0.02, 1214.0, 717.0);
    let mut rng = SimRng::new(3, 0);
    let points: Vec<(f64, f64)> = (49..5000)
        .map(|g| {
            let g = g as f64;
            (g, truth.eval(g) + rng.normal(100.0))
        })
        .collect();

    let fit = fit_logistic(&points, None, &LogisticFitOptions::default());
    let rows = [
        ("L", truth.amplitude, fit.params.amplitude, fit.uncertainties.amplitude),
        ("k", truth.rate, fit.params.rate, fit.uncertainties.rate),
        ("g0", truth.inflection, fit.params.inflection, fit.uncertainties.inflection),
        ("c", truth.floor, fit.params.floor, fit.uncertainties.floor),
    ];
    println!("{:<4} {:>10} {:>12} {:>10}", "", "true", "fitted", "+/-");
    for (name, t, f, u) in rows {
        println!("{name:<4} {t:>10.4} {f:>12.4} {u:>10.4}");
    }
    println!(
        "chi2 = {:.4e} over {} points, {} iterations, accepted = {}",
        fit.chi2,
        fit.n_points,
        fit.iterations,
        fit.is_accepted()
    );
}
