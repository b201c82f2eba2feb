//! Histogram a two-population sample and decide between one and two
//! Gaussians.

use evospike::analysis::{assess_bimodality, BimodalityRule, HistogramSpec};
use evospike::rng::SimRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SimRng::new(11, 0);
    let samples: Vec<f64> = (0..1000)
        .map(|k| {
            if k % 100 < 71 {
                759.0 + rng.normal(25.0)
            } else {
                1967.0 + rng.normal(31.0)
            }
        })
        .collect();

    let verdict = assess_bimodality(&samples, &HistogramSpec::new(100.0), &BimodalityRule::default())?;
    for (lo, c) in verdict.histogram.edges.iter().zip(&verdict.histogram.counts) {
        if *c > 0 {
            println!("{lo:>6.0}  {c:>4} {}", "#".repeat((*c as usize).div_ceil(10)));
        }
    }
    println!("one Gaussian:  chi2 = {:.1}", verdict.one.chi2);
    println!("two Gaussians: chi2 = {:.1}", verdict.two.chi2);
    for c in &verdict.two.components {
        println!("  mean {:.1} ± {:.1}, sigma {:.1}, weight {:.3}", c.mean, c.mean_err, c.sigma, c.weight);
    }
    println!(
        "chi2 reduction {:.3}, minor weight {:.3} -> bimodal = {}",
        verdict.chi2_reduction, verdict.minor_weight, verdict.bimodal
    );
    Ok(())
}
