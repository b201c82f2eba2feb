//! Half-column crossover on two 4x4 weight matrices, followed by the
//! Gaussian mutation applied to each child.

use evospike::evolution::{crossover, mutate, EvolutionParams, Phenotype};
use evospike::rng::SimRng;
use evospike::snn::WeightMatrix;

fn show(name: &str, w: &WeightMatrix) {
    println!("{name}");
    for i in 0..w.dim() {
        let row: Vec<String> = w.row(i).iter().map(|x| format!("{x:>6.2}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parent = |base: f64| -> Result<Phenotype, Box<dyn std::error::Error>> {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { base + (4 * i + j) as f64 / 100.0 }).collect())
            .collect();
        Ok(Phenotype {
            weights: WeightMatrix::from_rows(&rows)?,
            spontaneous_rate: 0.01,
            visual_angle: std::f64::consts::FRAC_PI_2,
        })
    };
    let a = parent(1.0)?;
    let b = parent(2.0)?;
    show("parent A", &a.weights);
    show("parent B", &b.weights);

    let (c1, c2) = crossover(&a, &b)?;
    show("child 1 (A left | B right)", &c1.weights);
    show("child 2 (B left | A right)", &c2.weights);

    let params = EvolutionParams::default();
    let mut rng = SimRng::new(7, 1);
    let m1 = mutate(&c1, &params, &mut rng);
    show("child 1 after mutation", &m1.weights);
    println!("b: {:.4} -> {:.4}, v: {:.4} -> {:.4}", c1.spontaneous_rate, m1.spontaneous_rate, c1.visual_angle, m1.visual_angle);
    Ok(())
}
