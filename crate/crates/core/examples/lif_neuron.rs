//! A single leaky integrate-and-fire neuron driven for one step.
//!
//! Sensory neuron 4 is triggered once and feeds neuron 12 through a single
//! weight. A charge of 0.5 crosses the 0.4 threshold, fires and resets; a
//! charge of 0.3 stays below it and leaks away by 1% per step.

use evospike::rng::SimRng;
use evospike::snn::{step_network, NeuronState, SnnParams, WeightMatrix};

fn trace(weight: f64, steps: usize) -> Vec<(f64, bool)> {
    let params = SnnParams::default();
    let mut w = WeightMatrix::zeros(params.n_neurons);
    w.set(12, 4, weight);
    let mut state = NeuronState::new(params.n_neurons);
    let mut rng = SimRng::new(0, 0);
    let mut drive = vec![false; params.n_neurons];
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        drive[4] = t == 0;
        // b = 0: no spontaneous spikes.
        let spiked = step_network(&mut state, &w, 0.0, &params, &drive, &mut rng)[12];
        out.push((state.potentials[12], spiked));
    }
    out
}

fn main() {
    let steps = 8;
    let high = trace(0.5, steps);
    let low = trace(0.3, steps);
    println!("{:>4}  {:<22}  {:<22}", "t", "charge 0.5", "charge 0.3");
    for t in 0..steps {
        let cell = |(v, f): (f64, bool)| format!("V = {v:<10.6}{}", if f { " spike" } else { "" });
        println!("{t:>4}  {:<22}  {:<22}", cell(high[t]), cell(low[t]));
    }
}
