//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria 7 and 8 need the full ensemble (30 seeds per strategy, 3000
//! generations). `EVOSPIKE_ACCEPTANCE_SEEDS` lowers the seed count for a
//! smoke run; below 30 seeds those two lines report SMOKE instead of PASS.
//! The process exits nonzero when any of criteria 1-6 fails; criteria 7 and 8
//! are reported but do not gate the exit code (see README, "Known results").

use std::time::{Duration, Instant};

use evospike::analysis::{
    assess_bimodality, compare_strategies, fit_logistic, fit_trajectory, BimodalityRule, HistogramSpec,
    LogisticFit, LogisticFitOptions, LogisticParams, SampleStats,
};
use evospike::arena::ArenaState;
use evospike::evolution::{crossover, Evolver, Parent, Phenotype, Strategy};
use evospike::experiment::{run_ensemble, run_experiment};
use evospike::io::{captures_csv, trajectory_csv};
use evospike::rng::SimRng;
use evospike::snn::{step_network, NeuronState, SnnParams, WeightMatrix};
use evospike::Config;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(id: u32, name: &str, gating: bool, started: Instant, o: &Outcome, smoke: bool) -> bool {
    let status = match (o.pass, smoke) {
        (_, true) => "SMOKE",
        (true, _) => "PASS",
        (false, _) => "FAIL",
    };
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion {id} [{status}] {name} ({elapsed:.1}s): {}", o.detail);
    !gating || o.pass
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

/// Oracle: V_t for a neuron charged once with `q` and never fired,
/// V_0 = q, V_{t+1} = V_t - beta V_t.
fn lif_unit() -> Outcome {
    let t0 = Instant::now();
    let params = SnnParams::default();
    let run = |q: f64, steps: usize| {
        let mut w = WeightMatrix::zeros(params.n_neurons);
        w.set(12, 4, q);
        let mut state = NeuronState::new(params.n_neurons);
        let mut rng = SimRng::new(0, 0);
        let mut drive = vec![false; params.n_neurons];
        (0..steps)
            .map(|t| {
                drive[4] = t == 0;
                let fired = step_network(&mut state, &w, 0.0, &params, &drive, &mut rng)[12];
                (state.potentials[12], fired)
            })
            .collect::<Vec<_>>()
    };
    let high = run(0.5, 5);
    let fires_and_resets = high[0].1 && high[1..].iter().all(|&(v, f)| !f && v == 0.0);
    let low = run(0.3, 200);
    let mut v = 0.3;
    let mut decays = true;
    for &(got, fired) in &low {
        decays &= !fired && got == v;
        v -= params.beta * v;
    }
    let ratio = low[10].0 / low[9].0;
    outcome(
        fires_and_resets && decays && within(t0.elapsed(), 1.0),
        format!("0.5 fires then V=0: {fires_and_resets}; 0.3 silent, exact geometric decay (ratio {ratio:.6}): {decays}"),
    )
}

fn logistic_points(p: LogisticParams, noise: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = SimRng::new(seed, 0);
    (49..3000)
        .map(|g| {
            let g = g as f64;
            (g, p.eval(g) + if noise > 0.0 { rng.normal(noise) } else { 0.0 })
        })
        .collect()
}

fn fitter_oracle() -> Outcome {
    let t0 = Instant::now();
    let truth = LogisticParams::new(2935.0, 0.02, 1214.0, 717.0);
    let opts = LogisticFitOptions::default();
    let fit = fit_logistic(&logistic_points(truth, 0.0, 0), None, &opts);
    let rel = [
        (fit.params.amplitude, truth.amplitude),
        (fit.params.rate, truth.rate),
        (fit.params.inflection, truth.inflection),
        (fit.params.floor, truth.floor),
    ]
    .map(|(a, b)| ((a - b) / b).abs());
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    let covered = (0..100)
        .filter(|&seed| {
            let f = fit_logistic(&logistic_points(truth, 100.0, seed + 1), None, &opts);
            f.converged && (f.params.inflection - truth.inflection).abs() <= 3.0 * f.uncertainties.inflection
        })
        .count();
    let secs = t0.elapsed();
    outcome(
        fit.converged && worst < 1e-3 && covered >= 90 && within(secs, 10.0),
        format!("noiseless worst relative error {worst:.2e}; g0 within 3 sigma in {covered}/100 noisy fits"),
    )
}

fn bimodal_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = SimRng::new(11, 0);
    let xs: Vec<f64> = (0..1000)
        .map(|_| {
            if rng.uniform_in(0.0, 1.0) < 0.71 {
                759.0 + rng.normal(25.0)
            } else {
                1967.0 + rng.normal(31.0)
            }
        })
        .collect();
    match assess_bimodality(&xs, &HistogramSpec::new(100.0), &BimodalityRule::default()) {
        Ok(v) => outcome(
            v.bimodal && (v.minor_weight - 0.29).abs() <= 0.05 && within(t0.elapsed(), 10.0),
            format!("bimodal {}, minor fraction {:.3}", v.bimodal, v.minor_weight),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn evolution_invariants() -> Outcome {
    let config = Config::default();
    let mut problems = Vec::new();
    for strategy in [Strategy::Mutation, Strategy::Crossover] {
        let mut params = config.evolution;
        params.strategy = strategy;
        let mut arena = ArenaState::new(config.arena.clone(), config.snn, &params.init, 3);
        let mut evolver = Evolver::new(params, SimRng::new(3, 1));
        let mut pick = SimRng::new(3, 99);
        for event in 0..10_000 {
            let k = (pick.uniform_in(0.0, arena.bots.len() as f64) as usize).min(arena.bots.len() - 1);
            let bot = &mut arena.bots[k];
            bot.captures += 1;
            bot.age += 1 + (pick.uniform_in(0.0, 500.0) as u64);
            let parent = Parent { bot_id: bot.id, phenotype: bot.phenotype.clone() };
            evolver.on_capture(&mut arena, parent);
            if arena.bots.len() != 10 {
                problems.push(format!("{strategy:?}: population {} after capture {event}", arena.bots.len()));
                break;
            }
            if !arena.bots.iter().all(|b| b.phenotype.is_valid() && b.phenotype.weights.diagonal_is_zero()) {
                problems.push(format!("{strategy:?}: invalid phenotype after capture {event}"));
                break;
            }
        }
    }

    let mut rng = SimRng::new(5, 0);
    let mut involution = true;
    for n in [4usize, 7, 30] {
        let a = Phenotype::random(n, &config.evolution.init, &mut rng);
        let b = Phenotype::random(n, &config.evolution.init, &mut rng);
        let (c1, c2) = crossover(&a, &b).unwrap();
        let (d1, d2) = crossover(&c1, &c2).unwrap();
        involution &= d1 == a && d2 == b;
    }
    if !involution {
        problems.push("crossover applied twice is not the identity".into());
    }

    // 4x4 oracle: entry = parent tag + row-major position; columns 2 and 3 swap.
    let genome = |tag: f64| {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { tag + (4 * i + j) as f64 }).collect())
            .collect();
        Phenotype {
            weights: WeightMatrix::from_rows(&rows).unwrap(),
            spontaneous_rate: 0.0,
            visual_angle: 1.0,
        }
    };
    let (c1, c2) = crossover(&genome(100.0), &genome(200.0)).unwrap();
    let expected = |left: f64, right: f64| -> Vec<f64> {
        (0..16)
            .map(|p| {
                let (i, j) = (p / 4, p % 4);
                if i == j {
                    0.0
                } else if j < 2 {
                    left + p as f64
                } else {
                    right + p as f64
                }
            })
            .collect()
    };
    if c1.weights.as_row_major() != expected(100.0, 200.0).as_slice()
        || c2.weights.as_row_major() != expected(200.0, 100.0).as_slice()
    {
        problems.push("4x4 crossover pattern mismatch".into());
    }
    let pass = problems.is_empty();
    outcome(
        pass,
        if pass {
            "10^4 captures per strategy: population 10, zero diagonal, b and v in range; involution; 4x4 pattern exact".into()
        } else {
            problems.join("; ")
        },
    )
}

fn determinism() -> Outcome {
    let t0 = Instant::now();
    let mut problems = Vec::new();
    for strategy in [Strategy::Mutation, Strategy::Crossover] {
        let mut c = Config::default();
        c.evolution.strategy = strategy;
        c.experiment.max_generations = 200;
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        if trajectory_csv(&a.trajectory.points) != trajectory_csv(&b.trajectory.points)
            || captures_csv(&a.captures) != captures_csv(&b.captures)
        {
            problems.push(format!("{strategy:?}: repeated run differs"));
        }
        let one = run_ensemble(&c, 8, 1).unwrap();
        let eight = run_ensemble(&c, 8, 8).unwrap();
        for (x, y) in one.iter().zip(&eight) {
            let (x, y) = (x.outcome.as_ref().unwrap(), y.outcome.as_ref().unwrap());
            if trajectory_csv(&x.trajectory.points) != trajectory_csv(&y.trajectory.points)
                || captures_csv(&x.captures) != captures_csv(&y.captures)
            {
                problems.push(format!("{strategy:?}: jobs 1 vs 8 differ"));
                break;
            }
        }
    }
    let secs = t0.elapsed();
    if !within(secs, 120.0) {
        problems.push(format!("took {:.0}s", secs.as_secs_f64()));
    }
    let pass = problems.is_empty();
    outcome(
        pass,
        if pass { "same seed byte-identical; 8-seed ensembles identical for jobs 1 and 8".into() } else { problems.join("; ") },
    )
}

fn punctuated_equilibrium() -> Outcome {
    let mut c = Config::default();
    c.experiment.max_generations = 5000;
    let out = run_experiment(&c).unwrap();
    let pts = &out.trajectory.points;
    if pts.len() < 200 {
        return outcome(false, format!("only {} T points", pts.len()));
    }
    let fit = fit_trajectory(pts, &c.analysis);
    let mean = |s: &[evospike::experiment::TPoint]| s.iter().map(|p| p.t).sum::<f64>() / s.len() as f64;
    let initial = mean(&pts[..100]);
    let last = mean(&pts[pts.len() - 100..]);
    let p = fit.params;
    outcome(
        fit.is_accepted() && p.amplitude > 0.0 && p.rate > 0.0 && last <= 0.5 * initial,
        format!(
            "fit accepted {} (L {:.0}, k {:.4}, g0 {:.0}, c {:.0}); T first 100 points {initial:.0}, last 100 {last:.0}",
            fit.is_accepted(),
            p.amplitude,
            p.rate,
            p.inflection,
            p.floor
        ),
    )
}

fn ensemble_fits(strategy: Strategy, seeds: usize) -> Vec<LogisticFit> {
    let mut c = Config::default();
    c.evolution.strategy = strategy;
    c.experiment.max_generations = 3000;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_ensemble(&c, seeds, jobs)
        .unwrap()
        .into_iter()
        .filter_map(|m| m.outcome.ok())
        .map(|o| fit_trajectory(&o.trajectory.points, &c.analysis))
        .collect()
}

fn main() {
    let seeds: usize = std::env::var("EVOSPIKE_ACCEPTANCE_SEEDS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(30);
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, "LIF unit dynamics", true, t, &lif_unit(), false);
    let t = Instant::now();
    ok &= report(2, "logistic fitter oracle", true, t, &fitter_oracle(), false);
    let t = Instant::now();
    ok &= report(3, "bimodal fitter oracle", true, t, &bimodal_oracle(), false);
    let t = Instant::now();
    ok &= report(4, "evolution invariants", true, t, &evolution_invariants(), false);
    let t = Instant::now();
    ok &= report(5, "determinism", true, t, &determinism(), false);
    let t = Instant::now();
    ok &= report(6, "punctuated equilibrium", true, t, &punctuated_equilibrium(), false);

    let t = Instant::now();
    let mutation = ensemble_fits(Strategy::Mutation, seeds);
    let cross = ensemble_fits(Strategy::Crossover, seeds);
    let config = evospike::analysis::AnalysisConfig::default();
    let table = compare_strategies(("Mutation", &mutation), ("Crossover with Mutation", &cross), &config);
    let smoke = seeds < 30;
    let g0 = |fits: &[LogisticFit]| {
        SampleStats::of(&fits.iter().filter(|f| f.is_accepted()).map(|f| f.params.inflection).collect::<Vec<_>>())
    };
    let (a, b) = (g0(&mutation), g0(&cross));
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let separation = (a.mean - b.mean) / se;
    let ratio = b.mean / a.mean;
    let c7 = outcome(
        separation >= 2.0 && (0.3..=0.9).contains(&ratio),
        format!(
            "{seeds} seeds; accepted fits {}/{} vs {}/{}; mean g0 {:.0} vs {:.0}; separation {separation:.2} SE (need 2); ratio {ratio:.2} (need 0.3-0.9)",
            a.n,
            mutation.len(),
            b.n,
            cross.len(),
            a.mean,
            b.mean
        ),
    );
    report(7, "strategy comparison", false, t, &c7, smoke);

    let t = Instant::now();
    let frac = table.candidate.suboptimal_fraction();
    let c8 = outcome(
        table.candidate.bimodal() && !table.baseline.bimodal() && frac.is_some_and(|f| (f - 0.29).abs() <= 0.15),
        format!(
            "crossover bimodal {}, mutation bimodal {}, suboptimal fraction {}",
            table.candidate.bimodal(),
            table.baseline.bimodal(),
            frac.map_or("n/a".to_string(), |f| format!("{:.0}%", 100.0 * f))
        ),
    );
    report(8, "bimodal crossover convergence", false, t, &c8, smoke);
    println!();
    print!("{}", table.to_text());

    if !ok {
        std::process::exit(1);
    }
}
