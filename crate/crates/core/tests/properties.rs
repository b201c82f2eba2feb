use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use evospike::analysis::{eval_logistic, fit_gaussians, HistogramSpec};
use evospike::arena::{reflect, sense, wrap_angle, ArenaConfig, BotState, FoodState, Pose};
use evospike::evolution::{compare_fitness, crossover, mutate, EvolutionParams, Phenotype};
use evospike::rng::SimRng;
use evospike::snn::{step_network, NeuronState, SnnParams, WeightMatrix};

fn phenotype(n: usize, seed: u64) -> Phenotype {
    let mut rng = SimRng::new(seed, 5);
    Phenotype {
        weights: WeightMatrix::random_uniform(n, -1.0, 1.0, &mut rng),
        spontaneous_rate: rng.uniform_in(0.0, 1.0),
        visual_angle: rng.uniform_in(0.1, 3.0),
    }
}

fn bot(captures: u64, age: u64) -> BotState {
    BotState {
        id: 0,
        pose: Pose::new(0.0, 0.0, 0.0),
        phenotype: phenotype(10, 0),
        neurons: NeuronState::new(10),
        captures,
        age,
        birth_generation: 0,
        rng: SimRng::new(0, 0),
    }
}

/// Distance from `x` to the nearest of `edges`.
fn clearance(x: f64, edges: &[f64]) -> f64 {
    edges.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vision_is_rotation_invariant(
        x in 120.0..380.0f64, y in 120.0..380.0f64, heading in -PI..PI,
        r in 0.5..110.0f64, phi in -PI..PI, v in 0.05..6.2f64, alpha in -PI..PI,
    ) {
        // Keep away from band and sector edges, where rounding decides.
        let half = v / 2.0;
        prop_assume!(clearance(r, &[30.0, 60.0, 100.0]) > 1e-6);
        prop_assume!(clearance(phi, &[-half, -half + v / 3.0, half - v / 3.0, half]) > 1e-6);
        let bands = [30.0, 60.0, 100.0];
        let place = |theta: f64| {
            let pose = Pose::new(x, y, theta);
            let a = theta + phi;
            let food = FoodState { pose: Pose::new(x + r * a.cos(), y + r * a.sin(), 0.0), speed: 0.0 };
            sense(&pose, v, &[food], &bands)
        };
        prop_assert_eq!(place(heading), place(heading + alpha));
    }

    #[test]
    fn crossover_twice_is_identity(n in 10usize..40, s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = phenotype(n, s1);
        let b = phenotype(n, s2);
        let (c, d) = crossover(&a, &b).unwrap();
        let (e, f) = crossover(&c, &d).unwrap();
        prop_assert_eq!(e, a);
        prop_assert_eq!(f, b);
    }

    #[test]
    fn operators_keep_zero_diagonal_and_bounds(
        n in 10usize..35, seed in any::<u64>(), b in 0.0..=1.0f64, v in 1e-6..TAU,
        sigma in 0.0..3.0f64,
    ) {
        let mut a = phenotype(n, seed);
        a.spontaneous_rate = b;
        a.visual_angle = v;
        let params = EvolutionParams { mu_mod: sigma, mu_visual: 4.0 * sigma, ..EvolutionParams::default() };
        let mut rng = SimRng::new(seed, 1);
        let (c, d) = crossover(&a, &phenotype(n, seed ^ 1)).unwrap();
        for p in [mutate(&a, &params, &mut rng), mutate(&c, &params, &mut rng), d] {
            prop_assert!(p.weights.diagonal_is_zero());
            prop_assert!((0.0..=1.0).contains(&p.spontaneous_rate));
            prop_assert!(p.visual_angle >= 1e-6 && p.visual_angle <= TAU);
        }
    }

    #[test]
    fn fitness_order_is_scale_invariant(n in 0u64..1000, age in 1u64..1_000_000, k in 1u64..1000) {
        prop_assert_eq!(compare_fitness(&bot(n, age), &bot(k * n, k * age)), Ordering::Equal);
        prop_assert_eq!(compare_fitness(&bot(n, age), &bot(k * n + 1, k * age)), Ordering::Less);
    }

    #[test]
    fn sub_threshold_potential_decays_geometrically(w in 0.001..0.4f64, beta in 0.001..0.5f64) {
        let params = SnnParams { beta, ..SnnParams::default() };
        let mut weights = WeightMatrix::zeros(30);
        weights.set(20, 5, w);
        let mut s = NeuronState::new(30);
        let mut rng = SimRng::new(1, 1);
        let mut drive = vec![false; 30];
        drive[5] = true;
        step_network(&mut s, &weights, 0.0, &params, &drive, &mut rng);
        drive[5] = false;
        prop_assert_eq!(s.potentials[20], w);
        for k in 1..200 {
            step_network(&mut s, &weights, 0.0, &params, &drive, &mut rng);
            let expected = w * (1.0 - beta).powi(k);
            prop_assert!((s.potentials[20] - expected).abs() <= 1e-12 * w);
            prop_assert!(!s.fired[20]);
        }
    }

    #[test]
    fn reflection_keeps_bots_inside(x in -5.0..505.0f64, y in -5.0..505.0f64, theta in -PI..PI) {
        let mut p = Pose::new(x, y, theta);
        let hit = reflect(&mut p, 500.0, 500.0);
        prop_assert!((0.0..=500.0).contains(&p.x) && (0.0..=500.0).contains(&p.y));
        prop_assert_eq!(hit, !(0.0..=500.0).contains(&x) || !(0.0..=500.0).contains(&y));
    }

    #[test]
    fn wrapped_angles_are_half_open(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((w - a) / TAU - ((w - a) / TAU).round()).abs() < 1e-9);
    }

    #[test]
    fn logistic_is_decreasing(g in -1e4..1e4f64, dg in 0.01..100.0f64, l in 1.0..5e3f64, k in 1e-3..1.0f64) {
        let a = eval_logistic(g, l, k, 1000.0, 700.0);
        let b = eval_logistic(g + dg, l, k, 1000.0, 700.0);
        prop_assert!(b <= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_fit_is_location_equivariant(seed in any::<u64>(), shift_bins in -3i32..8) {
        let mut rng = SimRng::new(seed, 0);
        let xs: Vec<f64> = (0..2000).map(|_| 600.0 + rng.normal(120.0)).collect();
        let delta = 150.0 * shift_bins as f64;
        let moved: Vec<f64> = xs.iter().map(|x| x + delta).collect();
        let spec = HistogramSpec::new(150.0);
        let a = fit_gaussians(&xs, &spec, 1).unwrap();
        let b = fit_gaussians(&moved, &spec, 1).unwrap();
        prop_assert!(a.converged && b.converged);
        let (ca, cb) = (&a.components[0], &b.components[0]);
        prop_assert!((cb.mean - ca.mean - delta).abs() < 1e-6 * ca.sigma);
        prop_assert!((cb.sigma - ca.sigma).abs() < 1e-6 * ca.sigma);
    }
}

#[test]
fn arena_geometry_defaults() {
    let c = ArenaConfig::default();
    assert_eq!((c.width, c.height, c.n_bots, c.n_food), (500.0, 500.0, 10, 5));
    assert_eq!(c.capture_dist_sq, 13.0);
    assert_eq!(c.radial_bands, [30.0, 60.0, 100.0]);
}
