//! What a bot sees: food positions around a bot facing east with a 90
//! degree field of view, and the sensory neurons each one triggers.

use std::f64::consts::FRAC_PI_2;

use evospike::arena::{sense, vision_to_sensory_drive, ArenaConfig, FoodState, Pose};

fn main() {
    let bands = ArenaConfig::default().radial_bands;
    let bot = Pose::new(250.0, 250.0, 0.0);
    let v = FRAC_PI_2;
    let spots = [
        ("ahead, 20 away", 20.0, 0.0),
        ("ahead, 45 away", 45.0, 0.0),
        ("ahead, 80 away", 80.0, 0.0),
        ("30 deg left, 50 away", 50.0, 30f64.to_radians()),
        ("30 deg right, 50 away", 50.0, -30f64.to_radians()),
        ("60 deg left, 50 away", 50.0, 60f64.to_radians()),
        ("ahead, 120 away", 120.0, 0.0),
    ];
    println!("bot at (250, 250) facing +x, v = 90 deg; neurons 4-6 radial, 7-9 angular");
    for (label, r, phi) in spots {
        let food = FoodState {
            pose: Pose::new(bot.x + r * f64::cos(phi), bot.y + r * f64::sin(phi), 0.0),
            speed: 0.0,
        };
        let report = sense(&bot, v, &[food], &bands);
        let drive = vision_to_sensory_drive(&report, 30);
        let fired: Vec<usize> = (0..30).filter(|&k| drive[k]).collect();
        println!("{label:<24} radial {:?} angular {:?} -> neurons {fired:?}", report.radial, report.angular);
    }
}
