// Mass lost when sweeping a Dirac onto truncated bodies of rotation.

use std::sync::Arc;

use riesz_balayage::balayage::mass_deficit;
use riesz_balayage::geometry::sample_rotation_body;
use riesz_balayage::{DiscreteMeasure, Profile, RotationBodySpec, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let mu = DiscreteMeasure::dirac(&[0.0, 3.0, 0.0], 1.0)?;
    for (profile, s) in [(Profile::Power, 0.0), (Profile::StretchedExp, 1.0)] {
        let mut line = format!("{profile:?} s = {s}:");
        for x1 in [2.0, 4.0, 8.0] {
            let body = Arc::new(sample_rotation_body(&RotationBodySpec::new(profile, s, x1, 0.35)?, 0)?);
            let d = mass_deficit(&setup, &mu, &body)?;
            line.push_str(&format!("  x1_max {x1}: {:.3}", d.deficit_ratio));
        }
        println!("{line}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
