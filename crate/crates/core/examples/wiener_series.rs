// Shell-capacity series for thin bodies of rotation: power profiles give
// non-summable series, fast-decaying profiles summable ones.

use riesz_balayage::geometry::sample_rotation_body;
use riesz_balayage::wiener::{capacity_finiteness_series, equilibrium_existence_series, shell_capacities};
use riesz_balayage::{Profile, RotationBodySpec, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    for (profile, s) in [(Profile::Power, 1.0), (Profile::StretchedExp, 1.0), (Profile::SuperExp, 2.0)] {
        let body = sample_rotation_body(&RotationBodySpec::new(profile, s, 16.0, 0.3)?, 0)?;
        let d = shell_capacities(&setup, &body, &[0.0; 3], 2.0, 1..=3)?;
        let e = equilibrium_existence_series(&d)?;
        let f = capacity_finiteness_series(&d)?;
        println!(
            "{profile:?} s = {s}: N = {}, c_k = {:?}, existence {:?} (ratio {:.2?}), finiteness {:?}",
            body.len(),
            e.capacities.iter().map(|c| (c * 1e3).round() / 1e3).collect::<Vec<_>>(),
            e.verdict,
            e.tail_ratio,
            f.verdict
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
