// Sweeping onto growing caps of a sphere: the energy distance to the source
// shrinks and the swept potentials grow.

use std::sync::Arc;

use riesz_balayage::balayage::{default_probes, sweep_increasing};
use riesz_balayage::geometry::sample_sphere_frequency;
use riesz_balayage::{DiscreteMeasure, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let sphere = sample_sphere_frequency(&[0.0; 3], 1.0, 7)?;
    let mu = DiscreteMeasure::dirac(&[3.0, 0.0, 0.0], 1.0)?;
    let caps: Vec<_> = [0.5, 0.0, -0.5, -2.0].iter().map(|&c| Arc::new(sphere.filter("cap", move |p| p[0] >= c))).collect();
    let res = sweep_increasing(&setup, &mu, &caps, &default_probes(&sphere, Some(&mu)))?;
    for (cap, (d, l)) in caps.iter().zip(res.distances.iter().zip(&res.levels)) {
        println!("N = {:4}  |mu - mu^K| = {d:.6}  mass {:.5}", cap.len(), l.swept_mass);
    }
    println!("worst distance increase {:.1e}, worst potential drop {:.1e}", res.max_distance_increase, res.max_potential_decrease);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
