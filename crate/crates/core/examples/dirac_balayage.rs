// Sweep a unit Dirac at (2, 0, 0) onto the unit sphere. The swept mass
// tends to 1/2 and the swept potential matches the source on the sphere.

use std::sync::Arc;

use riesz_balayage::balayage::{default_probes, sweep};
use riesz_balayage::geometry::sample_sphere_frequency;
use riesz_balayage::{DiscreteMeasure, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let mu = DiscreteMeasure::dirac(&[2.0, 0.0, 0.0], 1.0)?;
    for f in [4, 7, 11] {
        let target = Arc::new(sample_sphere_frequency(&[0.0; 3], 1.0, f)?);
        let res = sweep(&setup, &mu, &target, &default_probes(&target, Some(&mu)))?;
        println!(
            "N = {:5}  mass {:.5}  node match {:.1e}  off-target excess {:.2}%",
            target.len(),
            res.swept_mass,
            res.potential_match,
            100.0 * res.domination_excess
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
