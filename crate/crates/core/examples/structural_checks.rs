// Symmetry, restriction and superposition checks for balayage onto a
// sphere and a hemisphere.

use std::sync::Arc;

use riesz_balayage::balayage::{check_restriction, check_symmetry, default_probes, superpose_diracs};
use riesz_balayage::geometry::sample_sphere_frequency;
use riesz_balayage::{DiscreteMeasure, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let a = Arc::new(sample_sphere_frequency(&[0.0; 3], 1.0, 6)?);
    let q = Arc::new(a.filter("upper", |p| p[2] >= 0.0));
    let mu = DiscreteMeasure::dirac(&[2.0, 0.0, 0.0], 1.0)?;
    let lambda = DiscreteMeasure::dirac(&[0.0, 3.0, 0.0], 1.0)?;
    let probes = default_probes(&a, Some(&mu));

    let s = check_symmetry(&setup, &mu, &lambda, &a)?;
    println!("E(mu, lambda^A) = {:.10}  E(mu^A, lambda) = {:.10}", s.lhs, s.rhs);
    let r = check_restriction(&setup, &mu, &a, &q, &probes)?;
    println!("restriction gap {:.1e} (relative {:.1e})", r.energy_gap, r.relative_energy_gap);
    let sources = vec![(vec![2.0, 0.0, 0.0], 1.0), (vec![0.0, 0.0, -3.0], 2.0), (vec![0.9, 0.0, 0.0], 0.5)];
    let sp = superpose_diracs(&setup, &sources, &a, &probes)?;
    println!("superposition gap {:.1e}, flagged sources {:?}", sp.energy_gap, sp.flagged_sources);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
