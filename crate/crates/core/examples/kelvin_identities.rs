// Kelvin transform of a random atomic measure: involution, mass, potential
// and energy identities, then the Dirac balayage duality on a sphere.

use std::sync::Arc;

use riesz_balayage::balayage::default_probes;
use riesz_balayage::geometry::sample_sphere_frequency;
use riesz_balayage::kelvin::{
    check_involution, check_kelvin_energy, check_kelvin_mass, check_kelvin_potential, dirac_balayage_duality, random_measure,
    KelvinContext,
};
use riesz_balayage::{RieszParams, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let y = vec![0.2, -0.1, 0.3];
    let ctx = KelvinContext::new(y.clone(), RieszParams::new(3, 1.5)?)?;
    let nu = random_measure(&y, 100, 0.5, 3.0, 1)?;
    let mu = random_measure(&y, 100, 0.5, 3.0, 2)?;
    let probes = vec![vec![1.0, 2.0, 0.5], vec![-3.0, 0.1, 0.0]];
    println!("involution {:.1e}", check_involution(&ctx, &nu)?);
    println!("mass       {:.1e}", check_kelvin_mass(&ctx, &nu)?);
    println!("potential  {:.1e}", check_kelvin_potential(&ctx, &nu, &probes)?);
    println!("energy     {:.1e}", check_kelvin_energy(&ctx, &mu, &nu)?);

    let setup = Setup::newtonian();
    let target = Arc::new(sample_sphere_frequency(&[0.0; 3], 1.0, 7)?);
    let d = dirac_balayage_duality(&setup, &[2.0, 0.0, 0.0], &target, &default_probes(&target, None))?;
    println!("duality: direct mass {:.5}, kelvin mass {:.5}, probe gap {:.2e}", d.direct_mass, d.kelvin_mass, d.potential_gap);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
