// Where the equilibrium measure of a solid ball lives: on the boundary for
// α = 2, spread through the interior for α < 2.

use std::sync::Arc;

use riesz_balayage::equilibrium::support_profile;
use riesz_balayage::geometry::sample_ball_frequency;
use riesz_balayage::Setup;

pub fn run() -> riesz_balayage::Result<()> {
    let ball = Arc::new(sample_ball_frequency(&[0.0; 3], 1.0, 4)?);
    println!("{} nodes", ball.len());
    for alpha in [2.0, 1.5, 1.0] {
        let p = support_profile(&Setup::riesz(3, alpha)?, &ball, &[])?;
        println!("alpha = {alpha}: interior mass {:.1}%, capacity {:.4}", 100.0 * p.interior_mass_fraction, p.capacity);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
