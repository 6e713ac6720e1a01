// Newtonian capacity of the unit sphere along a refinement ladder.

use riesz_balayage::equilibrium::capacity_ladder;
use riesz_balayage::{RefinementLadder, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let ladder = RefinementLadder::sphere(&[0.0; 3], 1.0, &[4, 7, 11])?;
    let res = capacity_ladder(&setup, &ladder, &[])?;
    for ((n, h), c) in res.node_counts.iter().zip(&res.max_spacing).zip(&res.capacities) {
        println!("N = {n:5}  h = {h:.4}  capacity = {c:.6}");
    }
    println!("extrapolated {:.5} (exact 1)", res.extrapolated);
    assert!((res.extrapolated - 1.0).abs() < 0.02);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
