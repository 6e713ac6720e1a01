// Solve a small nonnegative quadratic program and inspect its KKT residuals.

use nalgebra::{DMatrix, DVector};
use riesz_balayage::nnqp::{solve, verify_kkt, NnqpProblem, SolverSettings};

pub fn run() -> riesz_balayage::Result<()> {
    let k = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
    let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let problem = NnqpProblem::new(k.clone(), b.clone(), SolverSettings::default())?;
    let sol = solve(&problem, None)?.require_converged()?;
    let kkt = verify_kkt(&k, b.as_slice(), &sol.w)?;
    println!("w = {:?}", sol.w);
    println!("stationarity {:.1e}, complementarity {:.1e}, negativity {:.1e}", kkt.stationarity, kkt.complementarity, kkt.primal_negativity);
    assert_eq!(sol.w[1], 0.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
