//! Nonnegative quadratic programs min ½wᵀKw − bᵀw subject to w ≥ 0.
//!
//! The solver runs cyclic coordinate descent over ascending indices to find
//! the active set, then polishes with Lawson–Hanson style active-set steps
//! (dense Cholesky on the free block). Convergence is declared only from a
//! fresh recomputation of the KKT residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Coordinate descent sweeps run before the active-set polish.
const CD_SWEEPS: usize = 8;

/// Tolerance and iteration budget shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnqpProblem {
    pub k: DMatrix<f64>,
    pub b: DVector<f64>,
    pub settings: SolverSettings,
}

impl NnqpProblem {
    pub fn new(k: DMatrix<f64>, b: DVector<f64>, settings: SolverSettings) -> Result<Self> {
        let p = NnqpProblem { k, b, settings };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        let n = self.b.len();
        if self.k.nrows() != n || self.k.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.k.nrows().max(self.k.ncols()) });
        }
        if self.k.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("kernel matrix"));
        }
        if self.b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        for i in 0..n {
            for j in 0..i {
                if self.k[(i, j)] != self.k[(j, i)] {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
            if self.k[(i, i)] <= 0.0 {
                return Err(invalid(format!("diagonal entry {i} is not positive")));
            }
        }
        Ok(())
    }
}

/// KKT residuals of a candidate `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// max(0, max_i (b − Kw)_i).
    pub stationarity: f64,
    /// max_i |w_i (Kw − b)_i| / ‖b‖∞.
    pub complementarity: f64,
    /// max(0, −min_i w_i).
    pub primal_negativity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.primal_negativity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnqpSolution {
    pub w: Vec<f64>,
    pub kkt: KktReport,
    pub iterations: usize,
    pub converged: bool,
}

impl NnqpSolution {
    /// The solution, or [`Error::NotConverged`] when the budget ran out.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.kkt.max_residual() })
        }
    }
}

/// Recomputes the KKT residuals of `w` from scratch.
pub fn verify_kkt(k: &DMatrix<f64>, b: &[f64], w: &[f64]) -> Result<KktReport> {
    let n = b.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k.nrows() });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    let g = k * DVector::from_column_slice(w) - DVector::from_column_slice(b);
    Ok(report(&g, b, w))
}

fn report(g: &DVector<f64>, b: &[f64], w: &[f64]) -> KktReport {
    let bmax = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if bmax > 0.0 { bmax } else { 1.0 };
    let mut rep = KktReport { stationarity: 0.0, complementarity: 0.0, primal_negativity: 0.0 };
    for i in 0..b.len() {
        rep.stationarity = rep.stationarity.max(-g[i]);
        rep.complementarity = rep.complementarity.max((w[i] * g[i]).abs() / scale);
        rep.primal_negativity = rep.primal_negativity.max(-w[i]);
    }
    // max(0, -0) may keep the sign bit
    rep.stationarity += 0.0;
    rep.primal_negativity += 0.0;
    rep
}

/// Solves the problem from `w = 0` or from a warm start (clamped to w ≥ 0).
pub fn solve(problem: &NnqpProblem, warm_start: Option<&[f64]>) -> Result<NnqpSolution> {
    problem.validate()?;
    let n = problem.b.len();
    let tol = problem.settings.tol;
    let max_iter = problem.settings.max_iter;
    let k = &problem.k;
    let b = problem.b.as_slice();

    let mut w = match warm_start {
        Some(ws) if ws.len() != n => return Err(Error::DimensionMismatch { expected: n, found: ws.len() }),
        Some(ws) if ws.iter().any(|x| !x.is_finite()) => return Err(Error::NonFinite("warm start")),
        Some(ws) => ws.iter().map(|x| x.max(0.0)).collect(),
        None => vec![0.0; n],
    };
    if n == 0 {
        return Ok(NnqpSolution { w, kkt: report(&DVector::zeros(0), b, &[]), iterations: 0, converged: true });
    }

    let mut iterations = 0;
    let mut g = gradient(k, b, &w);
    let done = |g: &DVector<f64>, w: &[f64]| report(g, b, w).within(tol);

    while iterations < CD_SWEEPS.min(max_iter) && !done(&g, &w) {
        cd_sweep(k, &mut w, &mut g);
        iterations += 1;
        g = gradient(k, b, &w);
    }

    let mut single_adds = false;
    let mut polish_failed = false;
    while iterations < max_iter && !done(&g, &w) {
        iterations += 1;
        if polish_failed {
            cd_sweep(k, &mut w, &mut g);
            g = gradient(k, b, &w);
            continue;
        }
        match active_set_step(k, b, &mut w, &g, tol, single_adds) {
            Step::Progress => {}
            Step::Stalled => single_adds = true,
            Step::Singular => polish_failed = true,
        }
        g = gradient(k, b, &w);
    }

    let kkt = report(&g, b, &w);
    Ok(NnqpSolution { converged: kkt.within(tol), w, kkt, iterations })
}

fn gradient(k: &DMatrix<f64>, b: &[f64], w: &[f64]) -> DVector<f64> {
    k * DVector::from_column_slice(w) - DVector::from_column_slice(b)
}

/// One ascending sweep of exact coordinate minimization with clamping.
fn cd_sweep(k: &DMatrix<f64>, w: &mut [f64], g: &mut DVector<f64>) {
    let n = w.len();
    for i in 0..n {
        let kii = k[(i, i)];
        let next = (w[i] - g[i] / kii).max(0.0);
        let delta = next - w[i];
        if delta != 0.0 {
            w[i] = next;
            g.axpy(delta, &k.column(i), 1.0);
        }
    }
}

enum Step {
    Progress,
    Stalled,
    Singular,
}

/// One Lawson–Hanson iteration: enlarge the free set by the violated
/// constraints, solve on it, and step back to feasibility if needed.
fn active_set_step(k: &DMatrix<f64>, b: &[f64], w: &mut [f64], g: &DVector<f64>, tol: f64, single: bool) -> Step {
    let n = w.len();
    let mut free: Vec<bool> = w.iter().map(|x| *x > 0.0).collect();
    let violators: Vec<usize> = (0..n).filter(|&i| !free[i] && g[i] < -tol).collect();
    if single {
        // most violated constraint, lowest index on ties
        if let Some(&j) = violators.iter().min_by(|&&a, &&c| g[a].total_cmp(&g[c]).then(a.cmp(&c))) {
            free[j] = true;
        }
    } else {
        violators.iter().for_each(|&j| free[j] = true);
    }
    let added: Vec<usize> = if single { Vec::new() } else { violators };

    loop {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if idx.is_empty() {
            w.iter_mut().for_each(|x| *x = 0.0);
            return Step::Progress;
        }
        let z = match solve_block(k, b, &idx) {
            Some(z) => z,
            None => return Step::Singular,
        };
        if z.iter().all(|x| *x > 0.0) {
            w.iter_mut().for_each(|x| *x = 0.0);
            for (a, &i) in idx.iter().enumerate() {
                w[i] = z[a];
            }
            return Step::Progress;
        }
        // step from w toward z until the first coordinate hits zero
        let mut t = f64::INFINITY;
        let mut blocking = usize::MAX;
        for (a, &i) in idx.iter().enumerate() {
            if z[a] <= 0.0 {
                let ti = w[i] / (w[i] - z[a]);
                if ti < t {
                    t = ti;
                    blocking = i;
                }
            }
        }
        if t == 0.0 && !single && added.contains(&blocking) {
            return Step::Stalled;
        }
        for (a, &i) in idx.iter().enumerate() {
            w[i] += t * (z[a] - w[i]);
            if i == blocking || w[i] <= 0.0 {
                w[i] = 0.0;
                free[i] = false;
            }
        }
    }
}

/// Solves K[idx, idx] z = b[idx] by Cholesky with one refinement step.
fn solve_block(k: &DMatrix<f64>, b: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let m = idx.len();
    let sub = DMatrix::from_fn(m, m, |a, c| k[(idx[a], idx[c])]);
    let rhs = DVector::from_fn(m, |a, _| b[idx[a]]);
    let chol = sub.clone().cholesky()?;
    let mut z = chol.solve(&rhs);
    let r = &rhs - &sub * &z;
    z += chol.solve(&r);
    if z.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(z.as_slice().to_vec())
}

/// JSON dump of a problem and its solution for debugging.
pub fn debug_dump(problem: &NnqpProblem, solution: &NnqpSolution) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = problem.k.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde_json::json!({
        "k": rows,
        "b": problem.b.as_slice(),
        "w": solution.w,
        "kkt": solution.kkt,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "settings": problem.settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(k: DMatrix<f64>, b: &[f64]) -> NnqpProblem {
        NnqpProblem::new(k, DVector::from_column_slice(b), SolverSettings::default()).unwrap()
    }

    #[test]
    fn separable_clamp() {
        let sol = solve(&problem(DMatrix::identity(2, 2), &[1.0, -1.0]), None).unwrap();
        assert_eq!(sol.w, vec![1.0, 0.0]);
        assert!(sol.converged);
        let sol = solve(&problem(DMatrix::identity(2, 2), &[2.0, 3.0]), None).unwrap();
        assert_eq!(sol.w, vec![2.0, 3.0]);
    }

    #[test]
    fn zero_is_optimal_for_nonpositive_b() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let rep = verify_kkt(&k, &[-1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(rep, KktReport { stationarity: 0.0, complementarity: 0.0, primal_negativity: 0.0 });
        let sol = solve(&problem(k, &[-1.0, 0.0]), None).unwrap();
        assert_eq!(sol.w, vec![0.0, 0.0]);
    }

    #[test]
    fn complementarity_of_perturbed_optimum() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = [1.0, -1.0];
        let sol = solve(&problem(k.clone(), &b), None).unwrap();
        assert!((sol.w[0] - 0.5).abs() < 1e-15 && sol.w[1] == 0.0);
        let g1 = k[(1, 0)] * sol.w[0] - b[1];
        let rep = verify_kkt(&k, &b, &[sol.w[0], 1e-3]).unwrap();
        let expect = 1e-3 * (g1 + 2e-3);
        assert!((rep.complementarity - expect).abs() < 1e-9, "{} vs {expect}", rep.complementarity);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        assert!(NnqpProblem::new(DMatrix::identity(2, 2), DVector::from_element(3, 1.0), SolverSettings::default()).is_err());
        let mut k = DMatrix::identity(2, 2);
        k[(0, 1)] = f64::NAN;
        assert!(matches!(
            NnqpProblem::new(k, DVector::from_element(2, 1.0), SolverSettings::default()),
            Err(Error::NonFinite(_))
        ));
        assert!(verify_kkt(&DMatrix::identity(2, 2), &[1.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn warm_start_does_not_change_answer() {
        let n = 40;
        let k = DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { 1.0 } else { 0.0 });
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 5.0) / 3.0).collect();
        let p = problem(k, &b);
        let cold = solve(&p, None).unwrap();
        let warm = solve(&p, Some(&vec![3.0; n])).unwrap();
        assert!(cold.converged && warm.converged);
        for (a, c) in cold.w.iter().zip(&warm.w) {
            assert!((a - c).abs() <= 10.0 * DEFAULT_TOL);
        }
        // energy identity wᵀKw = bᵀw
        let wv = DVector::from_vec(cold.w.clone());
        let quad = wv.dot(&(&p.k * &wv));
        let lin = wv.dot(&p.b);
        assert!((quad - lin).abs() <= 1e-10 * lin.abs());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let n = 30;
        let k = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.9 });
        let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
        let p = NnqpProblem::new(k, DVector::from_vec(b), SolverSettings { tol: 1e-14, max_iter: 1 }).unwrap();
        let sol = solve(&p, None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(sol.w.iter().all(|x| *x >= 0.0));
        assert!(matches!(sol.require_converged(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn debug_dump_has_all_fields() {
        let p = problem(DMatrix::identity(2, 2), &[1.0, 2.0]);
        let s = solve(&p, None).unwrap();
        let v = debug_dump(&p, &s);
        for key in ["k", "b", "w", "kkt", "iterations", "converged", "settings"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
