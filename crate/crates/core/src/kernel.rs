//! Riesz kernel |x − y|^(α−n), its diagonal regularization, potentials,
//! energies and dense kernel matrices.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, Point, PointCloud};

/// Default diagonal scaling factor.
pub const DEFAULT_BETA: f64 = 0.5;

/// Dimension and order of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszParams {
    pub n: usize,
    pub alpha: f64,
}

impl RieszParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let p = RieszParams { n, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn newtonian() -> Self {
        RieszParams { n: 3, alpha: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(invalid(format!("n = {} but the kernel needs n >= 3", self.n)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(invalid(format!("alpha = {} outside (0, 2]", self.alpha)));
        }
        Ok(())
    }

    /// The exponent α − n (always ≤ −1).
    pub fn exponent(&self) -> f64 {
        self.alpha - self.n as f64
    }
}

/// How K(x, x) is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DiagRule {
    /// The diagonal is infinite; asking for it is an error.
    Unregularized,
    /// K_ii = (β h_i)^(α−n).
    SpacingScaled { beta: f64 },
}

/// Kernel with a diagonal rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub params: RieszParams,
    pub diag_rule: DiagRule,
}

impl KernelModel {
    pub fn new(params: RieszParams, beta: f64) -> Result<Self> {
        params.validate()?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta = {beta} must be positive")));
        }
        Ok(KernelModel { params, diag_rule: DiagRule::SpacingScaled { beta } })
    }

    pub fn unregularized(params: RieszParams) -> Result<Self> {
        params.validate()?;
        Ok(KernelModel { params, diag_rule: DiagRule::Unregularized })
    }

    /// Newtonian kernel in R^3 with β = 0.5.
    pub fn newtonian() -> Self {
        KernelModel { params: RieszParams::newtonian(), diag_rule: DiagRule::SpacingScaled { beta: DEFAULT_BETA } }
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn exponent(&self) -> f64 {
        self.params.exponent()
    }

    pub fn is_regularized(&self) -> bool {
        matches!(self.diag_rule, DiagRule::SpacingScaled { .. })
    }

    /// Off-diagonal kernel value at distance `r > 0`.
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        let e = self.exponent();
        if e == -1.0 {
            1.0 / r
        } else {
            r.powf(e)
        }
    }

    /// Kernel between two points; distinct points only.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_distance(dist(x, y))
    }

    /// Regularized self-interaction of a node with spacing `h`. Axis nodes
    /// that stand in for a thin tube of radius `a = exp(log_radius)` get the
    /// larger of the plain rule and the mean potential of a length-`h`
    /// segment of that tube at its own axis.
    pub fn diagonal(&self, h: f64, tube_log_radius: Option<f64>) -> Result<f64> {
        let beta = match self.diag_rule {
            DiagRule::Unregularized => return Err(Error::Unregularized),
            DiagRule::SpacingScaled { beta } => beta,
        };
        let plain = self.at_distance(beta * h);
        Ok(match tube_log_radius {
            Some(la) => plain.max(segment_self_potential(self.exponent(), h, la)),
            None => plain,
        })
    }

    /// Diagonal entry of node `i` of `cloud`.
    pub fn node_diagonal(&self, cloud: &PointCloud, i: usize) -> Result<f64> {
        self.diagonal(cloud.spacing()[i], cloud.tube_log_radius()[i])
    }

    /// Kernel entry between node `i` of `a` and node `j` of `b`; coincident
    /// nodes use the diagonal rule with the spacing of `a`.
    fn entry_between(&self, a: &PointCloud, i: usize, b: &PointCloud, j: usize) -> Result<f64> {
        let r = dist(a.point(i), b.point(j));
        if r > 0.0 {
            Ok(self.at_distance(r))
        } else {
            self.node_diagonal(a, i)
        }
    }
}

/// Mean over a segment of length `h` of |·|^e against a thin tube of radius
/// `a` around it: (1/h)∫_{-h/2}^{h/2} (a² + t²)^(e/2) dt.
fn segment_self_potential(e: f64, h: f64, log_a: f64) -> f64 {
    // U = asinh(h / 2a), computed without forming a when a underflows
    let lz = (0.5 * h).ln() - log_a;
    let big_u = if lz > 20.0 { lz + std::f64::consts::LN_2 } else { lz.exp().asinh() };
    let p = e + 1.0;
    if p == 0.0 {
        return 2.0 / h * big_u;
    }
    // (2/h) a^(e+1) ∫_0^U cosh^(e+1) u du; the integrand decays like e^(p u)
    let upper = big_u.min(45.0 / -p);
    let m = 4000;
    let du = upper / m as f64;
    let f = |u: f64| u.cosh().powf(p);
    let mut s = f(0.0) + f(upper);
    for k in 1..m {
        s += f(k as f64 * du) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * du / 3.0;
    2.0 / h * (p * log_a).exp() * integral
}

/// Nonnegative atomic measure carried by a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteMeasure {
    cloud: Arc<PointCloud>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(cloud: Arc<PointCloud>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::DimensionMismatch { expected: cloud.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("measure weights"));
        }
        if let Some(i) = weights.iter().position(|w| *w < 0.0) {
            return Err(invalid(format!("weight {} at node {i} is negative", weights[i])));
        }
        Ok(DiscreteMeasure { cloud, weights })
    }

    pub fn zero(cloud: Arc<PointCloud>) -> Self {
        let weights = vec![0.0; cloud.len()];
        DiscreteMeasure { cloud, weights }
    }

    /// Dirac mass `weight·ε_x` on a one-node cloud of unit spacing.
    pub fn dirac(x: &[f64], weight: f64) -> Result<Self> {
        let cloud = PointCloud::from_point_list(&[x.to_vec()], "dirac")?;
        Self::new(Arc::new(cloud), vec![weight])
    }

    /// Sum of Diracs at distinct points.
    pub fn diracs(atoms: &[(Point, f64)]) -> Result<Self> {
        let points: Vec<Point> = atoms.iter().map(|(p, _)| p.clone()).collect();
        let cloud = PointCloud::from_point_list(&points, "diracs")?;
        Self::new(Arc::new(cloud), atoms.iter().map(|a| a.1).collect())
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn cloud_arc(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of nodes with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.cloud.clone(), self.weights.iter().map(|w| w * factor).collect())
    }

    /// Atoms as `(point, weight)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.cloud.points().zip(self.weights.iter().copied())
    }

    /// Weights of `self + other` when both live on the same cloud.
    pub fn add(&self, other: &DiscreteMeasure) -> Result<Self> {
        if self.cloud != other.cloud {
            return Err(invalid("measures live on different clouds"));
        }
        Self::new(self.cloud.clone(), self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect())
    }

    /// The same measure seen as a measure on `target`, which must contain
    /// every support atom as a node.
    pub fn transfer_to(&self, target: &Arc<PointCloud>) -> Result<Self> {
        let mut w = vec![0.0; target.len()];
        for i in self.support() {
            let j = target.find(self.cloud.point(i)).ok_or(Error::NotSubset(i))?;
            w[j] += self.weights[i];
        }
        Self::new(target.clone(), w)
    }
}

/// Energy of a measure and its norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub norm: f64,
}

/// U^μ(p) at each probe, U^μ(p) = Σ_i w_i K(p, x_i).
///
/// A probe on an atom picks up that atom's regularized self-term; under the
/// unregularized rule this is an error when the atom has positive weight.
pub fn eval_potential(model: &KernelModel, mu: &DiscreteMeasure, probes: &[Point]) -> Result<Vec<f64>> {
    check_measure_dim(model, mu)?;
    for p in probes {
        if p.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: p.len() });
        }
    }
    let cloud = mu.cloud();
    probes
        .par_iter()
        .enumerate()
        .map(|(pi, p)| {
            let mut s = 0.0;
            for (i, (x, w)) in mu.atoms().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let r = dist(p, x);
                let k = if r > 0.0 {
                    model.at_distance(r)
                } else {
                    match model.node_diagonal(cloud, i) {
                        Ok(d) => d,
                        Err(Error::Unregularized) => return Err(Error::ProbeOnAtom { probe: pi, atom: i }),
                        Err(e) => return Err(e),
                    }
                };
                s += w * k;
            }
            Ok(s)
        })
        .collect()
}

/// U^μ at the nodes of `target`. Atoms of μ sitting on a target node use the
/// target's spacing for their self-term.
pub fn potential_on_cloud(model: &KernelModel, mu: &DiscreteMeasure, target: &PointCloud) -> Result<Vec<f64>> {
    check_measure_dim(model, mu)?;
    if target.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: target.dim() });
    }
    let src = mu.cloud();
    let support = mu.support();
    (0..target.len())
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for &i in &support {
                s += mu.weights()[i] * model.entry_between(target, j, src, i)?;
            }
            Ok(s)
        })
        .collect()
}

fn check_measure_dim(model: &KernelModel, mu: &DiscreteMeasure) -> Result<()> {
    if mu.cloud().dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: mu.cloud().dim() });
    }
    Ok(())
}

fn merge_tube(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    }
}

fn canonical_order(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Ordering {
    let key = |m: &DiscreteMeasure| (m.weights.len(), m.cloud.coords().len());
    key(a).cmp(&key(b)).then_with(|| {
        let bits = |m: &DiscreteMeasure| {
            m.cloud
                .coords()
                .iter()
                .chain(&m.weights)
                .chain(m.cloud.spacing())
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        bits(a).cmp(&bits(b))
    })
}

/// E(μ, ν) = Σ_i Σ_j w_i v_j K(x_i, y_j).
///
/// The summation order depends only on the unordered pair {μ, ν}, so
/// E(μ, ν) and E(ν, μ) agree bit for bit. Coincident atoms use the smaller
/// of the two spacings; under the unregularized rule they are an error.
pub fn mutual_energy(model: &KernelModel, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_measure_dim(model, mu)?;
    check_measure_dim(model, nu)?;
    let (a, b) = if canonical_order(mu, nu) == Ordering::Greater { (nu, mu) } else { (mu, nu) };
    let (ca, cb) = (a.cloud(), b.cloud());
    let sb = b.support();
    let rows: Vec<f64> = a
        .support()
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for &j in &sb {
                let r = dist(ca.point(i), cb.point(j));
                let k = if r > 0.0 {
                    model.at_distance(r)
                } else {
                    let h = ca.spacing()[i].min(cb.spacing()[j]);
                    let tube = merge_tube(ca.tube_log_radius()[i], cb.tube_log_radius()[j]);
                    model.diagonal(h, tube).map_err(|e| match e {
                        Error::Unregularized => Error::OverlappingSupports,
                        e => e,
                    })?
                };
                s += b.weights[j] * k;
            }
            Ok(a.weights[i] * s)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum())
}

pub fn energy(model: &KernelModel, mu: &DiscreteMeasure) -> Result<EnergyReport> {
    let e = mutual_energy(model, mu, mu)?;
    Ok(EnergyReport { energy: e, norm: e.max(0.0).sqrt() })
}

/// ‖μ − ν‖ in the energy norm, evaluated as the energy of the signed
/// difference so that nearly equal measures do not lose precision to
/// cancellation. Coincident atoms are merged and keep the smaller spacing.
pub fn energy_distance(model: &KernelModel, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_measure_dim(model, mu)?;
    check_measure_dim(model, nu)?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points: Vec<&[f64]> = Vec::new();
    let mut diff: Vec<f64> = Vec::new();
    let mut diag: Vec<(f64, Option<f64>)> = Vec::new();
    for (m, sign) in [(mu, 1.0), (nu, -1.0)] {
        let c = m.cloud();
        for i in m.support() {
            let key: Vec<u64> = c.point(i).iter().map(|x| x.to_bits()).collect();
            let (h, tube) = (c.spacing()[i], c.tube_log_radius()[i]);
            match index.get(&key) {
                Some(&a) => {
                    diff[a] += sign * m.weights[i];
                    diag[a].0 = diag[a].0.min(h);
                    diag[a].1 = merge_tube(diag[a].1, tube);
                }
                None => {
                    index.insert(key, points.len());
                    points.push(c.point(i));
                    diff.push(sign * m.weights[i]);
                    diag.push((h, tube));
                }
            }
        }
    }
    let rows: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|a| {
            let mut s = 0.0;
            for c in 0..points.len() {
                let k = if a == c {
                    model.diagonal(diag[a].0, diag[a].1)?
                } else {
                    model.eval(points[a], points[c])
                };
                s += diff[c] * k;
            }
            Ok(diff[a] * s)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum::<f64>().max(0.0).sqrt())
}

/// Dense kernel matrix of a cloud under the spacing-scaled rule.
pub fn kernel_matrix(model: &KernelModel, cloud: &PointCloud) -> Result<DMatrix<f64>> {
    if !model.is_regularized() {
        return Err(Error::Unregularized);
    }
    if cloud.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: cloud.dim() });
    }
    let n = cloud.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|i| {
                    if i == j {
                        return model.node_diagonal(cloud, i);
                    }
                    let r = dist(cloud.point(i), cloud.point(j));
                    if r == 0.0 {
                        return Err(Error::DuplicateNodes(i.min(j), i.max(j)));
                    }
                    Ok(model.at_distance(r))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Outcome of the positive-definiteness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessReport {
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

/// Matrices up to this size get a full symmetric eigendecomposition.
const EXACT_SPECTRUM_MAX: usize = 1200;

/// Estimates the smallest eigenvalue of a symmetric matrix. Small matrices
/// get the full spectrum. Larger ones are factored by Cholesky (failure
/// means not positive definite) and the estimate comes from inverse
/// iteration, an upper bound on the true value.
pub fn definiteness(k: &DMatrix<f64>) -> DefinitenessReport {
    let n = k.nrows();
    if n == 0 {
        return DefinitenessReport { min_eigenvalue: f64::INFINITY, positive_definite: true };
    }
    let exact = || {
        let min = SymmetricEigen::new(k.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        DefinitenessReport { min_eigenvalue: min, positive_definite: min > 0.0 }
    };
    if n <= EXACT_SPECTRUM_MAX {
        return exact();
    }
    let Some(chol) = k.clone().cholesky() else {
        return exact();
    };
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    v.normalize_mut();
    let mut lambda = f64::INFINITY;
    for _ in 0..200 {
        let mut u = chol.solve(&v);
        let norm = u.norm();
        u /= norm;
        let next = 1.0 / norm;
        let done = (next - lambda).abs() <= 1e-12 * next;
        lambda = next;
        v = u;
        if done {
            break;
        }
    }
    let rq = v.dot(&(k * &v));
    let min = rq.min(lambda);
    DefinitenessReport { min_eigenvalue: min, positive_definite: min > 0.0 }
}
