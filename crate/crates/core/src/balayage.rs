//! Inner balayage onto node sets as a projection in the energy metric, plus
//! numerical checks of the identities balayage satisfies.
//!
//! Sweeping μ onto a target cloud solves the NNQP with the target's kernel
//! matrix and `b_i = U^μ(x_i)`. At target nodes the swept potential matches
//! U^μ wherever the swept weight is positive and dominates it elsewhere;
//! away from the target the domination U^{μ^A} ≤ U^μ is only measured.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{fibonacci_sphere, Point, PointCloud};
use crate::kernel::{energy_distance, eval_potential, kernel_matrix, mutual_energy, potential_on_cloud, DiscreteMeasure};
use crate::nnqp::{solve, KktReport, NnqpProblem};
use crate::Setup;

/// Outcome of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BalayageResult {
    pub swept: DiscreteMeasure,
    pub source_mass: f64,
    pub swept_mass: f64,
    /// max over target nodes of max(0, U^μ − U^{μ^A}).
    pub potential_match: f64,
    /// max over probes of max(0, U^{μ^A} − U^μ)/U^μ.
    pub domination_excess: f64,
    /// ‖b‖∞, the scale of the node potentials.
    pub b_norm: f64,
    pub probes: Vec<ProbeValue>,
    pub kkt: KktReport,
    pub iterations: usize,
}

/// Source and swept potentials at one probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub source: f64,
    pub swept: f64,
    /// The probe sits on a source atom and is left out of the excess.
    pub on_source: bool,
}

impl BalayageResult {
    pub fn probe_swept(&self) -> Vec<f64> {
        self.probes.iter().map(|p| p.swept).collect()
    }

    /// 1 − swept mass / source mass.
    pub fn deficit_ratio(&self) -> f64 {
        1.0 - self.swept_mass / self.source_mass
    }
}

/// A target cloud with its assembled kernel matrix, reusable across sweeps.
#[derive(Debug, Clone)]
pub struct Sweeper {
    setup: Setup,
    target: Arc<PointCloud>,
    k: DMatrix<f64>,
}

impl Sweeper {
    pub fn new(setup: &Setup, target: &Arc<PointCloud>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::Empty("target"));
        }
        let k = kernel_matrix(&setup.model, target)?;
        Ok(Sweeper { setup: *setup, target: target.clone(), k })
    }

    pub fn target(&self) -> &Arc<PointCloud> {
        &self.target
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Sweeps `mu` onto the target and evaluates the diagnostics at `probes`.
    pub fn sweep(&self, mu: &DiscreteMeasure, probes: &[Point]) -> Result<BalayageResult> {
        let model = &self.setup.model;
        let b = potential_on_cloud(model, mu, &self.target)?;
        let problem = NnqpProblem::new(self.k.clone(), DVector::from_vec(b.clone()), self.setup.solver)?;
        let sol = solve(&problem, None)?.require_converged()?;
        let kw = &self.k * DVector::from_column_slice(&sol.w);
        let potential_match = b.iter().zip(kw.iter()).fold(0.0f64, |m, (bi, ui)| m.max(bi - ui));
        let b_norm = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let swept = DiscreteMeasure::new(self.target.clone(), sol.w)?;

        let src = eval_potential(model, mu, probes)?;
        let swp = eval_potential(model, &swept, probes)?;
        let on_source: Vec<bool> = probes
            .iter()
            .map(|p| mu.atoms().any(|(x, w)| w > 0.0 && x == p.as_slice()))
            .collect();
        let probes: Vec<ProbeValue> = (0..probes.len())
            .map(|i| ProbeValue { source: src[i], swept: swp[i], on_source: on_source[i] })
            .collect();
        let domination_excess = probes
            .iter()
            .filter(|p| !p.on_source && p.source > 0.0)
            .fold(0.0f64, |m, p| m.max((p.swept - p.source) / p.source));

        Ok(BalayageResult {
            source_mass: mu.total_mass(),
            swept_mass: swept.total_mass(),
            swept,
            potential_match,
            domination_excess,
            b_norm,
            probes,
            kkt: sol.kkt,
            iterations: sol.iterations,
        })
    }
}

/// Inner balayage of `mu` onto `target`.
pub fn sweep(setup: &Setup, mu: &DiscreteMeasure, target: &Arc<PointCloud>, probes: &[Point]) -> Result<BalayageResult> {
    Sweeper::new(setup, target)?.sweep(mu, probes)
}

/// Default probe set: 10 points on each of the spheres of radius R/2 and 3R/2
/// about the target centroid (R = target radius about it), plus the source
/// atoms. Sphere points within two local node spacings of the target are
/// dropped, so the set stays off-target for every finer level when built
/// from the coarsest one.
pub fn default_probes(target: &PointCloud, mu: Option<&DiscreteMeasure>) -> Vec<Point> {
    let c = target.centroid();
    let r = target.radius_about(&c);
    let r = if r > 0.0 { r } else { 1.0 };
    let mut probes = fibonacci_sphere(&c, 0.5 * r, 10);
    probes.extend(fibonacci_sphere(&c, 1.5 * r, 10));
    probes.retain(|p| (0..target.len()).all(|i| crate::geometry::dist(p, target.point(i)) > 2.0 * target.spacing()[i]));
    if let Some(mu) = mu {
        probes.extend(mu.atoms().filter(|a| a.1 > 0.0).map(|(x, _)| x.to_vec()));
    }
    probes
}

/// Sweeps along an increasing family of nested targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSweep {
    pub levels: Vec<BalayageResult>,
    /// ‖μ − μ^{K_j}‖ per level.
    pub distances: Vec<f64>,
    /// Largest increase of the distance between consecutive levels.
    pub max_distance_increase: f64,
    /// Largest decrease of a probe potential between consecutive levels.
    pub max_potential_decrease: f64,
}

fn check_nested(inner: &PointCloud, outer: &PointCloud, i: usize, j: usize) -> Result<()> {
    inner.embed_in(outer).map(|_| ()).map_err(|_| Error::NotNested(i, j))
}

/// Balayage onto increasing node sets K_1 ⊆ K_2 ⊆ …. The distance
/// ‖μ − μ^{K_j}‖ cannot grow and the swept potentials cannot drop; the
/// report records the worst observed violation of each.
pub fn sweep_increasing(setup: &Setup, mu: &DiscreteMeasure, ladder: &[Arc<PointCloud>], probes: &[Point]) -> Result<MonotoneSweep> {
    if ladder.is_empty() {
        return Err(Error::Empty("target family"));
    }
    for j in 1..ladder.len() {
        check_nested(&ladder[j - 1], &ladder[j], j - 1, j)?;
    }
    let levels = ladder.iter().map(|t| sweep(setup, mu, t, probes)).collect::<Result<Vec<_>>>()?;
    let distances = levels
        .iter()
        .map(|r| energy_distance(&setup.model, mu, &r.swept))
        .collect::<Result<Vec<_>>>()?;
    let max_distance_increase = distances.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    let max_potential_decrease = levels.windows(2).fold(0.0f64, |m, w| {
        w[0].probes.iter().zip(&w[1].probes).fold(m, |m, (a, b)| m.max(a.swept - b.swept))
    });
    Ok(MonotoneSweep { levels, distances, max_distance_increase, max_potential_decrease })
}

/// Sweeps along a decreasing family and the sweep onto its intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreasingSweep {
    pub levels: Vec<BalayageResult>,
    pub intersection: BalayageResult,
    /// ‖μ^{K_last} − μ^{∩K}‖.
    pub final_gap: f64,
}

/// Balayage onto decreasing node sets K_1 ⊇ K_2 ⊇ …, compared with the
/// direct sweep onto the intersection.
pub fn sweep_decreasing(setup: &Setup, mu: &DiscreteMeasure, family: &[Arc<PointCloud>], probes: &[Point]) -> Result<DecreasingSweep> {
    if family.is_empty() {
        return Err(Error::Empty("target family"));
    }
    for j in 1..family.len() {
        check_nested(&family[j], &family[j - 1], j, j - 1)?;
    }
    let first = &family[0];
    let keep: Vec<usize> = (0..first.len())
        .filter(|&i| family[1..].iter().all(|c| c.find(first.point(i)).is_some()))
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty("intersection of the target family"));
    }
    let meet = Arc::new(first.subset(&keep, format!("{}/intersection", first.label())));
    let levels = family.iter().map(|t| sweep(setup, mu, t, probes)).collect::<Result<Vec<_>>>()?;
    let intersection = sweep(setup, mu, &meet, probes)?;
    let final_gap = energy_distance(&setup.model, &levels[levels.len() - 1].swept, &intersection.swept)?;
    Ok(DecreasingSweep { levels, intersection, final_gap })
}

/// Comparison of μ^Q with (μ^A)^Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictionReport {
    /// ‖μ^Q − (μ^A)^Q‖.
    pub energy_gap: f64,
    /// energy_gap / ‖μ^Q‖.
    pub relative_energy_gap: f64,
    /// Largest relative difference of the two potentials at the probes.
    pub potential_gap: f64,
}

/// Checks μ^Q = (μ^A)^Q for Q ⊆ A.
pub fn check_restriction(
    setup: &Setup,
    mu: &DiscreteMeasure,
    a: &Arc<PointCloud>,
    q: &Arc<PointCloud>,
    probes: &[Point],
) -> Result<RestrictionReport> {
    q.embed_in(a).map_err(Error::NotSubset)?;
    let on_q = Sweeper::new(setup, q)?;
    let direct = on_q.sweep(mu, probes)?;
    let via_a = sweep(setup, mu, a, probes)?;
    let twice = on_q.sweep(&via_a.swept, probes)?;
    let energy_gap = energy_distance(&setup.model, &direct.swept, &twice.swept)?;
    let norm = mutual_energy(&setup.model, &direct.swept, &direct.swept)?.max(0.0).sqrt();
    Ok(RestrictionReport {
        energy_gap,
        relative_energy_gap: if norm > 0.0 { energy_gap / norm } else { energy_gap },
        potential_gap: relative_gap(&direct.probe_swept(), &twice.probe_swept()),
    })
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| {
        let scale = x.abs().max(y.abs());
        if scale == 0.0 {
            m
        } else {
            m.max((x - y).abs() / scale)
        }
    })
}

/// Both sides of E(μ, λ^A) = E(μ^A, λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Relative gap |E(μ, λ^A) − E(μ^A, λ)| / max(|E(μ, λ^A)|, |E(μ^A, λ)|).
pub fn check_symmetry(setup: &Setup, mu: &DiscreteMeasure, lambda: &DiscreteMeasure, target: &Arc<PointCloud>) -> Result<SymmetryReport> {
    let sweeper = Sweeper::new(setup, target)?;
    let mu_a = sweeper.sweep(mu, &[])?.swept;
    let lambda_a = sweeper.sweep(lambda, &[])?.swept;
    let lhs = mutual_energy(&setup.model, mu, &lambda_a)?;
    let rhs = mutual_energy(&setup.model, &mu_a, lambda)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(SymmetryReport { lhs, rhs, gap: if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 } })
}

/// Extremal property check against a feasible candidate ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    /// max over probes of max(0, U^{μ^A} − U^ξ).
    pub max_violation: f64,
    /// max over probes of max(0, U^{μ^A} − U^ξ) / U^ξ.
    pub relative_violation: f64,
    /// Smallest margin U^ξ − U^μ over target nodes (≥ −tol·scale).
    pub min_margin: f64,
}

/// Checks U^{μ^A} ≤ U^ξ at the probes for a candidate ξ with U^ξ ≥ U^μ at
/// every target node.
pub fn check_extremal(
    setup: &Setup,
    mu: &DiscreteMeasure,
    target: &Arc<PointCloud>,
    xi: &DiscreteMeasure,
    probes: &[Point],
) -> Result<ExtremalReport> {
    let model = &setup.model;
    let b = potential_on_cloud(model, mu, target)?;
    let u_xi = potential_on_cloud(model, xi, target)?;
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut min_margin = f64::INFINITY;
    for (node, (ux, bi)) in u_xi.iter().zip(&b).enumerate() {
        let margin = ux - bi;
        if margin < -setup.tol() * scale {
            return Err(Error::InfeasibleCandidate { node, deficit: -margin });
        }
        min_margin = min_margin.min(margin);
    }
    let res = sweep(setup, mu, target, probes)?;
    let xi_p = eval_potential(model, xi, probes)?;
    let (mut abs, mut rel) = (0.0f64, 0.0f64);
    for (p, ux) in res.probes.iter().zip(&xi_p) {
        let v = (p.swept - ux).max(0.0);
        abs = abs.max(v);
        if *ux > 0.0 {
            rel = rel.max(v / ux);
        }
    }
    Ok(ExtremalReport { max_violation: abs, relative_violation: rel, min_margin })
}

/// Direct sweep of Σ c_i ε_{y_i} against the superposition Σ c_i ε_{y_i}^A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionReport {
    /// ‖μ^A − Σ c_i ε_{y_i}^A‖ / ‖μ^A‖.
    pub energy_gap: f64,
    /// Largest relative difference of the two potentials at the probes.
    pub potential_gap: f64,
    pub direct_mass: f64,
    pub superposed_mass: f64,
    /// Sources within one node spacing of the target, outside the
    /// hypothesis of the integral representation.
    pub flagged_sources: Vec<usize>,
}

/// Merges coincident sources into one Dirac measure.
pub fn merge_sources(sources: &[(Point, f64)]) -> Result<DiscreteMeasure> {
    let mut merged: Vec<(Point, f64)> = Vec::new();
    for (p, w) in sources {
        if *w < 0.0 || !w.is_finite() {
            return Err(invalid(format!("source weight {w} must be nonnegative")));
        }
        match merged.iter_mut().find(|(q, _)| q == p) {
            Some(slot) => slot.1 += w,
            None => merged.push((p.clone(), *w)),
        }
    }
    if merged.is_empty() {
        return Err(Error::Empty("source list"));
    }
    DiscreteMeasure::diracs(&merged)
}

/// Checks the integral representation μ^A = ∫ ε_y^A dμ(y) for a finite sum
/// of Diracs.
pub fn superpose_diracs(setup: &Setup, sources: &[(Point, f64)], target: &Arc<PointCloud>, probes: &[Point]) -> Result<SuperpositionReport> {
    let sweeper = Sweeper::new(setup, target)?;
    let mu = merge_sources(sources)?;
    let direct = sweeper.sweep(&mu, probes)?;
    let mut sum = vec![0.0; target.len()];
    let mut flagged_sources = Vec::new();
    for (i, (p, c)) in sources.iter().enumerate() {
        let nearest = (0..target.len())
            .map(|j| (crate::geometry::dist(p, target.point(j)), j))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("target is nonempty");
        if nearest.0 <= target.spacing()[nearest.1] {
            flagged_sources.push(i);
        }
        let single = sweeper.sweep(&DiscreteMeasure::dirac(p, 1.0)?, &[])?;
        for (s, w) in sum.iter_mut().zip(single.swept.weights()) {
            *s += c * w;
        }
    }
    let superposed = DiscreteMeasure::new(target.clone(), sum)?;
    let gap = energy_distance(&setup.model, &direct.swept, &superposed)?;
    let norm = mutual_energy(&setup.model, &direct.swept, &direct.swept)?.max(0.0).sqrt();
    let sup_p = eval_potential(&setup.model, &superposed, probes)?;
    Ok(SuperpositionReport {
        energy_gap: if norm > 0.0 { gap / norm } else { gap },
        potential_gap: relative_gap(&direct.probe_swept(), &sup_p),
        direct_mass: direct.swept_mass,
        superposed_mass: superposed.total_mass(),
        flagged_sources,
    })
}

/// Source mass, swept mass and 1 − swept/source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassDeficit {
    pub source_mass: f64,
    pub swept_mass: f64,
    pub deficit_ratio: f64,
}

pub fn mass_deficit(setup: &Setup, mu: &DiscreteMeasure, target: &Arc<PointCloud>) -> Result<MassDeficit> {
    let source_mass = mu.total_mass();
    if source_mass <= 0.0 {
        return Err(invalid("source measure has zero mass"));
    }
    let res = sweep(setup, mu, target, &[])?;
    Ok(MassDeficit { source_mass, swept_mass: res.swept_mass, deficit_ratio: res.deficit_ratio() })
}
