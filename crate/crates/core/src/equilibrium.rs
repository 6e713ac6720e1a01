//! Equilibrium measures and capacities of node clouds.
//!
//! The equilibrium measure solves the NNQP with `b = 1`: its potential is 1
//! on its support and at least 1 at every other node, and its mass, energy
//! and the capacity coincide.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{nearest_neighbors, NodeTag, Point, PointCloud, RefinementLadder};
use crate::kernel::{eval_potential, kernel_matrix, DiscreteMeasure};
use crate::nnqp::{solve, KktReport, NnqpProblem};
use crate::Setup;

/// Range of U^γ over nodes and probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialStats {
    /// Smallest potential over support nodes.
    pub min_support: f64,
    /// Largest potential over support nodes.
    pub max_support: f64,
    /// Smallest and largest over all nodes.
    pub min_node: f64,
    pub max_node: f64,
    /// Largest potential over the probes (0 without probes).
    pub max_probe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub gamma: DiscreteMeasure,
    pub capacity: f64,
    pub energy: f64,
    pub potential_stats: PotentialStats,
    /// Node potentials (Kw).
    pub node_potentials: Vec<f64>,
    pub probe_potentials: Vec<f64>,
    /// Mass on interior-tagged nodes over total mass, when the cloud has
    /// interior or boundary tags.
    pub interior_mass_fraction: Option<f64>,
    pub kkt: KktReport,
    pub iterations: usize,
}

/// Equilibrium measure of `cloud`.
pub fn equilibrium(setup: &Setup, cloud: &Arc<PointCloud>, probes: &[Point]) -> Result<EquilibriumResult> {
    equilibrium_from(setup, cloud, probes, None)
}

/// [`equilibrium`] started from the given weights.
pub fn equilibrium_from(setup: &Setup, cloud: &Arc<PointCloud>, probes: &[Point], warm: Option<&[f64]>) -> Result<EquilibriumResult> {
    if cloud.is_empty() {
        return Err(Error::Empty("cloud (capacity of the empty set is 0 by convention)"));
    }
    let k = kernel_matrix(&setup.model, cloud)?;
    let n = cloud.len();
    let problem = NnqpProblem::new(k, DVector::from_element(n, 1.0), setup.solver)?;
    let sol = solve(&problem, warm)?.require_converged()?;
    let w = DVector::from_column_slice(&sol.w);
    let kw = &problem.k * &w;
    let energy = w.dot(&kw);
    let capacity = sol.w.iter().sum::<f64>();
    let gamma = DiscreteMeasure::new(cloud.clone(), sol.w)?;
    let probe_potentials = eval_potential(&setup.model, &gamma, probes)?;

    let mut stats = PotentialStats {
        min_support: f64::INFINITY,
        max_support: f64::NEG_INFINITY,
        min_node: f64::INFINITY,
        max_node: f64::NEG_INFINITY,
        max_probe: probe_potentials.iter().copied().fold(0.0, f64::max),
    };
    for (i, u) in kw.iter().enumerate() {
        stats.min_node = stats.min_node.min(*u);
        stats.max_node = stats.max_node.max(*u);
        if gamma.weights()[i] > 0.0 {
            stats.min_support = stats.min_support.min(*u);
            stats.max_support = stats.max_support.max(*u);
        }
    }
    Ok(EquilibriumResult {
        interior_mass_fraction: interior_fraction(&gamma),
        capacity,
        energy,
        potential_stats: stats,
        node_potentials: kw.as_slice().to_vec(),
        probe_potentials,
        gamma,
        kkt: sol.kkt,
        iterations: sol.iterations,
    })
}

fn interior_fraction(gamma: &DiscreteMeasure) -> Option<f64> {
    let tags = gamma.cloud().tags();
    if !tags.iter().any(|t| matches!(t, NodeTag::Interior | NodeTag::Boundary)) {
        return None;
    }
    let total = gamma.total_mass();
    let inner: f64 = gamma
        .weights()
        .iter()
        .zip(tags)
        .filter(|(_, t)| **t == NodeTag::Interior)
        .map(|(w, _)| w)
        .sum();
    Some(if total > 0.0 { inner / total } else { 0.0 })
}

/// Capacity of `cloud`. An empty cloud is an error; callers treat it as 0.
pub fn capacity(setup: &Setup, cloud: &Arc<PointCloud>) -> Result<f64> {
    Ok(equilibrium(setup, cloud, &[])?.capacity)
}

/// Capacities along a refinement ladder with a linear-in-spacing
/// extrapolation from the two finest levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityLadder {
    pub node_counts: Vec<usize>,
    pub max_spacing: Vec<f64>,
    pub capacities: Vec<f64>,
    pub extrapolated: f64,
    /// Capacities change monotonically from level to level.
    pub monotone: bool,
    /// Largest probe potential per level.
    pub max_probe_potential: Vec<f64>,
}

pub fn capacity_ladder(setup: &Setup, ladder: &RefinementLadder, probes: &[Point]) -> Result<CapacityLadder> {
    let mut out = CapacityLadder {
        node_counts: Vec::new(),
        max_spacing: Vec::new(),
        capacities: Vec::new(),
        extrapolated: 0.0,
        monotone: true,
        max_probe_potential: Vec::new(),
    };
    for level in ladder.levels() {
        let eq = equilibrium(setup, &Arc::new(level.clone()), probes)?;
        out.node_counts.push(level.len());
        out.max_spacing.push(level.max_spacing());
        out.capacities.push(eq.capacity);
        out.max_probe_potential.push(eq.potential_stats.max_probe);
    }
    let c = &out.capacities;
    let diffs: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    out.monotone = diffs.iter().all(|d| *d <= 0.0) || diffs.iter().all(|d| *d >= 0.0);
    out.extrapolated = richardson(&out.max_spacing, c);
    Ok(out)
}

/// Value at h = 0 of the line through the two finest (h, value) pairs.
pub fn richardson(h: &[f64], values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return values.last().copied().unwrap_or(f64::NAN);
    }
    let (h1, h2) = (h[m - 2], h[m - 1]);
    let (c1, c2) = (values[m - 2], values[m - 1]);
    (c2 * h1 - c1 * h2) / (h1 - h2)
}

/// Capacity from the plain linear solve K w = 1, valid when every weight
/// comes out positive. `None` if some weight is not positive or K is not
/// positive definite.
pub fn dense_capacity(setup: &Setup, cloud: &PointCloud) -> Result<Option<f64>> {
    let k = kernel_matrix(&setup.model, cloud)?;
    let n = cloud.len();
    let Some(chol) = k.cholesky() else { return Ok(None) };
    let w = chol.solve(&DVector::from_element(n, 1.0));
    if w.iter().any(|x| *x <= 0.0) {
        return Ok(None);
    }
    Ok(Some(w.sum()))
}

/// Equilibrium support census on a tagged cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub interior_mass_fraction: f64,
    pub interior_nodes: usize,
    pub boundary_nodes: usize,
    /// Interior nodes carrying positive weight.
    pub interior_support: usize,
    pub capacity: f64,
}

/// Fraction of equilibrium mass on interior-tagged nodes.
pub fn support_profile(setup: &Setup, cloud: &Arc<PointCloud>, probes: &[Point]) -> Result<SupportProfile> {
    let tags = cloud.tags();
    if !tags.iter().any(|t| matches!(t, NodeTag::Interior | NodeTag::Boundary)) {
        return Err(Error::MissingTags);
    }
    let eq = equilibrium(setup, cloud, probes)?;
    let count = |tag| tags.iter().filter(|t| **t == tag).count();
    let interior_support = eq
        .gamma
        .weights()
        .iter()
        .zip(tags)
        .filter(|(w, t)| **w > 0.0 && **t == NodeTag::Interior)
        .count();
    Ok(SupportProfile {
        interior_mass_fraction: eq.interior_mass_fraction.unwrap_or(0.0),
        interior_nodes: count(NodeTag::Interior),
        boundary_nodes: count(NodeTag::Boundary),
        interior_support,
        capacity: eq.capacity,
    })
}

/// Cloud after the isolated-node heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCloud {
    pub cloud: PointCloud,
    pub dropped: Vec<usize>,
}

/// Heuristic reduced kernel: drops every node with no other node within
/// `radius_rule` times the median node spacing of the cloud.
pub fn reduced_kernel(cloud: &PointCloud, radius_rule: f64) -> ReducedCloud {
    if cloud.len() < 2 {
        return ReducedCloud { cloud: cloud.clone(), dropped: Vec::new() };
    }
    let mut h = cloud.spacing().to_vec();
    h.sort_by(f64::total_cmp);
    let median = h[h.len() / 2];
    let reach = radius_rule * median;
    let nn = nearest_neighbors(cloud.dim(), cloud.coords());
    let (keep, dropped): (Vec<usize>, Vec<usize>) = (0..cloud.len()).partition(|&i| nn[i].0 <= reach);
    ReducedCloud { cloud: cloud.subset(&keep, format!("{}/reduced", cloud.label())), dropped }
}
