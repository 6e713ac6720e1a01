//! Kelvin transform of atomic measures under inversion in S(y, 1).
//!
//! An atom (x, w) maps to (x*, w·|x − y|^(α−n)) with
//! x* = y + (x − y)/|x − y|². The identities below are exact algebra on the
//! off-diagonal kernel, so they are checked with the unregularized kernel.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::balayage::sweep;
use crate::equilibrium::equilibrium;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, invert_cloud, Point, PointCloud};
use crate::kernel::{eval_potential, mutual_energy, DiscreteMeasure, KernelModel, RieszParams};
use crate::Setup;

/// Center of inversion and kernel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KelvinContext {
    pub center: Point,
    pub params: RieszParams,
}

impl KelvinContext {
    pub fn new(center: Point, params: RieszParams) -> Result<Self> {
        params.validate()?;
        if center.len() != params.n {
            return Err(Error::DimensionMismatch { expected: params.n, found: center.len() });
        }
        Ok(KelvinContext { center, params })
    }

    /// Image of a point under the inversion.
    pub fn invert_point(&self, x: &[f64]) -> Result<Point> {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        if r2 == 0.0 {
            return Err(invalid("point coincides with the inversion center"));
        }
        Ok(x.iter().zip(&self.center).map(|(a, y)| y + (a - y) / r2).collect())
    }

    fn exact_model(&self) -> KernelModel {
        KernelModel { params: self.params, diag_rule: crate::kernel::DiagRule::Unregularized }
    }
}

/// Kelvin transform ν ↦ ν*. The image cloud gets recomputed spacings.
pub fn kelvin_transform(ctx: &KelvinContext, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if nu.cloud().dim() != ctx.params.n {
        return Err(Error::DimensionMismatch { expected: ctx.params.n, found: nu.cloud().dim() });
    }
    let image = invert_cloud(nu.cloud(), &ctx.center).map_err(|e| match e {
        Error::InversionSingularity(_) => Error::AtomAtCenter,
        e => e,
    })?;
    let e = ctx.params.exponent();
    let weights = nu
        .atoms()
        .map(|(x, w)| {
            let r = dist(x, &ctx.center);
            w * if e == -1.0 { 1.0 / r } else { r.powf(e) }
        })
        .collect();
    DiscreteMeasure::new(Arc::new(image), weights)
}

/// Seeded measure with `count` atoms uniform in the shell
/// `r_min ≤ |x − center| ≤ r_max` and weights uniform in [0.1, 1).
pub fn random_measure(center: &[f64], count: usize, r_min: f64, r_max: f64, seed: u64) -> Result<DiscreteMeasure> {
    use rand::{Rng, SeedableRng};
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(invalid("random measure needs 0 < r_min < r_max"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = center.len();
    let mut atoms = Vec::with_capacity(count);
    while atoms.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(0.1..=1.0).contains(&norm) {
            continue;
        }
        let r = rng.random_range(r_min..r_max);
        let p: Point = v.iter().zip(center).map(|(x, c)| c + r * x / norm).collect();
        atoms.push((p, rng.random_range(0.1..1.0)));
    }
    DiscreteMeasure::diracs(&atoms)
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest per-coordinate and per-weight deviation of (ν*)* from ν.
pub fn check_involution(ctx: &KelvinContext, nu: &DiscreteMeasure) -> Result<f64> {
    let back = kelvin_transform(ctx, &kelvin_transform(ctx, nu)?)?;
    let coords = nu
        .cloud()
        .coords()
        .iter()
        .zip(back.cloud().coords())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let weights = nu.weights().iter().zip(back.weights()).fold(0.0f64, |m, (a, b)| m.max(rel(*a, *b)));
    Ok(coords.max(weights))
}

/// Relative gap between ν(ℝⁿ) and U^{ν*}(y).
pub fn check_kelvin_mass(ctx: &KelvinContext, nu: &DiscreteMeasure) -> Result<f64> {
    let star = kelvin_transform(ctx, nu)?;
    let u = eval_potential(&ctx.exact_model(), &star, std::slice::from_ref(&ctx.center))?;
    Ok(rel(nu.total_mass(), u[0]))
}

/// Largest relative gap between U^{ν*}(x*) and |x − y|^(n−α) U^ν(x) over
/// the probes.
pub fn check_kelvin_potential(ctx: &KelvinContext, nu: &DiscreteMeasure, probes: &[Point]) -> Result<f64> {
    let model = ctx.exact_model();
    let star = kelvin_transform(ctx, nu)?;
    let images = probes.iter().map(|p| ctx.invert_point(p)).collect::<Result<Vec<_>>>()?;
    let lhs = eval_potential(&model, &star, &images)?;
    let rhs = eval_potential(&model, nu, probes)?;
    let e = ctx.params.exponent();
    Ok(probes.iter().enumerate().fold(0.0f64, |m, (i, p)| {
        let factor = dist(p, &ctx.center).powf(-e);
        m.max(rel(lhs[i], factor * rhs[i]))
    }))
}

/// Relative gap between E(μ*, ν*) and E(μ, ν) for disjoint supports.
pub fn check_kelvin_energy(ctx: &KelvinContext, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let model = ctx.exact_model();
    let before = mutual_energy(&model, mu, nu)?;
    let after = mutual_energy(&model, &kelvin_transform(ctx, mu)?, &kelvin_transform(ctx, nu)?)?;
    Ok(rel(before, after))
}

/// The two numerical routes to ε_y^A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Mass of the direct sweep of ε_y onto the target.
    pub direct_mass: f64,
    /// Mass of the Kelvin transform of the equilibrium measure of A*.
    pub kelvin_mass: f64,
    pub mass_gap: f64,
    /// Largest relative difference of the two potentials at the probes.
    pub potential_gap: f64,
    /// Capacity of the inverted cloud A*.
    pub inverted_capacity: f64,
    /// Largest per-node weight difference when both measures live on the
    /// same nodes up to rounding.
    pub weight_gap: f64,
}

/// Compares the sweep of ε_y onto `target` with (γ_{A*})*, where A* is the
/// inverted target.
pub fn dirac_balayage_duality(setup: &Setup, y: &[f64], target: &Arc<PointCloud>, probes: &[Point]) -> Result<DualityReport> {
    let model = &setup.model;
    let direct = sweep(setup, &DiscreteMeasure::dirac(y, 1.0)?, target, probes)?;
    let ctx = KelvinContext::new(y.to_vec(), model.params)?;
    let inverted = Arc::new(invert_cloud(target, y)?);
    let gamma = equilibrium(setup, &inverted, &[])?;
    let star = kelvin_transform(&ctx, &gamma.gamma)?;
    let kelvin_p = eval_potential(model, &star, probes)?;
    let potential_gap = direct
        .probes
        .iter()
        .zip(&kelvin_p)
        .filter(|(p, _)| !p.on_source)
        .fold(0.0f64, |m, (p, k)| m.max(rel(p.swept, *k)));
    let weight_gap = direct
        .swept
        .weights()
        .iter()
        .zip(star.weights())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(DualityReport {
        direct_mass: direct.swept_mass,
        kelvin_mass: star.total_mass(),
        mass_gap: rel(direct.swept_mass, star.total_mass()),
        potential_gap,
        inverted_capacity: gamma.capacity,
        weight_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_sphere_frequency;

    fn ctx() -> KelvinContext {
        KelvinContext::new(vec![0.0; 3], RieszParams::newtonian()).unwrap()
    }

    #[test]
    fn unit_atom_at_distance_two() {
        let nu = DiscreteMeasure::dirac(&[2.0, 0.0, 0.0], 1.0).unwrap();
        let star = kelvin_transform(&ctx(), &nu).unwrap();
        assert_eq!(star.cloud().point(0), &[0.5, 0.0, 0.0]);
        assert_eq!(star.weights(), &[0.5]);
    }

    #[test]
    fn atom_at_center_is_rejected() {
        let nu = DiscreteMeasure::dirac(&[0.0; 3], 1.0).unwrap();
        assert!(matches!(kelvin_transform(&ctx(), &nu), Err(Error::AtomAtCenter)));
    }

    #[test]
    fn identities_on_small_measure() {
        let c = KelvinContext::new(vec![0.3, -0.1, 0.2], RieszParams::new(3, 1.5).unwrap()).unwrap();
        let nu = DiscreteMeasure::diracs(&[(vec![2.0, 0.0, 0.0], 0.7), (vec![0.0, 1.0, 1.0], 1.1)]).unwrap();
        let mu = DiscreteMeasure::diracs(&[(vec![-1.0, 0.5, 0.0], 0.4)]).unwrap();
        assert!(check_involution(&c, &nu).unwrap() <= 1e-12);
        assert!(check_kelvin_mass(&c, &nu).unwrap() <= 1e-12);
        assert!(check_kelvin_potential(&c, &nu, &[vec![1.0, 1.0, 1.0]]).unwrap() <= 1e-12);
        assert!(check_kelvin_energy(&c, &mu, &nu).unwrap() <= 1e-12);
        assert!(matches!(check_kelvin_energy(&c, &nu, &nu), Err(Error::OverlappingSupports)));
    }

    #[test]
    fn probe_near_center() {
        let nu = DiscreteMeasure::diracs(&[(vec![2.0, 0.0, 0.0], 0.7), (vec![0.0, 1.0, 1.0], 1.1)]).unwrap();
        for eps in [1e-2, 1e-4, 1e-6] {
            assert!(check_kelvin_potential(&ctx(), &nu, &[vec![eps, 0.0, 0.0]]).unwrap() <= 1e-9);
        }
        assert!(check_kelvin_potential(&ctx(), &nu, &[vec![0.0; 3]]).is_err());
    }

    #[test]
    fn duality_on_single_node_target() {
        let setup = Setup::newtonian();
        let t = Arc::new(PointCloud::from_point_list(&[vec![1.0, 0.0, 0.0]], "one").unwrap());
        let rep = dirac_balayage_duality(&setup, &[3.0, 0.0, 0.0], &t, &[vec![0.0, 4.0, 0.0]]).unwrap();
        assert!(rep.weight_gap <= 10.0 * setup.tol());
        assert!(rep.potential_gap <= 10.0 * setup.tol());
    }

    #[test]
    fn duality_on_coarse_sphere() {
        let setup = Setup::newtonian();
        let t = Arc::new(sample_sphere_frequency(&[0.0; 3], 1.0, 6).unwrap());
        let rep = dirac_balayage_duality(&setup, &[2.0, 0.0, 0.0], &t, &crate::balayage::default_probes(&t, None)).unwrap();
        assert!((rep.direct_mass - 0.5).abs() < 0.05);
        assert!(rep.mass_gap < 0.05, "{rep:?}");
    }
}
