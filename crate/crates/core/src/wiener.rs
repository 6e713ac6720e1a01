//! Shell-capacity series: existence of equilibrium measures for unbounded
//! sets, finiteness of capacity, and Wiener-type irregularity of boundary
//! points.
//!
//! A numerical series cannot be proven convergent. Verdicts come from the
//! tail of the computed terms and carry an explicit inconclusive state.

use std::ops::RangeInclusive;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::capacity;
use crate::error::{Error, Result};
use crate::geometry::{invert_cloud, shell_clouds, Point, PointCloud, ShellDirection};
use crate::Setup;

/// Verdicts need the tail ratio at or below this to call a series convergent.
pub const CONVERGING_RATIO: f64 = 0.9;

/// Capacity of one radial shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellCapacity {
    pub k: i32,
    pub node_count: usize,
    /// 0 for empty shells; NaN when the solve failed.
    pub capacity: f64,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-shell capacities of a cloud about a center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDecomposition {
    pub center: Point,
    pub q: f64,
    pub direction: ShellDirection,
    /// n − α.
    pub codim: f64,
    pub shells: Vec<ShellCapacity>,
}

impl ShellDecomposition {
    /// Decomposition from given capacities, for synthetic inputs.
    pub fn synthetic(q: f64, codim: f64, ks: RangeInclusive<i32>, capacities: &[f64]) -> Result<Self> {
        let direction = ShellDirection::of_ratio(q)?;
        let ks: Vec<i32> = ks.collect();
        if ks.len() != capacities.len() {
            return Err(Error::DimensionMismatch { expected: ks.len(), found: capacities.len() });
        }
        let shells = ks
            .iter()
            .zip(capacities)
            .map(|(&k, &c)| ShellCapacity { k, node_count: 0, capacity: c, valid: c.is_finite() && c >= 0.0, error: None })
            .collect();
        Ok(ShellDecomposition { center: Vec::new(), q, direction, codim, shells })
    }
}

/// Solves the equilibrium problem on every shell independently, in
/// parallel. Numerical failures mark the shell invalid instead of aborting.
pub fn shell_capacities(
    setup: &Setup,
    cloud: &PointCloud,
    center: &[f64],
    q: f64,
    k_range: RangeInclusive<i32>,
) -> Result<ShellDecomposition> {
    let direction = ShellDirection::of_ratio(q)?;
    let shells = shell_clouds(cloud, center, q, k_range)?;
    let shells = shells
        .into_par_iter()
        .map(|s| {
            let node_count = s.cloud.len();
            if node_count == 0 {
                return Ok(ShellCapacity { k: s.k, node_count, capacity: 0.0, valid: true, error: None });
            }
            match capacity(setup, &Arc::new(s.cloud)) {
                Ok(c) => Ok(ShellCapacity { k: s.k, node_count, capacity: c, valid: true, error: None }),
                Err(e) if e.is_numerical() => {
                    Ok(ShellCapacity { k: s.k, node_count, capacity: f64::NAN, valid: false, error: Some(e.to_string()) })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShellDecomposition {
        center: center.to_vec(),
        q,
        direction,
        codim: setup.model.params.n as f64 - setup.model.params.alpha,
        shells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn is_conclusive(self) -> bool {
        self != Verdict::Inconclusive
    }
}

/// Terms, partial sums and verdict of a shell series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub ks: Vec<i32>,
    pub node_counts: Vec<usize>,
    pub capacities: Vec<f64>,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// exp of the least-squares slope of ln t_k against k over the tail.
    pub tail_ratio: Option<f64>,
    /// Minus the slope of ln t_k against ln(k − k_min + 1) over the tail;
    /// at most 1 means the terms fade no faster than a harmonic series.
    pub decay_exponent: Option<f64>,
    pub verdict: Verdict,
    pub k_max: i32,
}

impl SeriesDiagnostic {
    /// Rows (k, node_count, c_k, term, partial_sum).
    pub fn rows(&self) -> impl Iterator<Item = (i32, usize, f64, f64, f64)> + '_ {
        (0..self.ks.len()).map(|i| (self.ks[i], self.node_counts[i], self.capacities[i], self.terms[i], self.partial_sums[i]))
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Verdict for terms t_k, k = ks[i].
pub fn diagnose(ks: &[i32], terms: &[f64], valid: bool) -> (Option<f64>, Option<f64>, Verdict) {
    if !valid || terms.iter().any(|t| !t.is_finite()) {
        return (None, None, Verdict::Inconclusive);
    }
    if terms.iter().all(|t| *t == 0.0) {
        return (None, None, Verdict::Converging);
    }
    let m = terms.len();
    if terms[m - 1] == 0.0 {
        // the terms have died out before the truncation
        return (None, None, Verdict::Converging);
    }
    if m < 2 {
        return (None, None, Verdict::Inconclusive);
    }
    let tail = m.div_ceil(3).max(2);
    let start = m - tail;
    let k_min = ks[0];
    let (mut xs, mut ls, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    for i in start..m {
        if terms[i] > 0.0 {
            xs.push(ks[i] as f64);
            ls.push(((ks[i] - k_min + 1) as f64).ln());
            ys.push(terms[i].ln());
        }
    }
    if xs.len() < 2 {
        return (None, None, Verdict::Inconclusive);
    }
    let ratio = slope(&xs, &ys).exp();
    let p = -slope(&ls, &ys);
    let verdict = if ratio >= 1.0 || p <= 1.0 {
        Verdict::Diverging
    } else if ratio <= CONVERGING_RATIO {
        Verdict::Converging
    } else {
        Verdict::Inconclusive
    };
    (Some(ratio), Some(p), verdict)
}

fn series(decomp: &ShellDecomposition, weight_power: f64) -> SeriesDiagnostic {
    let ks: Vec<i32> = decomp.shells.iter().map(|s| s.k).collect();
    let capacities: Vec<f64> = decomp.shells.iter().map(|s| s.capacity).collect();
    let terms: Vec<f64> = decomp
        .shells
        .iter()
        .map(|s| s.capacity / decomp.q.powf(weight_power * s.k as f64 * decomp.codim))
        .collect();
    let partial_sums = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let valid = decomp.shells.iter().all(|s| s.valid);
    let (tail_ratio, decay_exponent, verdict) = diagnose(&ks, &terms, valid);
    SeriesDiagnostic {
        k_max: ks.last().copied().unwrap_or(0),
        node_counts: decomp.shells.iter().map(|s| s.node_count).collect(),
        ks,
        capacities,
        terms,
        partial_sums,
        tail_ratio,
        decay_exponent,
        verdict,
    }
}

fn require(decomp: &ShellDecomposition, direction: ShellDirection) -> Result<()> {
    if decomp.direction != direction {
        return Err(Error::WrongDirection(match direction {
            ShellDirection::Outward => "this series needs outward shells (q > 1)",
            ShellDirection::Inward => "this series needs inward shells (0 < q < 1)",
        }));
    }
    Ok(())
}

/// Σ c_k / q^(k(n−α)) over outward shells: convergence means the
/// equilibrium measure of the unbounded set exists.
pub fn equilibrium_existence_series(decomp: &ShellDecomposition) -> Result<SeriesDiagnostic> {
    require(decomp, ShellDirection::Outward)?;
    Ok(series(decomp, 1.0))
}

/// Σ c_k / q^(2k(n−α)) over outward shells: convergence means finite
/// capacity.
pub fn capacity_finiteness_series(decomp: &ShellDecomposition) -> Result<SeriesDiagnostic> {
    require(decomp, ShellDirection::Outward)?;
    Ok(series(decomp, 2.0))
}

/// Σ c_k / q^(k(n−α)) over inward shells about a point y: convergence means
/// y is irregular.
pub fn irregularity_series(decomp: &ShellDecomposition) -> Result<SeriesDiagnostic> {
    require(decomp, ShellDirection::Inward)?;
    Ok(series(decomp, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Regular,
    Irregular,
    Inconclusive,
}

impl Regularity {
    fn from_series(v: Verdict) -> Self {
        match v {
            Verdict::Converging => Regularity::Irregular,
            Verdict::Diverging => Regularity::Regular,
            Verdict::Inconclusive => Regularity::Inconclusive,
        }
    }
}

/// Regularity of a point by two routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regularity: Regularity,
    /// Irregularity series about y on the cloud.
    pub series: SeriesDiagnostic,
    /// Existence series about y on the cloud inverted in S(y, 1).
    pub inverted_series: SeriesDiagnostic,
    /// Both routes conclusive and equal.
    pub routes_agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Classifies `y` for `cloud` from inward shells with ratio `q ∈ (0, 1)`,
/// and cross-checks against outward shells with ratio 1/q of the inverted
/// cloud; inward shell k maps onto outward shell k.
pub fn classify_point(setup: &Setup, cloud: &PointCloud, y: &[f64], q: f64, k_range: RangeInclusive<i32>) -> Result<Classification> {
    if ShellDirection::of_ratio(q)? != ShellDirection::Inward {
        return Err(Error::WrongDirection("classification needs inward shells (0 < q < 1)"));
    }
    let rest = cloud.filter(cloud.label().to_string(), |p| p != y);
    let direct = irregularity_series(&shell_capacities(setup, &rest, y, q, k_range.clone())?)?;
    let inverted = invert_cloud(&rest, y)?;
    let dual = equilibrium_existence_series(&shell_capacities(setup, &inverted, y, 1.0 / q, k_range)?)?;
    let (a, b) = (direct.verdict, dual.verdict);
    let routes_agree = a.is_conclusive() && a == b;
    let (regularity, warning) = if a.is_conclusive() && b.is_conclusive() && a != b {
        (Regularity::Inconclusive, Some(format!("routes disagree: series {a:?}, inverted equilibrium {b:?}")))
    } else if a.is_conclusive() {
        (Regularity::from_series(a), None)
    } else {
        (Regularity::from_series(b), None)
    };
    Ok(Classification { regularity, series: direct, inverted_series: dual, routes_agree, warning })
}

/// Capacity of an inward shell and of its inverted image against the
/// distortion bounds q^(−2k(n−α)) c_k ≤ c*_k ≤ q^(−(2k+2)(n−α)) c_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionBand {
    pub k: i32,
    pub capacity: f64,
    pub inverted_capacity: f64,
    pub lower: f64,
    pub upper: f64,
    /// Within the bounds up to the relative slack.
    pub within: bool,
}

pub fn capacity_distortion(
    setup: &Setup,
    cloud: &PointCloud,
    y: &[f64],
    q: f64,
    k_range: RangeInclusive<i32>,
    slack: f64,
) -> Result<Vec<DistortionBand>> {
    if ShellDirection::of_ratio(q)? != ShellDirection::Inward {
        return Err(Error::WrongDirection("distortion bands use inward shells (0 < q < 1)"));
    }
    let codim = setup.model.params.n as f64 - setup.model.params.alpha;
    shell_clouds(cloud, y, q, k_range)?
        .into_iter()
        .filter(|s| !s.cloud.is_empty())
        .map(|s| {
            let c = capacity(setup, &Arc::new(s.cloud.clone()))?;
            let c_star = capacity(setup, &Arc::new(invert_cloud(&s.cloud, y)?))?;
            let k = s.k as f64;
            let lower = q.powf(-2.0 * k * codim) * c;
            let upper = q.powf(-(2.0 * k + 2.0) * codim) * c;
            Ok(DistortionBand {
                k: s.k,
                capacity: c,
                inverted_capacity: c_star,
                lower,
                upper,
                within: c_star >= lower * (1.0 - slack) && c_star <= upper * (1.0 + slack),
            })
        })
        .collect()
}

/// Largest k with q^(k+1) ≤ `reach`, for q > 1: the last shell fully inside
/// a body truncated at `reach`.
pub fn last_complete_shell(q: f64, reach: f64) -> i32 {
    let mut k = 0;
    while q.powi(k + 2) <= reach * (1.0 + 1e-12) {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_ball_frequency, sample_sphere_frequency};

    #[test]
    fn zero_capacities_converge() {
        let d = ShellDecomposition::synthetic(2.0, 1.0, 0..=5, &[0.0; 6]).unwrap();
        assert_eq!(equilibrium_existence_series(&d).unwrap().verdict, Verdict::Converging);
        assert_eq!(capacity_finiteness_series(&d).unwrap().verdict, Verdict::Converging);
        assert!(irregularity_series(&d).is_err());
    }

    #[test]
    fn synthetic_geometric_half() {
        let q: f64 = 2.0;
        let caps: Vec<f64> = (0..=8).map(|k| q.powi(k) * 0.5f64.powi(k)).collect();
        let d = ShellDecomposition::synthetic(q, 1.0, 0..=8, &caps).unwrap();
        let s = equilibrium_existence_series(&d).unwrap();
        assert!((s.tail_ratio.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.verdict, Verdict::Converging);
    }

    #[test]
    fn constant_terms_diverge() {
        let caps: Vec<f64> = (0..=8).map(|k| 2f64.powi(k)).collect();
        let d = ShellDecomposition::synthetic(2.0, 1.0, 0..=8, &caps).unwrap();
        assert_eq!(equilibrium_existence_series(&d).unwrap().verdict, Verdict::Diverging);
    }

    #[test]
    fn verdicts_stable_in_q_for_synthetic_sequences() {
        for q in [1.5f64, 2.0, 3.0] {
            let conv: Vec<f64> = (0..=11).map(|k| q.powi(k) * q.powi(-k)).collect();
            let conv: Vec<f64> = conv.iter().enumerate().map(|(k, c)| c * 0.6f64.powi(k as i32)).collect();
            let div: Vec<f64> = (0..=11).map(|k| q.powi(k)).collect();
            let dc = ShellDecomposition::synthetic(q, 1.0, 0..=11, &conv).unwrap();
            let dd = ShellDecomposition::synthetic(q, 1.0, 0..=11, &div).unwrap();
            assert_eq!(equilibrium_existence_series(&dc).unwrap().verdict, Verdict::Converging, "q = {q}");
            assert_eq!(equilibrium_existence_series(&dd).unwrap().verdict, Verdict::Diverging, "q = {q}");
        }
        for q in [0.5f64, 1.0 / 3.0] {
            let caps: Vec<f64> = (0..=9).map(|k| q.powi(k) * 0.5f64.powi(k)).collect();
            let d = ShellDecomposition::synthetic(q, 1.0, 0..=9, &caps).unwrap();
            assert_eq!(irregularity_series(&d).unwrap().verdict, Verdict::Converging, "q = {q}");
        }
    }

    #[test]
    fn truncation_never_flips_converging_to_diverging() {
        let caps: Vec<f64> = (0..=15).map(|k| 2f64.powi(k) * 0.7f64.powi(k)).collect();
        for k_max in 3..=15 {
            let d = ShellDecomposition::synthetic(2.0, 1.0, 0..=k_max, &caps[..=k_max as usize]).unwrap();
            assert_ne!(equilibrium_existence_series(&d).unwrap().verdict, Verdict::Diverging, "k_max = {k_max}");
        }
    }

    #[test]
    fn single_shell_cloud() {
        let s = sample_sphere_frequency(&[0.0; 3], 1.5, 4).unwrap();
        let d = shell_capacities(&Setup::newtonian(), &s, &[0.0; 3], 2.0, 0..=3).unwrap();
        let positive: Vec<i32> = d.shells.iter().filter(|s| s.capacity > 0.0).map(|s| s.k).collect();
        assert_eq!(positive, vec![0]);
    }

    #[test]
    fn exterior_isolated_point_is_irregular() {
        let ball = sample_ball_frequency(&[0.0; 3], 1.0, 3).unwrap();
        let y = PointCloud::from_point_list(&[vec![3.0, 0.0, 0.0]], "y").unwrap();
        let cloud = ball.union(&y, "ball+y").unwrap();
        let c = classify_point(&Setup::newtonian(), &cloud, &[3.0, 0.0, 0.0], 0.5, 0..=3).unwrap();
        assert_eq!(c.regularity, Regularity::Irregular);
        assert!(c.routes_agree);
    }

    #[test]
    fn last_complete_shell_index() {
        assert_eq!(last_complete_shell(2.0, 16.0), 3);
        assert_eq!(last_complete_shell(1.5, 16.0), 5);
        assert_eq!(last_complete_shell(3.0, 16.0), 1);
    }
}
