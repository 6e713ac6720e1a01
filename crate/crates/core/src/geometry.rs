//! Point clouds standing in for compact subsets of R^n.
//!
//! Every cloud carries a per-node spacing `h_i`, used by the kernel module to
//! regularize self-energies, and a tag per node. Samplers are deterministic:
//! the same inputs always give bit-identical clouds.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point of R^n.
pub type Point = Vec<f64>;

/// Role of a node inside its sampled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeTag {
    Interior,
    Boundary,
    /// Axis node standing in for a tube thinner than the local spacing.
    Axis,
    Free,
}

/// Finite node set with per-node spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudRecord", into = "CloudRecord")]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    spacing: Vec<f64>,
    tags: Vec<NodeTag>,
    tube_log_radius: Vec<Option<f64>>,
    label: String,
}

/// On-disk layout of a cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudRecord {
    n: usize,
    points: Vec<Vec<f64>>,
    spacing: Vec<f64>,
    tags: Vec<NodeTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tube_log_radius: Option<Vec<Option<f64>>>,
    label: String,
}

impl TryFrom<CloudRecord> for PointCloud {
    type Error = Error;

    fn try_from(rec: CloudRecord) -> Result<Self> {
        let mut coords = Vec::with_capacity(rec.points.len() * rec.n);
        for p in &rec.points {
            if p.len() != rec.n {
                return Err(Error::DimensionMismatch { expected: rec.n, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        let count = rec.points.len();
        let tube = rec.tube_log_radius.unwrap_or_else(|| vec![None; count]);
        PointCloud::from_parts(rec.n, coords, rec.spacing, rec.tags, tube, rec.label)
    }
}

impl From<PointCloud> for CloudRecord {
    fn from(c: PointCloud) -> Self {
        let has_tubes = c.tube_log_radius.iter().any(Option::is_some);
        CloudRecord {
            n: c.dim,
            points: c.coords.chunks(c.dim).map(<[f64]>::to_vec).collect(),
            spacing: c.spacing,
            tags: c.tags,
            tube_log_radius: has_tubes.then_some(c.tube_log_radius),
            label: c.label,
        }
    }
}

impl PointCloud {
    /// Builds a cloud from flat coordinates, taking `h_i` as the distance to
    /// the nearest distinct node. A single node gets unit spacing.
    pub fn from_points(dim: usize, coords: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        let count = coords.len() / dim;
        let spacing = nearest_spacing(dim, &coords)?;
        Self::from_parts(
            dim,
            coords,
            spacing,
            vec![NodeTag::Free; count],
            vec![None; count],
            label.into(),
        )
    }

    /// Convenience wrapper over [`PointCloud::from_points`] for a list of points.
    pub fn from_point_list(points: &[Point], label: impl Into<String>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::Empty("point list"))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_points(dim, coords, label)
    }

    /// Builds a cloud with sampler-provided spacing and tags, checking every
    /// invariant.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        spacing: Vec<f64>,
        tags: Vec<NodeTag>,
        tube_log_radius: Vec<Option<f64>>,
        label: String,
    ) -> Result<Self> {
        check_dim(dim)?;
        let count = coords.len() / dim;
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        for (name, len) in [("spacing", spacing.len()), ("tags", tags.len()), ("tube radii", tube_log_radius.len())] {
            if len != count {
                return Err(invalid(format!("{name} has {len} entries for {count} nodes")));
            }
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coordinates"));
        }
        if let Some(i) = spacing.iter().position(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(invalid(format!("spacing at node {i} must be positive and finite")));
        }
        if count > 1 {
            let nn = nearest_neighbors(dim, &coords);
            for (i, &(d, j)) in nn.iter().enumerate() {
                if d == 0.0 {
                    return Err(Error::DuplicateNodes(i.min(j), i.max(j)));
                }
                if spacing[i] > 2.0 * d {
                    return Err(invalid(format!(
                        "spacing {} at node {i} exceeds twice its nearest-neighbor distance {d}",
                        spacing[i]
                    )));
                }
            }
        }
        Ok(PointCloud { dim, coords, spacing, tags, tube_log_radius, label })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.spacing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacing.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn tube_log_radius(&self) -> &[Option<f64>] {
        &self.tube_log_radius
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_spacing(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.spacing.iter().sum::<f64>() / self.len() as f64
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Uniform re-tag of every node.
    pub fn with_tag(mut self, tag: NodeTag) -> Self {
        self.tags.iter_mut().for_each(|t| *t = tag);
        self
    }

    /// Sub-cloud on the given node indices. Spacings and tags are inherited,
    /// so kernel matrices of nested sub-clouds are principal submatrices of
    /// the parent's.
    pub fn subset(&self, indices: &[usize], label: impl Into<String>) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
            spacing: indices.iter().map(|&i| self.spacing[i]).collect(),
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
            tube_log_radius: indices.iter().map(|&i| self.tube_log_radius[i]).collect(),
            label: label.into(),
        }
    }

    /// Sub-cloud of nodes whose coordinates satisfy `keep`.
    pub fn filter(&self, label: impl Into<String>, keep: impl Fn(&[f64]) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.point(i))).collect();
        self.subset(&idx, label)
    }

    /// Union of two clouds, keeping each node's spacing. Fails if the result
    /// breaks a cloud invariant (duplicates, spacing too large).
    pub fn union(&self, other: &PointCloud, label: impl Into<String>) -> Result<PointCloud> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        fn cat<T: Clone>(a: &[T], b: &[T]) -> Vec<T> {
            [a, b].concat()
        }
        Self::from_parts(
            self.dim,
            cat(&self.coords, &other.coords),
            cat(&self.spacing, &other.spacing),
            cat(&self.tags, &other.tags),
            cat(&self.tube_log_radius, &other.tube_log_radius),
            label.into(),
        )
    }

    /// Index of the node bit-identical to `p`, if any.
    pub fn find(&self, p: &[f64]) -> Option<usize> {
        self.points().position(|q| q == p)
    }

    /// Node indices of `self` inside `other`, matched by exact coordinates;
    /// `Err(i)` names the first node of `self` that `other` lacks.
    pub fn embed_in(&self, other: &PointCloud) -> std::result::Result<Vec<usize>, usize> {
        let index: HashMap<Vec<u64>, usize> = other
            .points()
            .enumerate()
            .map(|(j, p)| (bits(p), j))
            .collect();
        self.points()
            .enumerate()
            .map(|(i, p)| index.get(&bits(p)).copied().ok_or(i))
            .collect()
    }

    pub fn centroid(&self) -> Point {
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            c.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        let n = self.len().max(1) as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }

    /// Largest distance from `center` to a node.
    pub fn radius_about(&self, center: &[f64]) -> f64 {
        self.points().map(|p| dist(p, center)).fold(0.0, f64::max)
    }
}

fn bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(invalid(format!("dimension n = {dim}; need n >= 3")));
    }
    Ok(())
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Nearest distinct neighbor of every node: `(distance, index)`. A node
/// with an exact duplicate reports distance 0. Single nodes report
/// `(inf, usize::MAX)`.
pub fn nearest_neighbors(dim: usize, coords: &[f64]) -> Vec<(f64, usize)> {
    let count = coords.len() / dim;
    if count == 0 {
        return Vec::new();
    }
    // sweep along the axis of largest extent
    let axis = (0..dim)
        .max_by(|&a, &b| {
            let span = |ax: usize| {
                let vals = coords.iter().skip(ax).step_by(dim);
                let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                hi - lo
            };
            span(a).total_cmp(&span(b))
        })
        .unwrap_or(0);
    let key = |i: usize| coords[i * dim + axis];
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let mut pos = vec![0usize; count];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let xi = &coords[i * dim..(i + 1) * dim];
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            let visit = |j: usize, best: &mut f64, arg: &mut usize| -> bool {
                let dx = key(j) - xi[axis];
                if dx * dx > *best {
                    return false;
                }
                let d2 = dist2(xi, &coords[j * dim..(j + 1) * dim]);
                if d2 < *best || (d2 == *best && j < *arg) {
                    *best = d2;
                    *arg = j;
                }
                true
            };
            for &j in &order[pos[i] + 1..] {
                if !visit(j, &mut best, &mut arg) {
                    break;
                }
            }
            for &j in order[..pos[i]].iter().rev() {
                if !visit(j, &mut best, &mut arg) {
                    break;
                }
            }
            (best.sqrt(), arg)
        })
        .collect()
}

fn nearest_spacing(dim: usize, coords: &[f64]) -> Result<Vec<f64>> {
    let count = coords.len() / dim;
    if count == 1 {
        return Ok(vec![1.0]);
    }
    nearest_neighbors(dim, coords)
        .into_iter()
        .enumerate()
        .map(|(i, (d, j))| if d == 0.0 { Err(Error::DuplicateNodes(i.min(j), i.max(j))) } else { Ok(d) })
        .collect()
}

fn check_sphere_args(center: &[f64], radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    check_dim(center.len())
}

/// Frequency of the icosahedral sphere scheme at a given level.
pub fn sphere_frequency(level: u32) -> u32 {
    4 << level
}

/// Quasi-uniform nodes on the sphere S(center, radius) in R^3.
///
/// Geodesic icosahedral grid of frequency `4·2^level` (162 nodes at level 0,
/// about 4x more per level). Spacing is the nearest-neighbor distance.
pub fn sample_sphere(center: &[f64], radius: f64, level: u32) -> Result<PointCloud> {
    sample_sphere_frequency(center, radius, sphere_frequency(level))
}

/// Icosahedral sphere with an explicit subdivision frequency (10f²+2 nodes).
pub fn sample_sphere_frequency(center: &[f64], radius: f64, frequency: u32) -> Result<PointCloud> {
    check_sphere_args(center, radius)?;
    if center.len() != 3 {
        return Err(invalid(format!(
            "the icosahedral sphere scheme is three-dimensional; use sample_sphere_generic for n = {}",
            center.len()
        )));
    }
    if frequency == 0 {
        return Err(invalid("sphere frequency must be at least 1"));
    }
    let dirs = icosahedral_directions(frequency as usize);
    let coords = scale_directions(center, radius, &dirs);
    let count = coords.len() / 3;
    let spacing = nearest_spacing(3, &coords)?;
    PointCloud::from_parts(
        3,
        coords,
        spacing,
        vec![NodeTag::Boundary; count],
        vec![None; count],
        format!("sphere(r={radius},f={frequency})"),
    )
}

/// Sphere nodes in any dimension n >= 3: the integer points on the surface
/// of the cube [-m, m]^n, m = 3·2^level, projected radially.
pub fn sample_sphere_generic(center: &[f64], radius: f64, level: u32) -> Result<PointCloud> {
    check_sphere_args(center, radius)?;
    let dim = center.len();
    let m = 3i64 << level;
    let side = (2 * m + 1) as usize;
    let total = side.checked_pow(dim as u32).ok_or_else(|| invalid("generic sphere lattice too large"))?;
    if total > 50_000_000 {
        return Err(invalid("generic sphere lattice too large"));
    }
    let mut dirs = Vec::new();
    let mut v = vec![-m; dim];
    loop {
        if v.iter().any(|c| c.abs() == m) {
            let norm = v.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
            dirs.extend(v.iter().map(|&c| c as f64 / norm));
        }
        // odometer increment
        let mut d = dim;
        loop {
            if d == 0 {
                let coords = scale_directions(center, radius, &dirs);
                let count = coords.len() / dim;
                let spacing = nearest_spacing(dim, &coords)?;
                return PointCloud::from_parts(
                    dim,
                    coords,
                    spacing,
                    vec![NodeTag::Boundary; count],
                    vec![None; count],
                    format!("sphere-lattice(n={dim},r={radius},level={level})"),
                );
            }
            d -= 1;
            if v[d] < m {
                v[d] += 1;
                break;
            }
            v[d] = -m;
        }
    }
}

fn scale_directions(center: &[f64], radius: f64, dirs: &[f64]) -> Vec<f64> {
    let dim = center.len();
    dirs.chunks(dim)
        .flat_map(|u| u.iter().zip(center).map(move |(ui, ci)| ci + radius * ui))
        .collect()
}

/// Unit directions of the geodesic icosahedral grid, flattened.
fn icosahedral_directions(freq: usize) -> Vec<f64> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let verts: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    const FACES: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    // a grid point is identified by its barycentric weights over the
    // icosahedron vertices, so points on shared edges are generated once and
    // always from the same canonical expression
    let mut seen: HashMap<[(usize, usize); 3], ()> = HashMap::new();
    let mut out = Vec::with_capacity(3 * (10 * freq * freq + 2));
    for face in FACES {
        for i in 0..=freq {
            for j in 0..=freq - i {
                let k = freq - i - j;
                let mut key = [(face[0], i), (face[1], j), (face[2], k)];
                key.sort_unstable();
                for e in key.iter_mut() {
                    if e.1 == 0 {
                        *e = (usize::MAX, 0);
                    }
                }
                key.sort_unstable();
                if seen.insert(key, ()).is_some() {
                    continue;
                }
                let mut p = [0.0f64; 3];
                for &(v, w) in key.iter().filter(|e| e.1 > 0) {
                    for (pc, vc) in p.iter_mut().zip(verts[v]) {
                        *pc += w as f64 * vc;
                    }
                }
                let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                out.extend(p.iter().map(|c| c / norm));
            }
        }
    }
    out
}

/// Ratio of the interior lattice step of a ball to the mean spacing of its
/// boundary sphere.
pub const BALL_INTERIOR_RATIO: f64 = 0.7;

/// Ball in R^3: a cubic lattice of interior nodes plus the level's sphere
/// nodes as boundary shell. Interior nodes keep a clearance of half a lattice
/// step from the sphere.
pub fn sample_ball(center: &[f64], radius: f64, level: u32) -> Result<PointCloud> {
    sample_ball_frequency(center, radius, sphere_frequency(level))
}

/// [`sample_ball`] with an explicit sphere frequency.
pub fn sample_ball_frequency(center: &[f64], radius: f64, frequency: u32) -> Result<PointCloud> {
    let shell = sample_sphere_frequency(center, radius, frequency)?;
    let step = BALL_INTERIOR_RATIO * shell.mean_spacing();
    let reach = radius - 0.5 * step;
    let m = (reach / step).floor() as i64;
    let mut coords = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let v = [i as f64 * step, j as f64 * step, k as f64 * step];
                if (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() <= reach {
                    coords.extend(v.iter().zip(center).map(|(a, c)| a + c));
                }
            }
        }
    }
    let interior = coords.len() / 3;
    coords.extend_from_slice(shell.coords());
    let count = coords.len() / 3;
    let spacing = nearest_spacing(3, &coords)?;
    let mut tags = vec![NodeTag::Interior; interior];
    tags.resize(count, NodeTag::Boundary);
    PointCloud::from_parts(3, coords, spacing, tags, vec![None; count], format!("ball(r={radius},f={frequency})"))
}

/// Cross-section profile of a rotation body around the x1 axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// ρ = x1^(-s), s ≥ 0 (radius capped at 1 on [0, 1]).
    Power,
    /// ρ = exp(-x1^s), 0 < s ≤ 1.
    StretchedExp,
    /// ρ = exp(-x1^s), s > 1.
    SuperExp,
}

/// Rotation body {0 ≤ x1 ≤ x1_max, x2² + x3² ≤ ρ²(x1)} truncated at `x1_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationBodySpec {
    pub profile: Profile,
    pub s: f64,
    pub x1_max: f64,
    /// Node spacing at level 0; each level divides it by 1.5.
    pub spacing: f64,
}

impl RotationBodySpec {
    pub fn new(profile: Profile, s: f64, x1_max: f64, spacing: f64) -> Result<Self> {
        let spec = RotationBodySpec { profile, s, x1_max, spacing };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.profile {
            Profile::Power => self.s >= 0.0,
            Profile::StretchedExp => self.s > 0.0 && self.s <= 1.0,
            Profile::SuperExp => self.s > 1.0,
        };
        if !ok || !self.s.is_finite() {
            return Err(invalid(format!("exponent s = {} does not fit profile {:?}", self.s, self.profile)));
        }
        if !(self.x1_max > 1.0 && self.x1_max.is_finite()) {
            return Err(invalid(format!("x1_max must exceed 1, got {}", self.x1_max)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid(format!("spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    /// Natural log of the cross-section radius at `x1`.
    pub fn log_radius(&self, x1: f64) -> f64 {
        match self.profile {
            Profile::Power => -self.s * x1.max(1.0).ln(),
            Profile::StretchedExp | Profile::SuperExp => -x1.powf(self.s),
        }
    }

    pub fn radius(&self, x1: f64) -> f64 {
        self.log_radius(x1).exp()
    }

    pub fn with_x1_max(self, x1_max: f64) -> Self {
        RotationBodySpec { x1_max, ..self }
    }
}

/// Nodes filling a truncated rotation body.
///
/// Stations are equally spaced along x1. A station whose radius is at least
/// half the axial step gets a center node plus concentric rings; thinner
/// stations collapse to a single axis node that records the tube radius, so
/// the kernel can assign it the self-energy of a thin segment.
pub fn sample_rotation_body(spec: &RotationBodySpec, level: u32) -> Result<PointCloud> {
    spec.validate()?;
    let h = spec.spacing / 1.5f64.powi(level as i32);
    let stations = (spec.x1_max / h).ceil().max(1.0) as usize;
    let hx = spec.x1_max / stations as f64;
    let mut coords = Vec::new();
    let mut tags = Vec::new();
    let mut tubes = Vec::new();
    for i in 0..=stations {
        let x = i as f64 * hx;
        let end = i == 0 || i == stations;
        let log_r = spec.log_radius(x);
        let r = log_r.exp();
        if r < 0.5 * hx {
            coords.extend([x, 0.0, 0.0]);
            tags.push(NodeTag::Axis);
            tubes.push(Some(log_r));
            continue;
        }
        let rings = (r / hx).ceil() as usize;
        coords.extend([x, 0.0, 0.0]);
        tags.push(if end { NodeTag::Boundary } else { NodeTag::Interior });
        tubes.push(None);
        for j in 1..=rings {
            let rj = r * j as f64 / rings as f64;
            let count = ((2.0 * PI * rj / hx).round() as usize).max(3);
            let offset = if i % 2 == 1 { PI / count as f64 } else { 0.0 };
            let tag = if end || j == rings { NodeTag::Boundary } else { NodeTag::Interior };
            for t in 0..count {
                let th = 2.0 * PI * t as f64 / count as f64 + offset;
                coords.extend([x, rj * th.cos(), rj * th.sin()]);
                tags.push(tag);
                tubes.push(None);
            }
        }
    }
    let spacing = nearest_spacing(3, &coords)?;
    PointCloud::from_parts(
        3,
        coords,
        spacing,
        tags,
        tubes,
        format!("rotation-body({:?},s={},x1_max={},level={level})", spec.profile, spec.s, spec.x1_max),
    )
}

/// Image of a cloud under the inversion in the sphere S(y, 1):
/// x ↦ y + (x − y)/|x − y|². Spacings are recomputed from the image
/// (a single node scales its spacing by |x − y|^(-2)); tube radii of axis
/// nodes scale by |x − y|^(-2).
pub fn invert_cloud(cloud: &PointCloud, y: &[f64]) -> Result<PointCloud> {
    if y.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), found: y.len() });
    }
    let mut coords = Vec::with_capacity(cloud.coords.len());
    let mut tubes = Vec::with_capacity(cloud.len());
    for (i, x) in cloud.points().enumerate() {
        let r2 = dist2(x, y);
        if r2 == 0.0 {
            return Err(Error::InversionSingularity(i));
        }
        coords.extend(x.iter().zip(y).map(|(xi, yi)| yi + (xi - yi) / r2));
        tubes.push(cloud.tube_log_radius[i].map(|la| la - r2.ln()));
    }
    // a lone node has no neighbor to measure; its spacing follows the local
    // scale factor |x − y|^(-2) of the inversion
    let spacing = if cloud.len() == 1 {
        vec![cloud.spacing[0] / dist2(cloud.point(0), y)]
    } else {
        nearest_spacing(cloud.dim(), &coords)?
    };
    PointCloud::from_parts(
        cloud.dim(),
        coords,
        spacing,
        cloud.tags.clone(),
        tubes,
        format!("{}*", cloud.label),
    )
}

/// Radial direction of a shell decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShellDirection {
    /// q > 1, shells q^k ≤ |x − c| < q^(k+1).
    Outward,
    /// 0 < q < 1, shells q^(k+1) < |x − c| ≤ q^k.
    Inward,
}

impl ShellDirection {
    pub fn of_ratio(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) || q == 1.0 {
            return Err(invalid(format!("shell ratio q = {q} must be positive and different from 1")));
        }
        Ok(if q > 1.0 { ShellDirection::Outward } else { ShellDirection::Inward })
    }
}

/// One radial shell of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellCloud {
    pub k: i32,
    pub cloud: PointCloud,
}

/// Splits `cloud` into radial shells about `center`; nodes outside every
/// shell of `k_range` are dropped. Sub-clouds inherit their spacings.
pub fn shell_clouds(cloud: &PointCloud, center: &[f64], q: f64, k_range: RangeInclusive<i32>) -> Result<Vec<ShellCloud>> {
    let direction = ShellDirection::of_ratio(q)?;
    if k_range.is_empty() {
        return Err(invalid("empty shell index range"));
    }
    if center.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), found: center.len() });
    }
    let (k_lo, k_hi) = (*k_range.start(), *k_range.end());
    let bounds: Vec<f64> = (k_lo..=k_hi + 1).map(|k| q.powi(k)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); (k_hi - k_lo + 1) as usize];
    for (i, p) in cloud.points().enumerate() {
        let r = dist(p, center);
        let slot = (0..members.len()).find(|&s| {
            let (a, b) = (bounds[s], bounds[s + 1]);
            match direction {
                ShellDirection::Outward => a <= r && r < b,
                ShellDirection::Inward => b < r && r <= a,
            }
        });
        if let Some(s) = slot {
            members[s].push(i);
        }
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(s, idx)| {
            let k = k_lo + s as i32;
            ShellCloud { k, cloud: cloud.subset(&idx, format!("{}/shell{k}", cloud.label)) }
        })
        .collect())
}

/// Clouds of one continuum set at decreasing spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLadder {
    levels: Vec<PointCloud>,
}

/// Minimum factor by which the maximal spacing must shrink per level.
pub const LADDER_FACTOR: f64 = 1.5;

impl RefinementLadder {
    pub fn new(levels: Vec<PointCloud>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(invalid("a refinement ladder needs at least two levels"));
        }
        for (i, pair) in levels.windows(2).enumerate() {
            let (coarse, fine) = (pair[0].max_spacing(), pair[1].max_spacing());
            if coarse < LADDER_FACTOR * fine {
                return Err(invalid(format!(
                    "max spacing shrinks only by {:.3} from level {i} to {}",
                    coarse / fine,
                    i + 1
                )));
            }
        }
        Ok(RefinementLadder { levels })
    }

    /// Icosahedral spheres at the given frequencies.
    pub fn sphere(center: &[f64], radius: f64, frequencies: &[u32]) -> Result<Self> {
        let levels = frequencies
            .iter()
            .map(|&f| sample_sphere_frequency(center, radius, f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[PointCloud] {
        &self.levels
    }

    pub fn finest(&self) -> &PointCloud {
        self.levels.last().expect("ladder has levels")
    }
}

/// Fibonacci-spiral points on the sphere S(center, radius) in R^3.
pub fn fibonacci_sphere(center: &[f64], radius: f64, count: usize) -> Vec<Point> {
    let golden = PI * (1.0 + 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let th = golden * (i as f64 + 0.5);
            let mut p = vec![center[0] + radius * rho * th.cos(), center[1] + radius * rho * th.sin(), center[2] + radius * z];
            p.extend_from_slice(&center[3.min(center.len())..]);
            p
        })
        .collect()
}
