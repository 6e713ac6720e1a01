//! Declarative experiment configs.
//!
//! A config names point sets, measures and a single task. Unknown keys are
//! rejected and every name must resolve.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equilibrium::equilibrium;
use crate::error::{Error, Result};
use crate::geometry::{
    invert_cloud, sample_ball_frequency, sample_rotation_body, sample_sphere_frequency, sample_sphere_generic, Point, PointCloud,
    Profile, RotationBodySpec,
};
use crate::kernel::{DiscreteMeasure, KernelModel, RieszParams, DEFAULT_BETA};
use crate::nnqp::SolverSettings;
use crate::Setup;

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub version: u32,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solver: Option<SolverSettings>,
    #[serde(default)]
    pub sets: BTreeMap<String, SetSpec>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    pub task: Task,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Write CSV tables next to the JSON report.
    #[serde(default = "default_true")]
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), csv: true }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn default_true() -> bool {
    true
}

/// A named point set, possibly a refinement ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// Icosahedral sphere nodes, one level per frequency.
    Sphere { center: Point, radius: f64, frequencies: Vec<u32> },
    /// Cube-lattice sphere nodes for any dimension, one level per entry.
    SphereLattice { center: Point, radius: f64, levels: Vec<u32> },
    Ball { center: Point, radius: f64, frequencies: Vec<u32> },
    RotationBody { profile: Profile, s: f64, x1_max: f64, spacing: f64, levels: Vec<u32> },
    Points { points: Vec<Point> },
    /// Cloud JSON file.
    File { path: String },
    /// Nodes of another set with p·normal ≥ offset, level by level.
    Halfspace { of: String, normal: Point, offset: f64 },
    /// Union of sets with the same number of levels.
    Union { sets: Vec<String> },
    /// Image under inversion in S(center, 1).
    Inverted { of: String, center: Point },
}

/// A named measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Diracs { atoms: Vec<Atom> },
    /// Equilibrium measure of the finest level of a set.
    Equilibrium { set: String },
    /// Measure JSON file.
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// Probe points: the default pair of spheres plus sources, or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum Probes {
    #[default]
    Default,
    Points(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Capacity {
        set: String,
        #[serde(default)]
        probes: Probes,
    },
    Balayage {
        measure: String,
        target: String,
        #[serde(default)]
        probes: Probes,
        /// Second measure for the symmetry check.
        #[serde(default)]
        lambda: Option<String>,
        /// Subset of the target for the restriction check.
        #[serde(default)]
        subset: Option<String>,
    },
    Wiener {
        set: String,
        mode: WienerMode,
        center: Point,
        q: f64,
        k_min: i32,
        k_max: i32,
        /// Re-sample a rotation body at these truncations.
        #[serde(default)]
        truncations: Vec<f64>,
    },
    KelvinCheck {
        center: Point,
        /// Measure for the identity suite; a seeded 100-atom fixture if absent.
        #[serde(default)]
        measure: Option<String>,
        #[serde(default)]
        seed: u64,
        /// Target set for the balayage duality, swept from the center.
        target: String,
        #[serde(default)]
        probes: Probes,
    },
    MassDeficit {
        body: String,
        source: String,
        truncations: Vec<f64>,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Capacity { .. } => "capacity",
            Task::Balayage { .. } => "balayage",
            Task::Wiener { .. } => "wiener",
            Task::KelvinCheck { .. } => "kelvin_check",
            Task::MassDeficit { .. } => "mass_deficit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienerMode {
    /// Outward shells: equilibrium existence and capacity finiteness.
    Existence,
    /// Inward shells about the center: regularity by both routes.
    Regularity,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SceneConfig = serde_json::from_str(text)
            .map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => config_error(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(config_error(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version)));
        }
        self.setup()?;
        for (name, spec) in &self.sets {
            let refs: Vec<&String> = match spec {
                SetSpec::Halfspace { of, .. } | SetSpec::Inverted { of, .. } => vec![of],
                SetSpec::Union { sets } => sets.iter().collect(),
                _ => Vec::new(),
            };
            for r in refs {
                if !self.sets.contains_key(r) {
                    return Err(config_error(format!("set '{name}' refers to unknown set '{r}'")));
                }
                if r == name {
                    return Err(config_error(format!("set '{name}' refers to itself")));
                }
            }
        }
        for (name, spec) in &self.measures {
            if let MeasureSpec::Equilibrium { set } = spec {
                self.require_set(set).map_err(|_| config_error(format!("measure '{name}' refers to unknown set '{set}'")))?;
            }
        }
        match &self.task {
            Task::Capacity { set, .. } => self.require_set(set),
            Task::Balayage { measure, target, lambda, subset, .. } => {
                self.require_measure(measure)?;
                self.require_set(target)?;
                if let Some(l) = lambda {
                    self.require_measure(l)?;
                }
                if let Some(s) = subset {
                    self.require_set(s)?;
                }
                Ok(())
            }
            Task::Wiener { set, q, k_min, k_max, mode, .. } => {
                self.require_set(set)?;
                if k_min > k_max {
                    return Err(config_error(format!("empty shell range {k_min}..={k_max}")));
                }
                let ok = match mode {
                    WienerMode::Existence => *q > 1.0,
                    WienerMode::Regularity => *q > 0.0 && *q < 1.0,
                };
                if !ok {
                    return Err(config_error(format!("q = {q} does not fit wiener mode {mode:?}")));
                }
                if !self.truncations_fit(set, self.wiener_truncations()) {
                    return Err(config_error("truncations need a rotation_body set"));
                }
                Ok(())
            }
            Task::KelvinCheck { measure, target, .. } => {
                if let Some(m) = measure {
                    self.require_measure(m)?;
                }
                self.require_set(target)
            }
            Task::MassDeficit { body, source, truncations } => {
                self.require_set(body)?;
                self.require_measure(source)?;
                if truncations.is_empty() || !self.truncations_fit(body, truncations) {
                    return Err(config_error("mass_deficit needs a rotation_body set and at least one truncation"));
                }
                Ok(())
            }
        }
    }

    fn wiener_truncations(&self) -> &[f64] {
        match &self.task {
            Task::Wiener { truncations, .. } => truncations,
            _ => &[],
        }
    }

    fn truncations_fit(&self, set: &str, truncations: &[f64]) -> bool {
        truncations.is_empty() || matches!(self.sets.get(set), Some(SetSpec::RotationBody { .. }))
    }

    fn require_set(&self, name: &str) -> Result<()> {
        if self.sets.contains_key(name) {
            Ok(())
        } else {
            Err(config_error(format!("unknown set '{name}'")))
        }
    }

    fn require_measure(&self, name: &str) -> Result<()> {
        if self.measures.contains_key(name) {
            Ok(())
        } else {
            Err(config_error(format!("unknown measure '{name}'")))
        }
    }

    pub fn setup(&self) -> Result<Setup> {
        let params = RieszParams::new(self.kernel.n, self.kernel.alpha).map_err(|e| config_error(e.to_string()))?;
        let model = KernelModel::new(params, self.kernel.beta).map_err(|e| config_error(e.to_string()))?;
        let solver = self.solver.unwrap_or_default();
        solver.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(Setup { model, solver })
    }

    /// Levels of a named set, coarse to fine, at most `depth` of them.
    pub fn resolve_set(&self, name: &str, depth: Option<usize>) -> Result<Vec<Arc<PointCloud>>> {
        let mut levels = self.build_set(name, 0)?;
        if let Some(d) = depth {
            levels.truncate(d.max(1));
        }
        Ok(levels.into_iter().map(Arc::new).collect())
    }

    /// Rotation body spec of a set, for truncation sweeps.
    pub fn rotation_body(&self, name: &str) -> Result<(RotationBodySpec, Vec<u32>)> {
        match self.sets.get(name) {
            Some(SetSpec::RotationBody { profile, s, x1_max, spacing, levels }) => {
                Ok((RotationBodySpec::new(*profile, *s, *x1_max, *spacing)?, levels.clone()))
            }
            _ => Err(config_error(format!("set '{name}' is not a rotation_body"))),
        }
    }

    fn build_set(&self, name: &str, depth: usize) -> Result<Vec<PointCloud>> {
        if depth > self.sets.len() {
            return Err(config_error(format!("set '{name}' is defined in a cycle")));
        }
        let spec = self.sets.get(name).ok_or_else(|| config_error(format!("unknown set '{name}'")))?;
        let label = |c: PointCloud| c.with_label(name.to_string());
        let nonempty = |v: &[u32]| {
            if v.is_empty() {
                Err(config_error(format!("set '{name}' lists no levels")))
            } else {
                Ok(())
            }
        };
        let out = match spec {
            SetSpec::Sphere { center, radius, frequencies } => {
                nonempty(frequencies)?;
                frequencies.iter().map(|&f| sample_sphere_frequency(center, *radius, f).map(label)).collect::<Result<_>>()?
            }
            SetSpec::SphereLattice { center, radius, levels } => {
                nonempty(levels)?;
                levels.iter().map(|&l| sample_sphere_generic(center, *radius, l).map(label)).collect::<Result<_>>()?
            }
            SetSpec::Ball { center, radius, frequencies } => {
                nonempty(frequencies)?;
                frequencies.iter().map(|&f| sample_ball_frequency(center, *radius, f).map(label)).collect::<Result<_>>()?
            }
            SetSpec::RotationBody { profile, s, x1_max, spacing, levels } => {
                nonempty(levels)?;
                let spec = RotationBodySpec::new(*profile, *s, *x1_max, *spacing)?;
                levels.iter().map(|&l| sample_rotation_body(&spec, l).map(label)).collect::<Result<_>>()?
            }
            SetSpec::Points { points } => vec![PointCloud::from_point_list(points, name.to_string())?],
            SetSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{path}: {e}")))?;
                vec![serde_json::from_str(&text).map_err(|e| config_error(format!("{path}: {e}")))?]
            }
            SetSpec::Halfspace { of, normal, offset } => self
                .build_set(of, depth + 1)?
                .into_iter()
                .map(|c| {
                    if normal.len() != c.dim() {
                        return Err(Error::DimensionMismatch { expected: c.dim(), found: normal.len() });
                    }
                    Ok(c.filter(name.to_string(), |p| p.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() >= *offset))
                })
                .collect::<Result<_>>()?,
            SetSpec::Union { sets } => {
                let parts = sets.iter().map(|s| self.build_set(s, depth + 1)).collect::<Result<Vec<_>>>()?;
                let n = parts.iter().map(Vec::len).min().unwrap_or(0);
                if n == 0 {
                    return Err(config_error(format!("union '{name}' is empty")));
                }
                (0..n)
                    .map(|l| {
                        parts[1..].iter().try_fold(parts[0][l].clone(), |acc, p| acc.union(&p[l], name.to_string()))
                    })
                    .collect::<Result<_>>()?
            }
            SetSpec::Inverted { of, center } => self
                .build_set(of, depth + 1)?
                .iter()
                .map(|c| invert_cloud(c, center).map(label))
                .collect::<Result<_>>()?,
        };
        Ok(out)
    }

    pub fn resolve_measure(&self, setup: &Setup, name: &str) -> Result<DiscreteMeasure> {
        let spec = self.measures.get(name).ok_or_else(|| config_error(format!("unknown measure '{name}'")))?;
        match spec {
            MeasureSpec::Diracs { atoms } => {
                let atoms: Vec<(Point, f64)> = atoms.iter().map(|a| (a.point.clone(), a.weight)).collect();
                crate::balayage::merge_sources(&atoms)
            }
            MeasureSpec::Equilibrium { set } => {
                let levels = self.resolve_set(set, None)?;
                let finest = levels.last().expect("sets have at least one level");
                Ok(equilibrium(setup, finest, &[])?.gamma)
            }
            MeasureSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{path}: {e}")))?;
                serde_json::from_str(&text).map_err(|e| config_error(format!("{path}: {e}")))
            }
        }
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, tol: Option<f64>, beta: Option<f64>, out: Option<String>) -> Result<Self> {
        if let Some(tol) = tol {
            let mut s = self.solver.unwrap_or_default();
            s.tol = tol;
            self.solver = Some(s);
        }
        if let Some(beta) = beta {
            self.kernel.beta = beta;
        }
        if let Some(out) = out {
            self.output.dir = out;
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{
        "version": 1,
        "kernel": {"n": 3, "alpha": 2.0},
        "sets": {"S": {"kind": "sphere", "center": [0,0,0], "radius": 1, "frequencies": [2, 4]},
                 "H": {"kind": "halfspace", "of": "S", "normal": [0,0,1], "offset": 0}},
        "measures": {"mu": {"kind": "diracs", "atoms": [{"point": [2,0,0], "weight": 1}]}},
        "task": {"command": "capacity", "set": "S"}
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = SceneConfig::from_json(SPHERE).unwrap();
        assert_eq!(cfg.kernel.beta, 0.5);
        let s = cfg.resolve_set("S", None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(cfg.resolve_set("S", Some(1)).unwrap().len(), 1);
        let h = cfg.resolve_set("H", None).unwrap();
        assert!(h[1].points().all(|p| p[2] >= 0.0));
        let mu = cfg.resolve_measure(&cfg.setup().unwrap(), "mu").unwrap();
        assert_eq!(mu.total_mass(), 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let bad = SPHERE.replace("\"version\": 1,", "\"version\": 1, \"colour\": 3,");
        let err = SceneConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("colour"));
    }

    #[test]
    fn dangling_names_are_rejected() {
        let bad = SPHERE.replace("\"set\": \"S\"", "\"set\": \"T\"");
        assert!(matches!(SceneConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SPHERE.replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(SceneConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SPHERE.replace("\"alpha\": 2.0", "\"alpha\": 3.0");
        assert!(matches!(SceneConfig::from_json(&bad), Err(Error::Config(_))));
    }
}
