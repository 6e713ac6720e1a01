//! Command-line driver.
//!
//! Each subcommand reads a config, runs its task and writes
//! `<out>/<command>.json` plus CSV tables. Exit codes: 0 success, 1 config or
//! validation error, 2 numerical failure, 3 inconclusive verdict under
//! `--require-conclusive`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::balayage::{check_restriction, check_symmetry, default_probes, mass_deficit, superpose_diracs, Sweeper};
use crate::config::{Probes, SceneConfig, Task, WienerMode};
use crate::equilibrium::{dense_capacity, equilibrium, richardson};
use crate::error::{Error, Result};
use crate::geometry::{sample_rotation_body, Point, PointCloud};
use crate::kelvin::{
    check_involution, check_kelvin_energy, check_kelvin_mass, check_kelvin_potential, dirac_balayage_duality, random_measure,
    KelvinContext,
};
use crate::kernel::{potential_on_cloud, DiscreteMeasure};
use crate::report::{cell, envelope, fcell, write_atomic, write_json, Table};
use crate::wiener::{
    capacity_finiteness_series, classify_point, equilibrium_existence_series, shell_capacities, SeriesDiagnostic, Verdict,
};
use crate::Setup;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "riesz", version, about = "Riesz balayage, capacities and Wiener-type series on point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium measures and capacities along a ladder.
    Capacity(Opts),
    /// Balayage of a measure onto a target ladder.
    Balayage(Opts),
    /// Shell-capacity series and verdicts.
    Wiener(Opts),
    /// Kelvin identities and the Dirac balayage duality.
    KelvinCheck(Opts),
    /// Mass deficit of balayage over truncations.
    MassDeficit(Opts),
    /// Runs whatever task the config names.
    Run(Opts),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Opts {
    /// Config file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<String>,
    /// Number of ladder levels to use.
    #[arg(long)]
    pub level: Option<usize>,
    /// Solver tolerance, overriding the config.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Diagonal factor β, overriding the config.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Balayage: compare E(μ, λ^A) with E(μ^A, λ).
    #[arg(long)]
    pub check_symmetry: bool,
    /// Balayage: compare μ^A with the superposed Dirac sweeps.
    #[arg(long)]
    pub check_superposition: bool,
    /// Balayage: compare μ^Q with (μ^A)^Q.
    #[arg(long)]
    pub check_restriction: bool,
    /// Capacity: dense Kw = 1 solve on the finest level.
    #[arg(long)]
    pub check_dense: bool,
    /// Exit with code 3 when a verdict is inconclusive.
    #[arg(long)]
    pub require_conclusive: bool,
}

impl Command {
    fn parts(&self) -> (Option<&'static str>, &Opts) {
        match self {
            Command::Capacity(o) => (Some("capacity"), o),
            Command::Balayage(o) => (Some("balayage"), o),
            Command::Wiener(o) => (Some("wiener"), o),
            Command::KelvinCheck(o) => (Some("kelvin_check"), o),
            Command::MassDeficit(o) => (Some("mass_deficit"), o),
            Command::Run(o) => (None, o),
        }
    }
}

/// Result of one command before it is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub tables: Vec<Table>,
    pub inconclusive: bool,
}

/// Settings echoed in every report.
#[derive(Debug, Serialize)]
struct EchoSettings<'a> {
    setup: Setup,
    level: Option<usize>,
    options: &'a Opts,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Messages go to stderr; the report path goes to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((path, inconclusive)) => {
            println!("{}", path.display());
            let (_, opts) = cli.command.parts();
            if inconclusive && opts.require_conclusive {
                eprintln!("riesz: verdict inconclusive");
                EXIT_INCONCLUSIVE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("riesz: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}

/// Runs a parsed command, writes its files and returns the JSON report path
/// and whether a verdict came out inconclusive.
pub fn execute(command: &Command) -> Result<(PathBuf, bool)> {
    let (expected, opts) = command.parts();
    let cfg = SceneConfig::load(&opts.config)?.with_overrides(opts.tol, opts.beta, opts.out.clone())?;
    if let Some(name) = expected {
        if cfg.task.name() != name {
            return Err(Error::Config(format!("config task is '{}', not '{name}'", cfg.task.name())));
        }
    }
    if opts.level == Some(0) {
        return Err(Error::Config("--level must be at least 1".into()));
    }
    let outcome = match opts.threads {
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_task(&cfg, opts)),
        None => run_task(&cfg, opts),
    }?;
    let dir = Path::new(&cfg.output.dir);
    let path = dir.join(format!("{}.json", cfg.task.name()));
    write_json(&path, &outcome.report)?;
    if cfg.output.csv {
        for t in &outcome.tables {
            write_atomic(&dir.join(format!("{}.csv", t.name)), &t.to_bytes()?)?;
        }
    }
    Ok((path, outcome.inconclusive))
}

/// Runs the config's task without writing anything.
pub fn run_task(cfg: &SceneConfig, opts: &Opts) -> Result<Outcome> {
    let setup = cfg.setup()?;
    let (result, tables, inconclusive) = match &cfg.task {
        Task::Capacity { set, probes } => capacity_task(cfg, &setup, opts, set, probes)?,
        Task::Balayage { measure, target, probes, lambda, subset } => {
            balayage_task(cfg, &setup, opts, measure, target, probes, lambda.as_deref(), subset.as_deref())?
        }
        Task::Wiener { set, mode, center, q, k_min, k_max, truncations } => {
            wiener_task(cfg, &setup, opts, set, *mode, center, *q, *k_min..=*k_max, truncations)?
        }
        Task::KelvinCheck { center, measure, seed, target, probes } => {
            kelvin_task(cfg, &setup, opts, center, measure.as_deref(), *seed, target, probes)?
        }
        Task::MassDeficit { body, source, truncations } => mass_deficit_task(cfg, &setup, opts, body, source, truncations)?,
    };
    let settings = EchoSettings { setup, level: opts.level, options: opts };
    Ok(Outcome { report: envelope(cfg.task.name(), &settings, cfg, result)?, tables, inconclusive })
}

type TaskOutput = (Value, Vec<Table>, bool);

fn resolve_probes(probes: &Probes, target: &PointCloud, mu: Option<&DiscreteMeasure>) -> Vec<Point> {
    match probes {
        Probes::Default => default_probes(target, mu),
        Probes::Points(p) => p.clone(),
    }
}

fn finest(levels: &[Arc<PointCloud>]) -> &Arc<PointCloud> {
    levels.last().expect("sets resolve to at least one level")
}

fn capacity_task(cfg: &SceneConfig, setup: &Setup, opts: &Opts, set: &str, probes: &Probes) -> Result<TaskOutput> {
    let levels = cfg.resolve_set(set, opts.level)?;
    let probes = resolve_probes(probes, finest(&levels), None);
    let mut rows = Vec::new();
    let mut table = Table::new(
        "capacity",
        &["level", "node_count", "max_spacing", "capacity", "energy", "min_support_potential", "max_support_potential", "max_probe_potential"],
    );
    let mut last = None;
    for (l, cloud) in levels.iter().enumerate() {
        let eq = equilibrium(setup, cloud, &probes)?;
        let s = eq.potential_stats;
        table.push(vec![
            cell(l),
            cell(cloud.len()),
            fcell(cloud.max_spacing()),
            fcell(eq.capacity),
            fcell(eq.energy),
            fcell(s.min_support),
            fcell(s.max_support),
            fcell(s.max_probe),
        ]);
        rows.push(json!({
            "level": l,
            "node_count": cloud.len(),
            "max_spacing": cloud.max_spacing(),
            "capacity": eq.capacity,
            "energy": eq.energy,
            "potential_stats": s,
            "interior_mass_fraction": eq.interior_mass_fraction,
            "kkt": eq.kkt,
            "iterations": eq.iterations,
        }));
        last = Some(eq);
    }
    let eq = last.expect("at least one level");
    let caps: Vec<f64> = rows.iter().map(|r| r["capacity"].as_f64().unwrap_or(f64::NAN)).collect();
    let h: Vec<f64> = levels.iter().map(|c| c.max_spacing()).collect();
    let diffs: Vec<f64> = caps.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d <= 0.0) || diffs.iter().all(|d| *d >= 0.0);
    let dense = if opts.check_dense { Some(dense_capacity(setup, finest(&levels))?) } else { None };
    let cloud = finest(&levels);
    let mut nodes = Table::new("equilibrium", &["node", "tag", "weight", "potential"]);
    for i in 0..cloud.len() {
        let tag = serde_json::to_value(cloud.tags()[i])?;
        nodes.push(vec![cell(i), tag.as_str().unwrap_or("").to_string(), fcell(eq.gamma.weights()[i]), fcell(eq.node_potentials[i])]);
    }
    let result = json!({
        "set": set,
        "levels": rows,
        "extrapolated": (caps.len() >= 2).then(|| richardson(&h, &caps)),
        "monotone": monotone,
        "dense_capacity": dense,
        "probe_count": probes.len(),
    });
    Ok((result, vec![table, nodes], false))
}

#[allow(clippy::too_many_arguments)]
fn balayage_task(
    cfg: &SceneConfig,
    setup: &Setup,
    opts: &Opts,
    measure: &str,
    target: &str,
    probes: &Probes,
    lambda: Option<&str>,
    subset: Option<&str>,
) -> Result<TaskOutput> {
    let mu = cfg.resolve_measure(setup, measure)?;
    let levels = cfg.resolve_set(target, opts.level)?;
    let probes = resolve_probes(probes, finest(&levels), Some(&mu));
    let lambda = match (opts.check_symmetry, lambda) {
        (true, Some(l)) => Some(cfg.resolve_measure(setup, l)?),
        (true, None) => return Err(Error::Config("--check-symmetry needs task.lambda".into())),
        _ => None,
    };
    let subsets = match (opts.check_restriction, subset) {
        (true, Some(s)) => Some(cfg.resolve_set(s, opts.level)?),
        (true, None) => return Err(Error::Config("--check-restriction needs task.subset".into())),
        _ => None,
    };
    let sources: Vec<(Point, f64)> = mu.atoms().map(|(p, w)| (p.to_vec(), w)).collect();
    let mut table = Table::new(
        "balayage_levels",
        &["level", "node_count", "max_spacing", "swept_mass", "deficit_ratio", "potential_match", "domination_excess"],
    );
    let mut rows = Vec::new();
    let mut last = None;
    for (l, cloud) in levels.iter().enumerate() {
        let sweeper = Sweeper::new(setup, cloud)?;
        let res = sweeper.sweep(&mu, &probes)?;
        table.push(vec![
            cell(l),
            cell(cloud.len()),
            fcell(cloud.max_spacing()),
            fcell(res.swept_mass),
            fcell(res.deficit_ratio()),
            fcell(res.potential_match),
            fcell(res.domination_excess),
        ]);
        let symmetry = lambda.as_ref().map(|lam| check_symmetry(setup, &mu, lam, cloud)).transpose()?;
        let superposition = if opts.check_superposition { Some(superpose_diracs(setup, &sources, cloud, &probes)?) } else { None };
        let restriction = match &subsets {
            Some(qs) => Some(check_restriction(setup, &mu, cloud, &qs[l.min(qs.len() - 1)], &probes)?),
            None => None,
        };
        rows.push(json!({
            "level": l,
            "node_count": cloud.len(),
            "max_spacing": cloud.max_spacing(),
            "source_mass": res.source_mass,
            "swept_mass": res.swept_mass,
            "deficit_ratio": res.deficit_ratio(),
            "potential_match": res.potential_match,
            "domination_excess": res.domination_excess,
            "b_norm": res.b_norm,
            "kkt": res.kkt,
            "iterations": res.iterations,
            "symmetry": symmetry,
            "superposition": superposition,
            "restriction": restriction,
        }));
        last = Some(res);
    }
    let res = last.expect("at least one level");
    let cloud = finest(&levels);
    let u_mu = potential_on_cloud(&setup.model, &mu, cloud)?;
    let u_swept = potential_on_cloud(&setup.model, &res.swept, cloud)?;
    let mut nodes = Table::new("balayage", &["node", "weight", "source_potential", "swept_potential"]);
    for i in 0..cloud.len() {
        nodes.push(vec![cell(i), fcell(res.swept.weights()[i]), fcell(u_mu[i]), fcell(u_swept[i])]);
    }
    let probe_rows: Vec<Value> = probes
        .iter()
        .zip(&res.probes)
        .map(|(p, v)| json!({"point": p, "source": v.source, "swept": v.swept, "on_source": v.on_source}))
        .collect();
    let result = json!({ "measure": measure, "target": target, "levels": rows, "probes": probe_rows });
    Ok((result, vec![table, nodes], false))
}

fn series_table(name: &str, rows: &[(Option<f64>, &SeriesDiagnostic)]) -> Table {
    let mut t = Table::new(name, &["x1_max", "k", "node_count", "c_k", "term", "partial_sum"]);
    for (x1, s) in rows {
        for (k, count, c, term, sum) in s.rows() {
            t.push(vec![x1.map(fcell).unwrap_or_default(), cell(k), cell(count), fcell(c), fcell(term), fcell(sum)]);
        }
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn wiener_task(
    cfg: &SceneConfig,
    setup: &Setup,
    opts: &Opts,
    set: &str,
    mode: WienerMode,
    center: &[f64],
    q: f64,
    ks: std::ops::RangeInclusive<i32>,
    truncations: &[f64],
) -> Result<TaskOutput> {
    let clouds: Vec<(Option<f64>, Arc<PointCloud>)> = if truncations.is_empty() {
        vec![(None, finest(&cfg.resolve_set(set, opts.level)?).clone())]
    } else {
        let (spec, levels) = cfg.rotation_body(set)?;
        let level = levels[opts.level.unwrap_or(levels.len()).min(levels.len()) - 1];
        truncations
            .iter()
            .map(|&t| Ok((Some(t), Arc::new(sample_rotation_body(&spec.with_x1_max(t), level)?))))
            .collect::<Result<_>>()?
    };
    match mode {
        WienerMode::Existence => {
            let mut runs = Vec::new();
            let mut inconclusive = false;
            for (x1, cloud) in &clouds {
                let decomp = shell_capacities(setup, cloud, center, q, ks.clone())?;
                let existence = equilibrium_existence_series(&decomp)?;
                let finiteness = capacity_finiteness_series(&decomp)?;
                inconclusive = existence.verdict == Verdict::Inconclusive;
                runs.push((*x1, cloud.len(), existence, finiteness));
            }
            let t1 = series_table("wiener", &runs.iter().map(|r| (r.0, &r.2)).collect::<Vec<_>>());
            let t2 = series_table("wiener_finiteness", &runs.iter().map(|r| (r.0, &r.3)).collect::<Vec<_>>());
            let result = json!({
                "mode": mode,
                "set": set,
                "runs": runs.iter().map(|(x1, n, e, f)| json!({
                    "x1_max": x1, "node_count": n, "existence": e, "finiteness": f,
                })).collect::<Vec<_>>(),
                "verdict": runs.last().map(|r| r.2.verdict),
            });
            Ok((result, vec![t1, t2], inconclusive))
        }
        WienerMode::Regularity => {
            let mut runs = Vec::new();
            for (x1, cloud) in &clouds {
                runs.push((*x1, classify_point(setup, cloud, center, q, ks.clone())?));
            }
            let last = &runs.last().expect("at least one cloud").1;
            let inconclusive = last.regularity == crate::wiener::Regularity::Inconclusive;
            let t1 = series_table("wiener", &runs.iter().map(|r| (r.0, &r.1.series)).collect::<Vec<_>>());
            let t2 = series_table("wiener_inverted", &runs.iter().map(|r| (r.0, &r.1.inverted_series)).collect::<Vec<_>>());
            let result = json!({
                "mode": mode,
                "set": set,
                "runs": runs.iter().map(|(x1, c)| json!({"x1_max": x1, "classification": c})).collect::<Vec<_>>(),
                "regularity": last.regularity,
            });
            Ok((result, vec![t1, t2], inconclusive))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn kelvin_task(
    cfg: &SceneConfig,
    setup: &Setup,
    opts: &Opts,
    center: &[f64],
    measure: Option<&str>,
    seed: u64,
    target: &str,
    probes: &Probes,
) -> Result<TaskOutput> {
    let ctx = KelvinContext::new(center.to_vec(), setup.model.params)?;
    let (nu, mu) = match measure {
        Some(m) => {
            let nu = cfg.resolve_measure(setup, m)?;
            let mu = random_measure(center, 100, 0.5, 3.0, seed)?;
            (nu, mu)
        }
        None => (random_measure(center, 100, 0.5, 3.0, seed)?, random_measure(center, 100, 0.5, 3.0, seed.wrapping_add(1))?),
    };
    let levels = cfg.resolve_set(target, opts.level)?;
    let probes = resolve_probes(probes, finest(&levels), None);
    let identity_probes: Vec<Point> = probes.iter().filter(|p| p.as_slice() != center).cloned().collect();
    let identities = json!({
        "involution": check_involution(&ctx, &nu)?,
        "mass": check_kelvin_mass(&ctx, &nu)?,
        "potential": check_kelvin_potential(&ctx, &nu, &identity_probes)?,
        "energy": check_kelvin_energy(&ctx, &mu, &nu)?,
    });
    let mut table = Table::new("kelvin_duality", &["level", "node_count", "direct_mass", "kelvin_mass", "mass_gap", "potential_gap"]);
    let mut rows = Vec::new();
    for (l, cloud) in levels.iter().enumerate() {
        let d = dirac_balayage_duality(setup, center, cloud, &probes)?;
        table.push(vec![cell(l), cell(cloud.len()), fcell(d.direct_mass), fcell(d.kelvin_mass), fcell(d.mass_gap), fcell(d.potential_gap)]);
        rows.push(json!({"level": l, "node_count": cloud.len(), "duality": d}));
    }
    let result = json!({ "center": center, "identities": identities, "duality": rows });
    Ok((result, vec![table], false))
}

fn mass_deficit_task(cfg: &SceneConfig, setup: &Setup, opts: &Opts, body: &str, source: &str, truncations: &[f64]) -> Result<TaskOutput> {
    let mu = cfg.resolve_measure(setup, source)?;
    let (spec, levels) = cfg.rotation_body(body)?;
    let level = levels[opts.level.unwrap_or(levels.len()).min(levels.len()) - 1];
    let mut table = Table::new("mass_deficit", &["x1_max", "node_count", "source_mass", "swept_mass", "deficit_ratio"]);
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &t in truncations {
        let cloud = Arc::new(sample_rotation_body(&spec.with_x1_max(t), level)?);
        let d = mass_deficit(setup, &mu, &cloud)?;
        table.push(vec![fcell(t), cell(cloud.len()), fcell(d.source_mass), fcell(d.swept_mass), fcell(d.deficit_ratio)]);
        rows.push(json!({"x1_max": t, "node_count": cloud.len(), "deficit": d}));
        ratios.push(d.deficit_ratio);
    }
    let result = json!({
        "body": body,
        "source": source,
        "truncations": rows,
        "strictly_decreasing": ratios.windows(2).all(|w| w[1] < w[0]),
        "min_deficit_ratio": ratios.iter().copied().fold(f64::INFINITY, f64::min),
    });
    Ok((result, vec![table], false))
}
