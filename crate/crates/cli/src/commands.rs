use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use nlkg::blowup::{
    blowup_surface_estimate, concavity_check, critical_norm_series, detect_and_fit, lower_bound_check, mass_diagnostics,
    truncated_mass,
};
use nlkg::cones::{cone_monitor, energy_flux_check, L_functional, Z_functional};
use nlkg::conslaws::{audit_trajectory, charge_slab_identity, Apex};
use nlkg::grid::{read_state, write_snapshot, write_state, State};
use nlkg::norms::{energy_parts, Regime};
use nlkg::profiles::{bubble_decompose, decoupling_audit, synthetic_family, FunctionFamily};
use nlkg::series::DiagnosticSeries;
use nlkg::solver::{evolve, Monitor, Termination, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{point, AuditSpec, Resolved, ScenarioConfig};
use crate::output::RunDir;

/// Environment variable capping concurrent sweep scenarios.
pub const WORKERS_ENV: &str = "NLKG_WORKERS";

const SNAPSHOT_DIR: &str = "trajectory";

pub fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(crate::config::parse(&text)?)
}

/// Runs `body` inside a fresh run directory; the manifest stays incomplete,
/// with the error recorded, if `body` fails.
fn in_run_dir(root: &Path, cfg: &ScenarioConfig, body: impl FnOnce(&mut RunDir) -> Result<()>) -> Result<()> {
    let mut dir = RunDir::create(root, cfg)?;
    match body(&mut dir) {
        Ok(()) => dir.finish(),
        Err(e) => {
            dir.fail(&format!("{e:#}"))?;
            Err(e)
        }
    }
}

fn standard_monitors() -> Vec<Monitor> {
    vec![
        Monitor::new("energy", |s: &State| energy_parts(s).total()),
        Monitor::new("kinetic", |s: &State| energy_parts(s).kinetic),
        Monitor::new("gradient", |s: &State| energy_parts(s).gradient),
        Monitor::new("potential", |s: &State| energy_parts(s).potential),
        Monitor::new("mass", |s: &State| s.u.dot(&s.u)),
        Monitor::new("charge", |s: &State| s.u.dot(&s.v)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub steps: usize,
    pub snapshots: usize,
    pub final_time: f64,
    pub dim: usize,
    pub exponent: f64,
    pub mass: f64,
    pub s_c: f64,
    pub regime: Regime,
}

fn summarize(traj: &Trajectory, res: &Resolved) -> RunSummary {
    RunSummary {
        termination: traj.termination,
        steps: traj.steps,
        snapshots: traj.snapshots.len(),
        final_time: traj.last().time,
        dim: res.grid.dim(),
        exponent: res.physics.exponent,
        mass: res.physics.mass,
        s_c: res.critical.s_c,
        regime: res.critical.regime,
    }
}

fn simulate_into(cfg: &ScenarioConfig, res: &Resolved, dir: &mut RunDir) -> Result<Trajectory> {
    let traj = evolve(&res.initial, &res.solver, &standard_monitors())?;
    let stride = cfg.output.stride;
    dir.write_aligned("series", &traj.series, stride)?;
    dir.write_series("sup_norm", &traj.sup_norm, stride)?;
    dir.write_json("summary.json", &summarize(&traj, res))?;
    if cfg.output.save_snapshots {
        fs::create_dir_all(dir.path().join(SNAPSHOT_DIR))?;
        for (k, s) in traj.snapshots.iter().enumerate() {
            let stem = format!("snap_{k:05}");
            write_state(&dir.path().join(SNAPSHOT_DIR), &stem, s)?;
            dir.register(&format!("{SNAPSHOT_DIR}/{stem}.u.bin"));
            dir.register(&format!("{SNAPSHOT_DIR}/{stem}.v.bin"));
        }
    }
    Ok(traj)
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let res = cfg.validate()?;
    in_run_dir(out, cfg, |dir| simulate_into(cfg, &res, dir).map(|_| ()))
}

fn tensors_into(cfg: &ScenarioConfig, res: &Resolved, traj: &Trajectory, dir: &mut RunDir, spec: &AuditSpec) -> Result<()> {
    let AuditSpec::Tensors { tensors, apex, apex_time, slab } = spec else {
        return Ok(());
    };
    let apex = Apex::at(point(&res.grid, apex, "apex")?, *apex_time);
    let mut reports = Vec::new();
    for &kind in tensors {
        let report = audit_trajectory(traj, kind, &apex)?;
        let rows: Vec<Vec<f64>> = report
            .times
            .iter()
            .zip(report.residual_l2.iter().zip(&report.residual_linf))
            .map(|(&t, (&l2, &li))| vec![t, l2, li])
            .collect();
        dir.write_table(&format!("tensor_{}", kind.name()), &["time", "residual_l2", "residual_linf"], &rows, cfg.output.stride)?;
        reports.push(report);
    }
    let slab_report = match slab {
        Some([t0, t1]) => Some(charge_slab_identity(traj, *t0, *t1)?),
        None => None,
    };
    dir.write_json("tensors.json", &json!({ "audits": reports, "charge_slab": slab_report }))
}

fn cones_into(cfg: &ScenarioConfig, res: &Resolved, traj: &Trajectory, dir: &mut RunDir, spec: &AuditSpec) -> Result<()> {
    let AuditSpec::Cones { flux, .. } = spec else {
        return Ok(());
    };
    let cone = cfg.cone(&res.grid)?.ok_or_else(|| anyhow!("no cone audit configured"))?;
    let sub = res.critical.regime == Regime::SubConformal;
    let mut rows = Vec::new();
    for s in traj.snapshots.iter().filter(|s| cone.admits(s)) {
        let mut row = vec![s.time, cone.cone_time(s.time), L_functional(s, &cone)?];
        if sub {
            row.push(Z_functional(s, &cone)?);
        }
        rows.push(row);
    }
    let mut columns = vec!["time", "cone_time", "L"];
    if sub {
        columns.push("Z");
    }
    dir.write_table("cone_functionals", &columns, &rows, cfg.output.stride)?;
    for series in cone_monitor(traj, &cone)? {
        dir.write_series(&format!("monitor_{}", series.name), &series, cfg.output.stride)?;
    }
    let flux_report = match flux {
        Some([t0, t1]) => Some(energy_flux_check(traj, &cone, *t0, *t1)?),
        None => None,
    };
    dir.write_json("cones.json", &json!({ "cone": cone, "energy_flux": flux_report }))
}

fn blowup_into(cfg: &ScenarioConfig, res: &Resolved, traj: &Trajectory, dir: &mut RunDir, spec: &AuditSpec) -> Result<()> {
    let AuditSpec::Blowup { fit, concavity_tol, truncated_radius, surface_threshold } = spec else {
        return Ok(());
    };
    let stride = cfg.output.stride;
    let report = detect_and_fit(traj, &fit.options());
    let mass = mass_diagnostics(traj);
    let rows: Vec<Vec<f64>> = (0..mass.times.len())
        .map(|i| vec![mass.times[i], mass.m[i], mass.m_prime[i], mass.m_doubleprime[i], mass.energy[i]])
        .collect();
    dir.write_table("mass", &["time", "M", "M_prime", "M_doubleprime", "energy"], &rows, stride)?;
    let concavity = concavity_check(&mass, *concavity_tol);
    dir.write_series("critical_norm", &critical_norm_series(traj)?, stride)?;

    let x0 = res.grid.position(traj.last().u.argmax_abs());
    if let Some(t_star) = report.t_star {
        dir.write_series("local_lower_bound", &lower_bound_check(traj, t_star, &x0)?, stride)?;
    }
    let truncated = match truncated_radius {
        Some(r) => Some(truncated_mass(traj, *r, &x0)?),
        None => None,
    };
    if let Some(th) = surface_threshold {
        let sigma = blowup_surface_estimate(traj, *th)?;
        write_snapshot(&dir.path().join("surface.bin"), &sigma, traj.last().time, res.physics.mass, res.physics.exponent)?;
        dir.register("surface.bin");
    }
    dir.write_json(
        "blowup.json",
        &json!({ "fit": report, "concavity": concavity, "mass_t0": mass.t0, "truncated_mass": truncated }),
    )
}

fn profiles_into(res: &Resolved, family: &FunctionFamily, dir: &mut RunDir, j_max: usize, tol: f64) -> Result<()> {
    let dec = bubble_decompose(family, &res.critical, j_max, tol)?;
    let gaps = decoupling_audit(&dec, family, &res.critical)?;
    let grid = *family.grid();
    fs::create_dir_all(dir.path().join("profiles"))?;
    let mut bubbles = Vec::new();
    for (j, b) in dec.bubbles.iter().enumerate() {
        let name = format!("profiles/profile_{j:02}.bin");
        write_snapshot(&dir.path().join(&name), &b.profile, 0.0, res.physics.mass, res.physics.exponent)?;
        dir.register(&name);
        let centers: Vec<Vec<f64>> = b.center_points().iter().map(|p| p[..grid.dim()].to_vec()).collect();
        bubbles.push(json!({ "file": name, "centers": centers }));
    }
    let rows: Vec<Vec<f64>> = dec.levels.iter().enumerate().map(|(j, l)| vec![j as f64, l.epsilon, l.sobolev_level]).collect();
    dir.write_table("levels", &["level", "epsilon", "sobolev_level"], &rows, 1)?;
    dir.write_json("decomposition.json", &json!({ "bubbles": bubbles, "gaps": gaps, "extractions": dec.stats }))
}

pub fn audit_tensors(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let res = cfg.validate()?;
    let specs: Vec<&AuditSpec> = cfg.audits.iter().filter(|a| matches!(a, AuditSpec::Tensors { .. })).collect();
    if specs.is_empty() {
        bail!("audit-tensors needs an [[audits]] entry with kind = \"tensors\"");
    }
    in_run_dir(out, cfg, |dir| {
        let traj = simulate_into(cfg, &res, dir)?;
        specs.iter().try_for_each(|s| tensors_into(cfg, &res, &traj, dir, s))
    })
}

pub fn cones(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let res = cfg.validate()?;
    let spec = cfg
        .audits
        .iter()
        .find(|a| matches!(a, AuditSpec::Cones { .. }))
        .ok_or_else(|| anyhow!("cones needs an [[audits]] entry with kind = \"cones\""))?;
    in_run_dir(out, cfg, |dir| {
        let traj = simulate_into(cfg, &res, dir)?;
        cones_into(cfg, &res, &traj, dir, spec)
    })
}

fn read_series(path: &Path) -> Result<Vec<DiagnosticSeries>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut out: Vec<DiagnosticSeries> = headers[1..].iter().map(DiagnosticSeries::new).collect();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec.iter().map(|v| v.parse::<f64>()).collect::<std::result::Result<_, _>>()?;
        for (s, &v) in out.iter_mut().zip(&vals[1..]) {
            s.push(vals[0], v);
        }
    }
    Ok(out)
}

/// Rebuilds a trajectory written by `simulate` with `save_snapshots = true`
/// and `stride = 1`.
pub fn load_trajectory(run: &Path) -> Result<(ScenarioConfig, Trajectory)> {
    let cfg = load(&run.join("config.toml"))?;
    if cfg.output.stride != 1 || !cfg.output.save_snapshots {
        bail!("{} was not written with save_snapshots = true and stride = 1", run.display());
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("summary.json"))?)?;
    let summary: RunSummary = serde_json::from_value(summary["report"].clone())?;
    let mut snapshots = Vec::with_capacity(summary.snapshots);
    for k in 0..summary.snapshots {
        snapshots.push(read_state(&run.join(SNAPSHOT_DIR), &format!("snap_{k:05}"), cfg.physics.coupling)?);
    }
    let series = read_series(&run.join("series.csv"))?;
    let sup_norm = read_series(&run.join("sup_norm.csv"))?.pop().ok_or_else(|| anyhow!("sup_norm.csv has no column"))?;
    Ok((cfg, Trajectory { snapshots, termination: summary.termination, series, sup_norm, steps: summary.steps }))
}

pub fn fit(run: &Path, out: &Path) -> Result<()> {
    let (cfg, traj) = load_trajectory(run)?;
    let res = cfg.validate()?;
    let default_spec = AuditSpec::Blowup {
        fit: Default::default(),
        concavity_tol: 1e-6,
        truncated_radius: None,
        surface_threshold: None,
    };
    let spec = cfg.audits.iter().find(|a| matches!(a, AuditSpec::Blowup { .. })).unwrap_or(&default_spec).clone();
    in_run_dir(out, &cfg, |dir| blowup_into(&cfg, &res, &traj, dir, &spec))
}

/// Decomposes the `u` fields of a stored run, or the synthetic family of the
/// `[decompose]` section when no run is given.
pub fn decompose(cfg_path: Option<&Path>, run: Option<&Path>, out: &Path) -> Result<()> {
    let (cfg, family) = match (run, cfg_path) {
        (Some(run), _) => {
            let (cfg, traj) = load_trajectory(run)?;
            (cfg, FunctionFamily::new(traj.snapshots.into_iter().map(|s| s.u).collect())?)
        }
        (None, Some(path)) => {
            let cfg = load(path)?;
            let res = cfg.validate()?;
            let section = cfg.decompose.clone().ok_or_else(|| anyhow!("config has no [decompose] section"))?;
            let fam = synthetic_family(&res.grid, &section.synthetic(cfg.seed))?.family;
            (cfg, fam)
        }
        (None, None) => bail!("decompose needs --run or --config"),
    };
    let res = cfg.validate()?;
    let (j_max, tol) = cfg
        .audits
        .iter()
        .find_map(|a| match a {
            AuditSpec::Profiles { j_max, tol } => Some((*j_max, *tol)),
            _ => None,
        })
        .ok_or_else(|| anyhow!("decompose needs an [[audits]] entry with kind = \"profiles\""))?;
    in_run_dir(out, &cfg, |dir| profiles_into(&res, &family, dir, j_max, tol))
}

/// Every listed audit that applies to a single trajectory.
fn all_audits(cfg: &ScenarioConfig, res: &Resolved, traj: &Trajectory, dir: &mut RunDir) -> Result<()> {
    for spec in &cfg.audits {
        match spec {
            AuditSpec::Tensors { .. } => tensors_into(cfg, res, traj, dir, spec)?,
            AuditSpec::Cones { .. } => cones_into(cfg, res, traj, dir, spec)?,
            AuditSpec::Blowup { .. } => blowup_into(cfg, res, traj, dir, spec)?,
            AuditSpec::Profiles { j_max, tol } => {
                let fam = FunctionFamily::new(traj.snapshots.iter().map(|s| s.u.clone()).collect())?;
                profiles_into(res, &fam, dir, *j_max, *tol)?;
            }
        }
    }
    Ok(())
}

/// The scenarios of a sweep: the cartesian product of the listed exponents,
/// masses and sizes, with the base value for any list left empty.
pub fn sweep_points(cfg: &ScenarioConfig, root: &Path) -> Result<Vec<ScenarioConfig>> {
    let s = cfg.sweep.as_ref().ok_or_else(|| anyhow!("config has no [sweep] section"))?;
    let or_base = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let exponents = or_base(&s.exponents, cfg.physics.exponent);
    let masses = or_base(&s.masses, cfg.physics.mass);
    let sizes = if s.sizes.is_empty() { vec![cfg.grid.n] } else { s.sizes.clone() };
    let mut out = Vec::new();
    for &p in &exponents {
        for &m in &masses {
            for &n in &sizes {
                let mut c = cfg.clone();
                c.sweep = None;
                c.physics.exponent = p;
                c.physics.mass = m;
                c.grid.n = n;
                c.output.directory = root.join(format!("run_{:03}", out.len()));
                out.push(c);
            }
        }
    }
    Ok(out)
}

pub fn worker_cap() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("{WORKERS_ENV} = {v:?} is not a positive integer"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let points = sweep_points(cfg, out)?;
    let mut resolved = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        resolved.push(p.validate().map_err(|mut e| {
            e.precondition = format!("sweep[{i}].{}", e.precondition);
            e
        })?);
    }
    let workers = worker_cap()?.min(points.len()).max(1);
    in_run_dir(out, cfg, |dir| {
        let next = AtomicUsize::new(0);
        let results: Mutex<BTreeMap<usize, Result<RunSummary, String>>> = Mutex::new(BTreeMap::new());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= points.len() {
                        break;
                    }
                    let (p, res) = (&points[i], &resolved[i]);
                    let mut summary = None;
                    let outcome = in_run_dir(&p.output.directory, p, |d| {
                        let traj = simulate_into(p, res, d)?;
                        all_audits(p, res, &traj, d)?;
                        summary = Some(summarize(&traj, res));
                        Ok(())
                    });
                    let entry = outcome.map(|_| summary.expect("set on success")).map_err(|e| format!("{e:#}"));
                    results.lock().expect("no worker panics while holding the lock").insert(i, entry);
                });
            }
        });
        let results = results.into_inner().expect("workers joined");
        let mut table = Vec::new();
        let mut failures = Vec::new();
        for (i, r) in &results {
            match r {
                Ok(s) => table.push(json!({
                    "run": format!("run_{i:03}"),
                    "exponent": s.exponent,
                    "mass": s.mass,
                    "n": points[*i].grid.n,
                    "s_c": s.s_c,
                    "regime": s.regime,
                    "termination": s.termination,
                    "final_time": s.final_time,
                })),
                Err(e) => failures.push(format!("run_{i:03}: {e}")),
            }
        }
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|r| {
                ["run", "exponent", "mass", "n", "s_c", "regime", "termination", "final_time"]
                    .iter()
                    .map(|k| match &r[*k] {
                        serde_json::Value::String(s) => s.clone(),
                        v => v.to_string(),
                    })
                    .collect()
            })
            .collect();
        dir.write_rows("sweep", &["run", "exponent", "mass", "n", "s_c", "regime", "termination", "final_time"], &rows)?;
        dir.write_json("sweep.json", &json!({ "runs": table, "failures": failures }))?;
        if failures.is_empty() {
            Ok(())
        } else {
            Err(anyhow!("{} sweep runs failed: {}", failures.len(), failures.join("; ")))
        }
    })
}

pub fn default_out(cfg: &ScenarioConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.output.directory.clone())
}
