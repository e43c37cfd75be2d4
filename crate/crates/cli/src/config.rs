//! Scenario files.
//!
//! Keys and units:
//!
//! - `seed`: unsigned 64-bit, drives every random choice (synthetic families).
//! - `[grid]`: `dim` (1..=3), `n` (points per axis, power of two ≥ 8),
//!   `box_length` (side `L` of the periodic box, length units).
//! - `[physics]`: `mass` (`m`, inverse length), `exponent` (`p`), optional
//!   `coupling` (1 focusing, 0 linear). `m` and `p` have no defaults.
//! - `[data]`: initial data, `kind` plus the parameters of that kind; lengths
//!   in length units, amplitudes dimensionless.
//! - `[solver]`: `dt_init`, `t_max` (time units) are required; `dt_min`,
//!   `cfl_safety`, `theta`, `blowup_threshold`, `snapshot_stride`, `dealias`
//!   are optional.
//! - `[[audits]]`: `kind = "tensors" | "cones" | "blowup" | "profiles"`.
//! - `[output]`: `directory`, `stride` (CSV row stride), `save_snapshots`.
//! - `[sweep]`: lists of `exponents`, `masses`, `sizes` to combine.
//! - `[decompose]`: a synthetic family for `decompose` without a stored run.

use std::fmt;
use std::path::PathBuf;

use nlkg::blowup::FitOptions;
use nlkg::cones::{ConeSpec, Orientation, BOX_MARGIN_CELLS};
use nlkg::conslaws::TensorKind;
use nlkg::grid::{GridSpec, Physics, Point, State};
use nlkg::norms::{critical_exponent, CriticalParams, Regime};
use nlkg::profiles::SyntheticSpec;
use nlkg::solver::{initial_data, Dealias, InitialData, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub data: InitialData,
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audits: Vec<AuditSpec>,
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub box_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub mass: f64,
    pub exponent: f64,
    #[serde(default = "focusing")]
    pub coupling: f64,
}

fn focusing() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt_init: f64,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_safety: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    #[serde(default)]
    pub dealias: Dealias,
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.dt_init, self.t_max);
        if let Some(v) = self.dt_min {
            c.dt_min = v;
        }
        if let Some(v) = self.cfl_safety {
            c.cfl_safety = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = self.blowup_threshold {
            c.blowup_threshold = v;
        }
        if let Some(v) = self.snapshot_stride {
            c.snapshot_stride = v;
        }
        c.dealias = self.dealias;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditSpec {
    Tensors {
        #[serde(default = "all_tensors")]
        tensors: Vec<TensorKind>,
        /// Spatial origin of the weights; the box centre when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        apex: Option<Vec<f64>>,
        /// Cone time is `t - apex_time`; must precede the first snapshot.
        #[serde(default = "default_apex_time")]
        apex_time: f64,
        /// `[t0, t1]` for the charge-slab identity.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slab: Option<[f64; 2]>,
    },
    Cones {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vertex: Option<Vec<f64>>,
        vertex_time: f64,
        top_time: f64,
        orientation: Orientation,
        #[serde(default)]
        t_floor: f64,
        /// `[t0, t1]` solver times for the energy-flux identity.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flux: Option<[f64; 2]>,
    },
    Blowup {
        #[serde(default)]
        fit: FitSection,
        /// Tolerance for the Cauchy–Schwarz and concavity checks.
        #[serde(default = "default_concavity_tol")]
        concavity_tol: f64,
        /// Radius `R` of the truncated-mass identity, when wanted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncated_radius: Option<f64>,
        /// `|u|` level whose first-crossing times estimate the blowup surface.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        surface_threshold: Option<f64>,
    },
    Profiles {
        #[serde(default = "default_j_max")]
        j_max: usize,
        tol: f64,
    },
}

fn all_tensors() -> Vec<TensorKind> {
    TensorKind::ALL.to_vec()
}

fn default_apex_time() -> f64 {
    -1.0
}

fn default_concavity_tol() -> f64 {
    1e-6
}

fn default_j_max() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub tail: usize,
    pub growth_floor: f64,
    pub gap_factor: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let o = FitOptions::default();
        Self { tail: o.tail, growth_floor: o.growth_floor, gap_factor: o.gap_factor }
    }
}

impl FitSection {
    pub fn options(&self) -> FitOptions {
        FitOptions { tail: self.tail, growth_floor: self.growth_floor, gap_factor: self.gap_factor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub save_snapshots: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    pub bubbles: Vec<nlkg::profiles::SyntheticBubble>,
    pub separations: Vec<f64>,
    #[serde(default)]
    pub noise: f64,
}

impl DecomposeSection {
    pub fn synthetic(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec { bubbles: self.bubbles.clone(), separations: self.separations.clone(), noise: self.noise, seed }
    }
}

/// A validation failure, naming the precondition that does not hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub precondition: String,
    pub detail: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "precondition `{}` violated: {}", self.precondition, self.detail)
    }
}

impl std::error::Error for ConfigError {}

fn violated(precondition: &str, detail: impl fmt::Display) -> ConfigError {
    ConfigError { precondition: precondition.into(), detail: detail.to_string() }
}

/// Everything derived from a valid configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: GridSpec,
    pub physics: Physics,
    pub critical: CriticalParams,
    pub solver: SolverConfig,
    pub initial: State,
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    toml::from_str(text).map_err(|e| violated("config.syntax", e.message()))
}

pub fn point(grid: &GridSpec, coords: &Option<Vec<f64>>, key: &str) -> Result<Point, ConfigError> {
    match coords {
        Some(c) => grid.point(c).map_err(|e| violated(key, e)),
        None => Ok([0.0; 3]),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        let g = self.grid;
        let grid = GridSpec::new(g.dim, g.n, g.box_length).map_err(|e| violated("grid", e))?;
        let ph = self.physics;
        let physics = Physics { mass: ph.mass, exponent: ph.exponent, coupling: ph.coupling };
        physics.validate(g.dim).map_err(|e| violated("physics", e))?;
        let critical = critical_exponent(g.dim, ph.exponent).map_err(|e| violated("physics.exponent", e))?;
        let solver = self.solver.to_config();
        solver.validate().map_err(|e| violated("solver", e))?;
        if self.output.stride == 0 {
            return Err(violated("output.stride", "must be at least 1"));
        }
        for (i, a) in self.audits.iter().enumerate() {
            self.validate_audit(a, &grid, &critical).map_err(|mut e| {
                e.precondition = format!("audits[{i}].{}", e.precondition);
                e
            })?;
        }
        if let Some(s) = &self.sweep {
            if s.exponents.is_empty() && s.masses.is_empty() && s.sizes.is_empty() {
                return Err(violated("sweep", "needs at least one of exponents, masses, sizes"));
            }
        }
        let initial = initial_data(&grid, physics, &self.data).map_err(|e| violated("data", e))?;
        Ok(Resolved { grid, physics, critical, solver, initial })
    }

    fn validate_audit(&self, a: &AuditSpec, grid: &GridSpec, cp: &CriticalParams) -> Result<(), ConfigError> {
        match a {
            AuditSpec::Tensors { tensors, apex, apex_time, slab } => {
                point(grid, apex, "apex")?;
                if tensors.iter().any(|k| k.is_time_weighted()) && !(*apex_time < 0.0) {
                    return Err(violated("apex_time", "time-weighted tensors need apex_time < 0 (before the first snapshot)"));
                }
                if tensors.contains(&TensorKind::Combined) && cp.regime != Regime::SubConformal {
                    return Err(violated("tensors", "the combined tensor needs a sub-conformal exponent"));
                }
                if let Some([t0, t1]) = slab {
                    if !(t0 < t1) {
                        return Err(violated("slab", "needs t0 < t1"));
                    }
                }
            }
            AuditSpec::Cones { vertex, top_time, t_floor, flux, vertex_time, .. } => {
                point(grid, vertex, "vertex")?;
                if !(*top_time > 0.0 && *top_time + BOX_MARGIN_CELLS * grid.spacing() <= 0.5 * grid.box_length()) {
                    return Err(violated(
                        "top_time",
                        format!("need 0 < top_time and top_time + {BOX_MARGIN_CELLS}h <= L/2 = {}", 0.5 * grid.box_length()),
                    ));
                }
                if !(*t_floor >= 0.0 && t_floor < top_time) {
                    return Err(violated("t_floor", "need 0 <= t_floor < top_time"));
                }
                if !vertex_time.is_finite() {
                    return Err(violated("vertex_time", "must be finite"));
                }
                if let Some([t0, t1]) = flux {
                    if !(t0 < t1) {
                        return Err(violated("flux", "needs t0 < t1"));
                    }
                }
            }
            AuditSpec::Blowup { fit, concavity_tol, truncated_radius, surface_threshold } => {
                if fit.tail < 3 || !(fit.growth_floor > 1.0) || !(fit.gap_factor >= 1.0) {
                    return Err(violated("fit", "need tail >= 3, growth_floor > 1, gap_factor >= 1"));
                }
                if !(*concavity_tol >= 0.0) {
                    return Err(violated("concavity_tol", "must be nonnegative"));
                }
                if let Some(r) = truncated_radius {
                    if !(*r > 0.0) {
                        return Err(violated("truncated_radius", "must be positive"));
                    }
                }
                if let Some(s) = surface_threshold {
                    if !(*s > 0.0) {
                        return Err(violated("surface_threshold", "must be positive"));
                    }
                }
            }
            AuditSpec::Profiles { j_max, tol } => {
                if *j_max == 0 || !(*tol >= 0.0) {
                    return Err(violated("profiles", "need j_max >= 1 and tol >= 0"));
                }
                if !(0.0..1.0).contains(&cp.s_c) {
                    return Err(violated("physics.exponent", format!("profiles need 0 <= s_c < 1, have {}", cp.s_c)));
                }
            }
        }
        Ok(())
    }

    pub fn cone(&self, grid: &GridSpec) -> Result<Option<ConeSpec>, ConfigError> {
        for a in &self.audits {
            if let AuditSpec::Cones { vertex, vertex_time, top_time, orientation, t_floor, .. } = a {
                let v = point(grid, vertex, "vertex")?;
                let mut c = match orientation {
                    Orientation::Forward => ConeSpec::forward(v, *vertex_time, *top_time),
                    Orientation::Backward => ConeSpec::backward(v, *vertex_time, *top_time),
                };
                c.t_floor = *t_floor;
                return Ok(Some(c));
            }
        }
        Ok(None)
    }
}
