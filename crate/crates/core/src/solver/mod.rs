//! Time stepping by Strang splitting around the exact linear Klein–Gordon
//! flow, an adaptive-step driver with blowup detection, the spatially
//! constant ODE oracle, and the initial-data library.

mod data;
mod oracle;
mod step;

pub use data::{initial_data, natural_time_scale, InitialData};
pub use oracle::{gauss_kronrod, lifespan_upper, ode_oracle, OdeSolution};
pub use step::{linear_propagator, nonlinear_kick, strang_step};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::State;
use crate::series::DiagnosticSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dealias {
    #[default]
    None,
    Pad2x,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    /// `dt ≤ cfl_safety·h`.
    pub cfl_safety: f64,
    /// `dt = dt_init·min(1, θ/‖u‖_∞^{p/2})`.
    pub theta: f64,
    pub blowup_threshold: f64,
    pub t_max: f64,
    pub snapshot_stride: usize,
    #[serde(default)]
    pub dealias: Dealias,
}

impl SolverConfig {
    pub fn new(dt_init: f64, t_max: f64) -> Self {
        Self {
            dt_init,
            dt_min: dt_init * 1e-12,
            cfl_safety: 1.0,
            theta: 1.0,
            blowup_threshold: 1e8,
            t_max,
            snapshot_stride: 1,
            dealias: Dealias::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init.is_finite()) {
            return domain(format!("need 0 < dt_min ({}) < dt_init ({})", self.dt_min, self.dt_init));
        }
        if !(self.blowup_threshold > 1.0) {
            return domain(format!("blowup_threshold {} must exceed 1", self.blowup_threshold));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return domain(format!("t_max {} must be positive", self.t_max));
        }
        if !(self.theta > 0.0 && self.cfl_safety > 0.0) {
            return domain("theta and cfl_safety must be positive");
        }
        if self.snapshot_stride == 0 {
            return domain("snapshot_stride must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTMax,
    BlowupDetected,
    DtUnderflow,
    /// A non-finite value appeared; the last snapshot is the last good state.
    Corruption,
}

/// A pure observer evaluated on stored states.
#[derive(Clone)]
pub struct Monitor {
    pub name: String,
    pub f: Arc<dyn Fn(&State) -> f64 + Send + Sync>,
}

impl Monitor {
    pub fn new(name: impl Into<String>, f: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Monitor({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub termination: Termination,
    /// Monitor series, sampled at the stored snapshots.
    pub series: Vec<DiagnosticSeries>,
    /// `‖u‖_∞` after every step.
    pub sup_norm: DiagnosticSeries,
    pub steps: usize,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&DiagnosticSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Index of the snapshot at time `t` (relative tolerance 1e-9).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.snapshots.iter().position(|s| (s.time - t).abs() <= tol)
    }
}

fn record(traj: &mut Trajectory, state: &State, monitors: &[Monitor]) {
    for (series, m) in traj.series.iter_mut().zip(monitors) {
        series.push(state.time, (m.f)(state));
    }
    traj.snapshots.push(state.clone());
}

/// Integrates until `t_max`, a blowup-threshold crossing, or `dt` underflow.
pub fn evolve(initial: &State, config: &SolverConfig, monitors: &[Monitor]) -> Result<Trajectory> {
    config.validate()?;
    let p = initial.physics.exponent;
    let h = initial.grid().spacing();
    let mut traj = Trajectory {
        snapshots: Vec::new(),
        termination: Termination::ReachedTMax,
        series: monitors.iter().map(|m| DiagnosticSeries::new(m.name.clone())).collect(),
        sup_norm: DiagnosticSeries::new("sup_norm"),
        steps: 0,
    };
    let mut state = initial.clone();
    let mut sup = state.u.max_abs();
    traj.sup_norm.push(state.time, sup);
    record(&mut traj, &state, monitors);
    let t_end = config.t_max;
    let end_tol = 1e-12 * t_end.abs().max(1.0);
    loop {
        let remaining = t_end - state.time;
        if remaining <= end_tol {
            traj.termination = Termination::ReachedTMax;
            break;
        }
        let adapt = if sup > 0.0 { (config.theta / sup.powf(0.5 * p)).min(1.0) } else { 1.0 };
        let dt_nominal = (config.dt_init * adapt).min(config.cfl_safety * h);
        if dt_nominal < config.dt_min {
            traj.termination = Termination::DtUnderflow;
            break;
        }
        let dt = dt_nominal.min(remaining);
        let next = match step::strang_with(&state, dt, config.dealias) {
            Ok(s) => s,
            Err(Error::KickOverflow { .. }) => {
                traj.termination = Termination::BlowupDetected;
                break;
            }
            Err(Error::Corruption { .. }) => {
                traj.termination = Termination::Corruption;
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        traj.steps += 1;
        sup = state.u.max_abs();
        traj.sup_norm.push(state.time, sup);
        if sup >= config.blowup_threshold {
            record(&mut traj, &state, monitors);
            traj.termination = Termination::BlowupDetected;
            return Ok(traj);
        }
        if traj.steps % config.snapshot_stride == 0 {
            record(&mut traj, &state, monitors);
        }
    }
    if traj.last().time != state.time {
        record(&mut traj, &state, monitors);
    }
    Ok(traj)
}
