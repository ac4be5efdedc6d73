//! Backward Euler time marching of the heat equation with convective
//! boundaries driven by the gas temperature control.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{FemError, HeatOperators, MassMode, MaterialProperties};
use crate::linsolve::{LinSolveError, PreparedSolver, SolverSettings};
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum HeatError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("heat step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: LinSolveError,
    },
    #[error("invalid heat settings: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSettings {
    pub mass: MassMode,
    pub solver: SolverSettings,
    /// Relative tolerance of the undershoot/overshoot monitor.
    pub positivity_tol: f64,
}

impl Default for HeatSettings {
    fn default() -> Self {
        Self {
            mass: MassMode::Consistent,
            solver: SolverSettings::default(),
            positivity_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatStep {
    pub temperature: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// A nodal value outside the range spanned by the initial state and the
/// controls seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityViolation {
    pub step: usize,
    pub node: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ThermalTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub max_t: Vec<f64>,
    pub min_t: Vec<f64>,
    pub violations: Vec<PositivityViolation>,
}

impl ThermalTrajectory {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_field(&self) -> &[f64] {
        self.fields.last().expect("trajectory holds the initial field")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "time_s", "max_T_C"])?;
        for (n, (t, m)) in self.times.iter().zip(&self.max_t).enumerate() {
            wr.write_record([n.to_string(), t.to_string(), m.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Heat operators and the factorized implicit-step matrix for one mesh,
/// material and step size. Shareable across threads.
#[derive(Debug)]
pub struct HeatSolver {
    ops: HeatOperators,
    capacity_dt: crate::sparse::CsrMatrix,
    solver: PreparedSolver,
    dt: f64,
    t0: f64,
    settings: HeatSettings,
}

impl HeatSolver {
    pub fn new(
        mesh: &Mesh,
        mat: &MaterialProperties,
        dt: f64,
        settings: &HeatSettings,
    ) -> Result<Self, HeatError> {
        if !(settings.positivity_tol >= 0.0) {
            return Err(HeatError::InvalidInput("positivity_tol must be >= 0".into()));
        }
        let ops = HeatOperators::assemble(mesh, mat)?;
        if ops.robin_area == 0.0 {
            log::warn!("no Robin patch: temperature stays at its initial value");
        }
        let (a, capacity_dt) = ops.step_matrices(dt, settings.mass)?;
        let solver = PreparedSolver::new(a, &settings.solver)
            .map_err(|source| HeatError::Solver { step: 0, source })?;
        Ok(Self {
            ops,
            capacity_dt,
            solver,
            dt,
            t0: mat.t0,
            settings: *settings,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.n()
    }

    pub fn operators(&self) -> &HeatOperators {
        &self.ops
    }

    /// One implicit step from `t_prev` with gas temperature `t_e`.
    pub fn step(&self, t_prev: &[f64], t_e: f64) -> Result<HeatStep, HeatError> {
        self.step_n(t_prev, t_e, 1)
    }

    fn step_n(&self, t_prev: &[f64], t_e: f64, n: usize) -> Result<HeatStep, HeatError> {
        if t_prev.len() != self.n_nodes() {
            return Err(FemError::LengthMismatch {
                expected: self.n_nodes(),
                got: t_prev.len(),
            }
            .into());
        }
        let rhs = self.ops.step_rhs(&self.capacity_dt, t_prev, t_e);
        let sol = self
            .solver
            .solve(&rhs, Some(t_prev))
            .map_err(|source| HeatError::Solver { step: n, source })?;
        Ok(HeatStep {
            temperature: sol.x,
            iterations: sol.iterations,
            rel_residual: sol.rel_residual,
        })
    }

    /// Marches from the uniform initial state through one step per control
    /// value; `t_e[n-1]` acts during step n.
    pub fn run(&self, t_e: &[f64]) -> Result<ThermalTrajectory, HeatError> {
        let tr = self.run_from(&vec![self.t0; self.n_nodes()], t_e)?;
        if let Some(w) = tr
            .violations
            .iter()
            .max_by(|a, b| (a.value - a.bound).abs().total_cmp(&(b.value - b.bound).abs()))
        {
            log::warn!(
                "temperature left the attainable range in {} of {} steps; worst {:.6} at node {} in step {} (bound {})",
                tr.violations.len(),
                t_e.len(),
                w.value,
                w.node,
                w.step,
                w.bound
            );
        }
        Ok(tr)
    }

    /// As [`HeatSolver::run`] from an arbitrary initial field; range
    /// violations are recorded but not logged.
    pub fn run_from(&self, initial: &[f64], t_e: &[f64]) -> Result<ThermalTrajectory, HeatError> {
        if t_e.is_empty() {
            return Err(HeatError::InvalidInput("schedule has no steps".into()));
        }
        if let Some(v) = t_e.iter().find(|v| !v.is_finite()) {
            return Err(HeatError::InvalidInput(format!("non-finite control {v}")));
        }
        let stats = |f: &[f64]| {
            f.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        };
        let (lo0, hi0) = stats(initial);
        let mut lo = lo0;
        let mut hi = hi0;
        let mut fields = Vec::with_capacity(t_e.len() + 1);
        let mut times = Vec::with_capacity(t_e.len() + 1);
        let mut max_t = Vec::with_capacity(t_e.len() + 1);
        let mut min_t = Vec::with_capacity(t_e.len() + 1);
        let mut violations = Vec::new();
        fields.push(initial.to_vec());
        times.push(0.0);
        max_t.push(hi0);
        min_t.push(lo0);
        for (i, &te) in t_e.iter().enumerate() {
            let n = i + 1;
            let next = self.step_n(&fields[i], te, n)?.temperature;
            lo = lo.min(te);
            hi = hi.max(te);
            let tol = self.settings.positivity_tol * (hi - lo).max(1.0);
            let worst = next.iter().enumerate().fold(None, |acc: Option<(usize, f64, f64)>, (k, &v)| {
                let ex = if v < lo - tol {
                    lo - v
                } else if v > hi + tol {
                    v - hi
                } else {
                    return acc;
                };
                match acc {
                    Some((_, _, e)) if e >= ex => acc,
                    _ => Some((k, v, ex)),
                }
            });
            if let Some((node, value, _)) = worst {
                let bound = if value < lo { lo } else { hi };
                violations.push(PositivityViolation {
                    step: n,
                    node,
                    value,
                    bound,
                });
            }
            let (a, b) = stats(&next);
            min_t.push(a);
            max_t.push(b);
            times.push(n as f64 * self.dt);
            fields.push(next);
        }
        Ok(ThermalTrajectory {
            times,
            fields,
            max_t,
            min_t,
            violations,
        })
    }

    /// Volume average ∫T / |Ω| using the consistent mass.
    pub fn volume_average(&self, field: &[f64]) -> f64 {
        let m = self.ops.mass.mul_vec(field);
        let total: f64 = m.iter().sum();
        let vol = self.ops.mass.total_sum();
        total / vol
    }

    /// Thermal energy ∫ρc_p T.
    pub fn thermal_energy(&self, field: &[f64]) -> f64 {
        self.ops.mass.mul_vec(field).iter().sum()
    }
}
