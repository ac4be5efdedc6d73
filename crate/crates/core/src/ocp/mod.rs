//! The start-up optimal control problem: controls, objective, constraints,
//! initial guesses and finite-difference gradients over the coupled model.

mod model;
mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd::{self, FdOptions, FdScheme};
use crate::sqp::{minimize, Evaluation, Problem, SqpError, SqpResult, SqpSettings};

pub use model::{DirectModel, ForwardModel, ForwardResponse, ResponseModel};
pub use schedule::{ControlSchedule, CONTROLS_HEADER};

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("rate limit {omega_rate_limit} Hz/s cannot reach {omega_final} Hz within {t_f} s")]
    InfeasibleRateLimit {
        omega_rate_limit: f64,
        omega_final: f64,
        t_f: f64,
    },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("forward model failure: {0}")]
    ForwardModelFailure(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sqp(#[from] SqpError),
}

impl OcpError {
    pub(crate) fn forward(e: impl std::fmt::Display) -> Self {
        OcpError::ForwardModelFailure(e.to_string())
    }
}

/// Bounds, terminal targets and rate limit of the start-up problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpProblem {
    pub n_steps: usize,
    pub t_f: f64,
    pub t_e_min: f64,
    pub t_e_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Lower bound on the final gas temperature, °C.
    pub t_e_final: f64,
    /// Required final rotation speed, Hz.
    pub omega_final: f64,
    /// Lower bound on the final peak temperature, °C.
    pub t_final: f64,
    /// Largest acceleration, Hz/s.
    pub omega_rate_limit: f64,
    /// Also bound the deceleration.
    pub symmetric_rate: bool,
    pub stress_scale: f64,
    pub temperature_scale: f64,
    pub omega_scale: f64,
    /// Log-sum-exp smoothing of the max over time, 1/MPa. Experimental.
    pub smooth_max: Option<f64>,
}

impl Default for OcpProblem {
    fn default() -> Self {
        Self {
            n_steps: 20,
            t_f: 1800.0,
            t_e_min: 0.0,
            t_e_max: 1000.0,
            omega_min: 0.0,
            omega_max: 60.0,
            t_e_final: 750.0,
            omega_final: 60.0,
            t_final: 400.0,
            omega_rate_limit: 0.1,
            symmetric_rate: false,
            stress_scale: 1000.0,
            temperature_scale: 1000.0,
            omega_scale: 60.0,
            smooth_max: None,
        }
    }
}

/// Constraint values in scaled units. Equalities vanish at feasibility,
/// inequalities are feasible when ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValues {
    /// Final rotation speed residual.
    pub eq: Vec<f64>,
    /// Final gas temperature slack, final peak temperature slack, then the
    /// rate slacks of steps 1..N (and the deceleration slacks when
    /// symmetric).
    pub ineq: Vec<f64>,
}

impl ConstraintValues {
    pub fn max_violation(&self) -> f64 {
        let worse = |m: f64, v: f64| if v > m { v } else { m };
        let e = self.eq.iter().fold(0.0, |m, v| worse(m, v.abs()));
        self.ineq.iter().fold(e, |m, v| worse(m, -v))
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationRecord {
    pub schedule: ControlSchedule,
    /// Objective, MPa; +∞ when the forward model failed.
    pub j: f64,
    pub constraints: ConstraintValues,
    pub response: Option<ForwardResponse>,
    pub failure: Option<String>,
}

impl EvaluationRecord {
    pub fn from_response(problem: &OcpProblem, schedule: &ControlSchedule, r: ForwardResponse) -> Self {
        Self {
            schedule: schedule.clone(),
            j: problem.objective(&r.max_sigma),
            constraints: problem.constraints(schedule, r.final_max_t()),
            response: Some(r),
            failure: None,
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.failure.is_none() && self.constraints.max_violation() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    LinearRamp,
    HeatFirst,
}

impl std::str::FromStr for GuessKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear-ramp" => Ok(GuessKind::LinearRamp),
            "heat-first" => Ok(GuessKind::HeatFirst),
            other => Err(format!("unknown guess `{other}` (linear-ramp | heat-first)")),
        }
    }
}

impl OcpProblem {
    pub fn validate(&self) -> Result<(), OcpError> {
        let bad = |m: String| Err(OcpError::InvalidProblem(m));
        if self.n_steps == 0 {
            return bad("n_steps must be >= 1".into());
        }
        if !(self.t_f > 0.0) {
            return bad(format!("t_f must be > 0, got {}", self.t_f));
        }
        if !(self.t_e_min < self.t_e_max) || !(self.omega_min < self.omega_max) {
            return bad("bounds need min < max".into());
        }
        if !(self.t_e_min..=self.t_e_max).contains(&self.t_e_final) {
            return bad(format!("t_e_final {} outside the gas temperature bounds", self.t_e_final));
        }
        if !(self.omega_min..=self.omega_max).contains(&self.omega_final) {
            return bad(format!("omega_final {} outside the rotation bounds", self.omega_final));
        }
        if !(self.omega_rate_limit > 0.0) {
            return bad("omega_rate_limit must be > 0".into());
        }
        if [self.stress_scale, self.temperature_scale, self.omega_scale]
            .iter()
            .any(|s| !(*s > 0.0))
        {
            return bad("scales must be > 0".into());
        }
        if let Some(k) = self.smooth_max {
            if !(k > 0.0) {
                return bad("smooth_max must be > 0".into());
            }
        }
        // ramping from rest at the full rate must reach the target
        if self.omega_rate_limit * self.t_f < self.omega_final * (1.0 - 1e-12) {
            return Err(OcpError::InfeasibleRateLimit {
                omega_rate_limit: self.omega_rate_limit,
                omega_final: self.omega_final,
                t_f: self.t_f,
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.n_steps as f64
    }

    pub fn n_vars(&self) -> usize {
        2 * self.n_steps
    }

    pub fn n_ineq(&self) -> usize {
        2 + self.n_steps * if self.symmetric_rate { 2 } else { 1 }
    }

    /// Objective from per-knot peak stresses: the max over time, or its
    /// log-sum-exp smoothing when enabled.
    pub fn objective(&self, max_sigma: &[f64]) -> f64 {
        let m = max_sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self.smooth_max {
            None => m,
            Some(k) => m + max_sigma.iter().map(|s| (k * (s - m)).exp()).sum::<f64>().ln() / k,
        }
    }

    pub fn constraints(&self, s: &ControlSchedule, final_max_t: f64) -> ConstraintValues {
        let n = s.n();
        let dt = s.dt();
        let eq = vec![(s.omega[n - 1] - self.omega_final) / self.omega_scale];
        let mut ineq = vec![
            (s.t_e[n - 1] - self.t_e_final) / self.temperature_scale,
            (final_max_t - self.t_final) / self.temperature_scale,
        ];
        let lim = self.omega_rate_limit * dt;
        let prev = |k: usize| if k == 0 { 0.0 } else { s.omega[k - 1] };
        for k in 0..n {
            ineq.push((lim - (s.omega[k] - prev(k))) / self.omega_scale);
        }
        if self.symmetric_rate {
            for k in 0..n {
                ineq.push((lim + (s.omega[k] - prev(k))) / self.omega_scale);
            }
        }
        ConstraintValues { eq, ineq }
    }

    /// Largest violation of the box bounds, scaled.
    pub fn bound_violation(&self, s: &ControlSchedule) -> f64 {
        let te = s.t_e.iter().map(|&v| {
            ((self.t_e_min - v).max(v - self.t_e_max)).max(0.0) / self.temperature_scale
        });
        let om = s.omega.iter().map(|&v| {
            ((self.omega_min - v).max(v - self.omega_max)).max(0.0) / self.omega_scale
        });
        te.chain(om).fold(0.0, f64::max)
    }

    /// Scaled decision vector `[T_e/T_scale…, ω/ω_scale…]`.
    pub fn to_scaled(&self, s: &ControlSchedule) -> Vec<f64> {
        s.t_e
            .iter()
            .map(|v| v / self.temperature_scale)
            .chain(s.omega.iter().map(|v| v / self.omega_scale))
            .collect()
    }

    pub fn from_scaled(&self, x: &[f64]) -> ControlSchedule {
        let n = self.n_steps;
        ControlSchedule {
            t_e: x[..n].iter().map(|v| v * self.temperature_scale).collect(),
            omega: x[n..2 * n].iter().map(|v| v * self.omega_scale).collect(),
            t_f: self.t_f,
        }
    }

    pub fn scaled_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_steps;
        let mut lo = vec![self.t_e_min / self.temperature_scale; n];
        lo.extend(vec![self.omega_min / self.omega_scale; n]);
        let mut up = vec![self.t_e_max / self.temperature_scale; n];
        up.extend(vec![self.omega_max / self.omega_scale; n]);
        (lo, up)
    }

    pub fn initial_guess(&self, kind: GuessKind) -> Result<ControlSchedule, OcpError> {
        self.validate()?;
        let n = self.n_steps;
        let clip_te = |v: f64| v.clamp(self.t_e_min, self.t_e_max);
        let clip_om = |v: f64| v.clamp(self.omega_min, self.omega_max);
        let frac = |k: usize| k as f64 / n as f64;
        let (t_e, omega) = match kind {
            GuessKind::LinearRamp => (
                (1..=n).map(|k| clip_te(self.t_e_final * frac(k))).collect(),
                (1..=n).map(|k| clip_om(self.omega_final * frac(k))).collect(),
            ),
            GuessKind::HeatFirst => {
                let t_e = (1..=n)
                    .map(|k| clip_te(if k < n { self.t_e_max } else { self.t_e_final }))
                    .collect();
                let dt = self.dt();
                // idle, then the steepest admissible ramp ending at t_f
                let omega = (1..=n)
                    .map(|k| {
                        let remaining = (n - k) as f64 * dt;
                        clip_om((self.omega_final - self.omega_rate_limit * remaining).max(0.0))
                    })
                    .collect();
                (t_e, omega)
            }
        };
        ControlSchedule::new(t_e, omega, self.t_f)
    }
}

/// Runs the model and assembles the objective and constraints. Model
/// failures produce a flagged record with J = +∞.
pub fn evaluate(model: &dyn ForwardModel, problem: &OcpProblem, schedule: &ControlSchedule) -> EvaluationRecord {
    match model.simulate(schedule) {
        Ok(r) => EvaluationRecord::from_response(problem, schedule, r),
        Err(e) => EvaluationRecord {
            schedule: schedule.clone(),
            j: f64::INFINITY,
            constraints: problem.constraints(schedule, f64::NEG_INFINITY),
            response: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Finite-difference derivatives with respect to the scaled decision
/// vector: row 0 is ∂J (MPa per scaled unit), then the equality and
/// inequality rows.
#[derive(Debug, Clone)]
pub struct OcpGradient {
    pub objective: Vec<f64>,
    pub eq: Vec<Vec<f64>>,
    pub ineq: Vec<Vec<f64>>,
    pub evaluations: usize,
    pub failed: Vec<usize>,
}

pub fn fd_gradient(
    model: &dyn ForwardModel,
    problem: &OcpProblem,
    schedule: &ControlSchedule,
    base: &EvaluationRecord,
    step: f64,
    scheme: FdScheme,
) -> OcpGradient {
    let x = problem.to_scaled(schedule);
    let f = |xp: &[f64]| {
        let r = evaluate(model, problem, &problem.from_scaled(xp));
        match r.failure {
            Some(e) => Err(e),
            None => Ok(record_vector(&r)),
        }
    };
    let f0 = record_vector(base);
    let jac = fd::jacobian(
        &f,
        &x,
        &f0,
        &FdOptions {
            step,
            scheme,
            upper: None,
        },
    );
    let me = base.constraints.eq.len();
    OcpGradient {
        objective: jac.jac[0].clone(),
        eq: jac.jac[1..1 + me].to_vec(),
        ineq: jac.jac[1 + me..].to_vec(),
        evaluations: jac.evaluations,
        failed: jac.failed.into_iter().map(|(i, _)| i).collect(),
    }
}

fn record_vector(r: &EvaluationRecord) -> Vec<f64> {
    let mut v = vec![r.j];
    v.extend(&r.constraints.eq);
    v.extend(&r.constraints.ineq);
    v
}

/// The problem in scaled variables, as seen by the optimizer.
pub struct OcpNlp<'a> {
    pub model: &'a dyn ForwardModel,
    pub problem: &'a OcpProblem,
}

impl Problem for OcpNlp<'_> {
    fn dim(&self) -> usize {
        self.problem.n_vars()
    }
    fn n_eq(&self) -> usize {
        1
    }
    fn n_ineq(&self) -> usize {
        self.problem.n_ineq()
    }
    fn lower(&self) -> Vec<f64> {
        self.problem.scaled_bounds().0
    }
    fn upper(&self) -> Vec<f64> {
        self.problem.scaled_bounds().1
    }
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, String> {
        let r = evaluate(self.model, self.problem, &self.problem.from_scaled(x));
        if let Some(e) = r.failure {
            return Err(e);
        }
        Ok(Evaluation {
            f: r.j / self.problem.stress_scale,
            eq: r.constraints.eq,
            ineq: r.constraints.ineq,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub result: SqpResult,
    pub schedule: ControlSchedule,
    pub record: EvaluationRecord,
}

/// Runs the SQP method from `guess` and re-evaluates the returned schedule.
pub fn optimize(
    model: &dyn ForwardModel,
    problem: &OcpProblem,
    guess: &ControlSchedule,
    settings: &SqpSettings,
) -> Result<OptimizeOutcome, OcpError> {
    problem.validate()?;
    if guess.n() != problem.n_steps {
        return Err(OcpError::InvalidSchedule(format!(
            "guess has {} steps, problem has {}",
            guess.n(),
            problem.n_steps
        )));
    }
    let nlp = OcpNlp { model, problem };
    let result = minimize(&nlp, &problem.to_scaled(guess), settings)?;
    let schedule = problem.from_scaled(&result.x);
    let record = evaluate(model, problem, &schedule);
    Ok(OptimizeOutcome {
        result,
        schedule,
        record,
    })
}

/// Knot index of the first rotation above 5 % of the target and of the
/// first gas temperature reaching half its maximum.
pub fn start_times(s: &ControlSchedule, omega_final: f64) -> (Option<usize>, Option<usize>) {
    let rot = s.omega.iter().position(|&w| w > 0.05 * omega_final).map(|k| k + 1);
    let max_te = s.t_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let heat = s.t_e.iter().position(|&t| t >= 0.5 * max_te).map(|k| k + 1);
    (rot, heat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ramp_values() {
        let p = OcpProblem::default();
        let g = p.initial_guess(GuessKind::LinearRamp).unwrap();
        for k in 1..=20 {
            assert!((g.t_e[k - 1] - 750.0 * k as f64 / 20.0).abs() < 1e-12);
            assert!((g.omega[k - 1] - 60.0 * k as f64 / 20.0).abs() < 1e-12);
        }
        // max slope of the ramp is 1/30 Hz/s
        let c = p.constraints(&g, 500.0);
        assert_eq!(c.ineq.len(), 22);
        assert!(c.ineq[2..].iter().all(|&s| s >= 0.0));
        let worst = c.ineq[2..].iter().copied().fold(f64::INFINITY, f64::min);
        assert!((worst - (0.1 * 90.0 - 3.0) / 60.0).abs() < 1e-12);
    }

    #[test]
    fn heat_first_values() {
        let p = OcpProblem::default();
        let g = p.initial_guess(GuessKind::HeatFirst).unwrap();
        assert!(g.t_e[..19].iter().all(|&t| t == 1000.0));
        assert_eq!(g.t_e[19], 750.0);
        // idle until t = 1200 s, then 9 Hz per 90 s step
        assert!(g.omega[..13].iter().all(|&w| w == 0.0));
        assert!((g.omega[13] - 6.0).abs() < 1e-9);
        assert!((g.omega[19] - 60.0).abs() < 1e-9);
        let c = p.constraints(&g, 500.0);
        assert!(c.max_violation() < 1e-12);
        assert_eq!(p.bound_violation(&g), 0.0);
    }

    #[test]
    fn infeasible_rate_limit() {
        let p = OcpProblem {
            omega_rate_limit: 0.01,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(OcpError::InfeasibleRateLimit { .. })));
        assert!(p.initial_guess(GuessKind::HeatFirst).is_err());
    }

    #[test]
    fn scaling_round_trip() {
        let p = OcpProblem::default();
        let g = p.initial_guess(GuessKind::LinearRamp).unwrap();
        let back = p.from_scaled(&p.to_scaled(&g));
        for (a, b) in back.t_e.iter().zip(&g.t_e) {
            assert!((a - b).abs() < 1e-12);
        }
        let (lo, up) = p.scaled_bounds();
        assert!(lo.iter().all(|&v| v == 0.0) && up.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn smooth_max_bounds_max() {
        let p = OcpProblem {
            smooth_max: Some(1.0),
            ..Default::default()
        };
        let s = [1.0, 5.0, 3.0];
        let j = p.objective(&s);
        assert!(j >= 5.0 && j <= 5.0 + 3f64.ln());
    }
}
