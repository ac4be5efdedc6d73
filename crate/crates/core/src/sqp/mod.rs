//! Sequential quadratic programming in the SLSQP family.
//!
//! Each iteration solves a QP with the damped-BFGS Hessian and linearized
//! constraints, then searches along the QP step on an augmented Lagrangian
//! merit function (Schittkowski). The optimizer only sees callbacks; finite
//! differences are used whenever the problem does not supply gradients.

mod bfgs;
mod qp;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd::{self, FdOptions, FdScheme, DEFAULT_FD_STEP};

pub use bfgs::{bfgs_update, POWELL_DAMPING};
pub use qp::{kkt_residual, solve_qp, QpError, QpProblem, QpSolution};

/// Objective and constraint values at one point. Equalities are residuals
/// that vanish at feasibility; inequalities are feasible when ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

impl Evaluation {
    pub fn max_violation(&self) -> f64 {
        let worse = |m: f64, v: f64| if v > m { v } else { m };
        let e = self.eq.iter().fold(0.0, |m, v| worse(m, v.abs()));
        self.ineq.iter().fold(e, |m, v| worse(m, -v))
    }

    fn is_finite(&self) -> bool {
        self.f.is_finite() && self.eq.iter().chain(&self.ineq).all(|v| v.is_finite())
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.eq.len() + self.ineq.len());
        v.push(self.f);
        v.extend(&self.eq);
        v.extend(&self.ineq);
        v
    }
}

/// Gradient of the objective and Jacobian rows of the constraints.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub f: Vec<f64>,
    pub eq: Vec<Vec<f64>>,
    pub ineq: Vec<Vec<f64>>,
}

pub trait Problem: Sync {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, String>;

    /// Analytic derivatives, if available.
    fn gradients(&self, _x: &[f64], _at: &Evaluation) -> Option<Result<Gradients, String>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqpSettings {
    pub f_tol: f64,
    /// Largest constraint violation accepted at termination.
    pub constraint_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub fd_scheme: FdScheme,
    /// Armijo fraction of the merit decrease.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Consecutive failed line searches before stopping.
    pub max_line_search_failures: usize,
    /// Reset the Hessian and continue this many times after a stall.
    pub restarts: usize,
    /// Threads for gradient evaluations; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            f_tol: 1e-8,
            constraint_tol: 1e-8,
            max_iter: 200,
            fd_step: DEFAULT_FD_STEP,
            fd_scheme: FdScheme::Forward,
            armijo: 0.1,
            max_backtracks: 10,
            max_line_search_failures: 3,
            restarts: 0,
            workers: None,
        }
    }
}

impl SqpSettings {
    pub fn validate(&self) -> Result<(), SqpError> {
        let bad = |m: &str| Err(SqpError::InvalidSettings(m.to_string()));
        if !(self.f_tol > 0.0) {
            return bad("f_tol must be > 0");
        }
        if !(self.constraint_tol > 0.0) {
            return bad("constraint_tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1.0) {
            return bad("fd_step must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return bad("armijo must lie in (0, 0.5)");
        }
        if self.max_backtracks == 0 || self.max_line_search_failures == 0 {
            return bad("line-search limits must be >= 1");
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqpStatus {
    Converged,
    NotConverged,
    NonsmoothStall,
}

#[derive(Debug, Error)]
pub enum SqpError {
    #[error("callback failed at iteration {iteration}: {message}")]
    CallbackFailure { iteration: usize, message: String },
    #[error("QP subproblem failed at iteration {iteration}: {source}")]
    Qp {
        iteration: usize,
        #[source]
        source: QpError,
    },
    #[error("invalid SQP settings: {0}")]
    InvalidSettings(String),
    #[error("problem dimensions are inconsistent: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub max_violation: f64,
    pub step_norm: f64,
    pub evals: usize,
    pub alpha: f64,
    pub merit_start: f64,
    pub merit_end: f64,
    pub accepted: bool,
    pub relaxed_qp: bool,
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluation: Evaluation,
    pub status: SqpStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub history: Vec<IterationRecord>,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
}

/// Writes the iteration log as CSV with the objective scaled by
/// `f_scale` (e.g. back to MPa).
pub fn write_history_csv<W: Write>(history: &[IterationRecord], f_scale: f64, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["iter", "J_MPa", "max_violation", "step_norm", "evals"])?;
    for h in history {
        wr.write_record([
            h.iter.to_string(),
            (h.f * f_scale).to_string(),
            h.max_violation.to_string(),
            h.step_norm.to_string(),
            h.evals.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

struct Counted<'a, P: Problem + ?Sized> {
    problem: &'a P,
    count: AtomicUsize,
}

impl<P: Problem + ?Sized> Counted<'_, P> {
    fn eval(&self, x: &[f64]) -> Result<Evaluation, String> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let e = self.problem.evaluate(x)?;
        if e.eq.len() != self.problem.n_eq() || e.ineq.len() != self.problem.n_ineq() {
            return Err(format!(
                "callback returned {} equalities and {} inequalities, expected {} and {}",
                e.eq.len(),
                e.ineq.len(),
                self.problem.n_eq(),
                self.problem.n_ineq()
            ));
        }
        Ok(e)
    }

    fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

struct Linearization {
    g: DVector<f64>,
    jeq: DMatrix<f64>,
    jin: DMatrix<f64>,
}

impl Linearization {
    fn lagrangian_gradient(&self, ueq: &DVector<f64>, uin: &DVector<f64>) -> DVector<f64> {
        &self.g - self.jeq.transpose() * ueq - self.jin.transpose() * uin
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

fn linearize<P: Problem + ?Sized>(
    c: &Counted<'_, P>,
    x: &[f64],
    at: &Evaluation,
    settings: &SqpSettings,
    upper: &[f64],
    pool: Option<&rayon::ThreadPool>,
) -> Result<Linearization, String> {
    let n = x.len();
    let (me, mi) = (at.eq.len(), at.ineq.len());
    if let Some(g) = c.problem.gradients(x, at) {
        let g = g?;
        return Ok(Linearization {
            g: DVector::from_vec(g.f),
            jeq: rows_to_matrix(&g.eq, n),
            jin: rows_to_matrix(&g.ineq, n),
        });
    }
    let f = |xp: &[f64]| c.eval(xp).map(|e| e.to_vec());
    let opts = FdOptions {
        step: settings.fd_step,
        scheme: settings.fd_scheme,
        upper: Some(upper),
    };
    let f0 = at.to_vec();
    let jac = match pool {
        Some(p) => p.install(|| fd::jacobian(&f, x, &f0, &opts)),
        None => fd::jacobian(&f, x, &f0, &opts),
    };
    if jac.failed.len() == n {
        return Err(format!("all gradient components failed: {}", jac.failed[0].1));
    }
    for (i, msg) in &jac.failed {
        log::warn!("gradient component {i} failed ({msg}); treated as zero");
    }
    let clean = |v: f64| if v.is_finite() { v } else { 0.0 };
    Ok(Linearization {
        g: DVector::from_fn(n, |i, _| clean(jac.jac[0][i])),
        jeq: DMatrix::from_fn(me, n, |k, i| clean(jac.jac[1 + k][i])),
        jin: DMatrix::from_fn(mi, n, |k, i| clean(jac.jac[1 + me + k][i])),
    })
}

/// Augmented Lagrangian merit state: multiplier estimates and penalties.
struct Merit {
    veq: DVector<f64>,
    vin: DVector<f64>,
    req: DVector<f64>,
    rin: DVector<f64>,
}

impl Merit {
    fn value(&self, e: &Evaluation, veq: &DVector<f64>, vin: &DVector<f64>) -> f64 {
        if !e.is_finite() {
            return f64::INFINITY;
        }
        let mut phi = e.f;
        for (j, &c) in e.eq.iter().enumerate() {
            phi -= veq[j] * c - 0.5 * self.req[j] * c * c;
        }
        for (j, &c) in e.ineq.iter().enumerate() {
            let (v, r) = (vin[j], self.rin[j]);
            if c <= v / r {
                phi -= v * c - 0.5 * r * c * c;
            } else {
                phi -= 0.5 * v * v / r;
            }
        }
        phi
    }

    /// Derivative along (d, u − v) at the current point.
    fn slope(
        &self,
        e: &Evaluation,
        lin: &Linearization,
        d: &DVector<f64>,
        ueq: &DVector<f64>,
        uin: &DVector<f64>,
    ) -> f64 {
        let mut s = lin.g.dot(d);
        let jd_eq = &lin.jeq * d;
        let jd_in = &lin.jin * d;
        for (j, &c) in e.eq.iter().enumerate() {
            s += (self.req[j] * c - self.veq[j]) * jd_eq[j];
            s -= c * (ueq[j] - self.veq[j]);
        }
        for (j, &c) in e.ineq.iter().enumerate() {
            let (v, r) = (self.vin[j], self.rin[j]);
            if c <= v / r {
                s += (r * c - v) * jd_in[j];
                s -= c * (uin[j] - v);
            } else {
                s -= v / r * (uin[j] - v);
            }
        }
        s
    }

    fn update_penalties(&mut self, ueq: &DVector<f64>, uin: &DVector<f64>, dbd: f64) {
        let m = (self.req.len() + self.rin.len()).max(1) as f64;
        let dbd = dbd.max(1e-12);
        for j in 0..self.req.len() {
            let t = 2.0 * m * (ueq[j] - self.veq[j]).powi(2) / dbd;
            self.req[j] = self.req[j].max(t);
        }
        for j in 0..self.rin.len() {
            let t = 2.0 * m * (uin[j] - self.vin[j]).powi(2) / dbd;
            self.rin[j] = self.rin[j].max(t);
        }
    }
}

struct Step {
    d: DVector<f64>,
    ueq: DVector<f64>,
    uin: DVector<f64>,
    relaxed: bool,
}

fn qp_step(
    b: &DMatrix<f64>,
    lin: &Linearization,
    at: &Evaluation,
    lo: &[f64],
    up: &[f64],
) -> Result<Step, QpError> {
    let n = lin.g.len();
    let ceq = DVector::from_vec(at.eq.clone());
    let cin = DVector::from_vec(at.ineq.clone());
    let rhs_eq = -&ceq;
    let rhs_in = -&cin;
    let p = QpProblem {
        hessian: b,
        gradient: &lin.g,
        eq: (ceq.len() > 0).then_some((&lin.jeq, &rhs_eq)),
        ineq: (cin.len() > 0).then_some((&lin.jin, &rhs_in)),
        lower: Some(lo),
        upper: Some(up),
    };
    match solve_qp(&p) {
        Ok(s) => {
            return Ok(Step {
                d: s.x,
                ueq: s.eq_multipliers,
                uin: s.ineq_multipliers,
                relaxed: false,
            })
        }
        Err(QpError::Infeasible) | Err(QpError::IterationLimit) => {}
        Err(e) => return Err(e),
    }
    // Relaxed subproblem in (d, δ): constraints scaled back by (1 − δ) where
    // violated, feasible at (0, 1); δ is driven to zero by a stiff penalty.
    let rho = 1e3 * (1.0 + b.amax());
    let mut bb = DMatrix::zeros(n + 1, n + 1);
    bb.view_mut((0, 0), (n, n)).copy_from(b);
    bb[(n, n)] = rho;
    let mut gg = DVector::zeros(n + 1);
    gg.rows_mut(0, n).copy_from(&lin.g);
    gg[n] = rho;
    let mut jeq = DMatrix::zeros(ceq.len(), n + 1);
    jeq.view_mut((0, 0), (ceq.len(), n)).copy_from(&lin.jeq);
    for j in 0..ceq.len() {
        jeq[(j, n)] = -ceq[j];
    }
    let mut jin = DMatrix::zeros(cin.len(), n + 1);
    jin.view_mut((0, 0), (cin.len(), n)).copy_from(&lin.jin);
    for j in 0..cin.len() {
        jin[(j, n)] = -cin[j].min(0.0);
    }
    let mut lo2 = lo.to_vec();
    lo2.push(0.0);
    let mut up2 = up.to_vec();
    up2.push(1.0);
    let p = QpProblem {
        hessian: &bb,
        gradient: &gg,
        eq: (ceq.len() > 0).then_some((&jeq, &rhs_eq)),
        ineq: (cin.len() > 0).then_some((&jin, &rhs_in)),
        lower: Some(&lo2),
        upper: Some(&up2),
    };
    let s = solve_qp(&p)?;
    Ok(Step {
        d: s.x.rows(0, n).into_owned(),
        ueq: s.eq_multipliers,
        uin: s.ineq_multipliers,
        relaxed: true,
    })
}

/// Minimizes `problem` from `x0` (projected onto the bounds).
pub fn minimize<P: Problem + ?Sized>(problem: &P, x0: &[f64], settings: &SqpSettings) -> Result<SqpResult, SqpError> {
    settings.validate()?;
    let n = problem.dim();
    let (me, mi) = (problem.n_eq(), problem.n_ineq());
    let lower = problem.lower();
    let upper = problem.upper();
    if x0.len() != n || lower.len() != n || upper.len() != n {
        return Err(SqpError::Dimension(format!(
            "x0 {}, bounds {}/{}, dim {n}",
            x0.len(),
            lower.len(),
            upper.len()
        )));
    }
    let pool = match settings.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| SqpError::InvalidSettings(e.to_string()))?,
        ),
        None => None,
    };
    let counted = Counted {
        problem,
        count: AtomicUsize::new(0),
    };
    let project = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&lower)
            .zip(&upper)
            .map(|((v, l), u)| v.max(*l).min(*u))
            .collect()
    };
    let fail = |iteration: usize| move |message: String| SqpError::CallbackFailure { iteration, message };

    let mut x = project(x0);
    let mut ev = counted.eval(&x).map_err(fail(0))?;
    if !ev.is_finite() {
        return Err(SqpError::CallbackFailure {
            iteration: 0,
            message: "non-finite values at the starting point".into(),
        });
    }
    let mut lin = linearize(&counted, &x, &ev, settings, &upper, pool.as_ref()).map_err(fail(0))?;
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut merit = Merit {
        veq: DVector::zeros(me),
        vin: DVector::zeros(mi),
        req: DVector::from_element(me, 1.0),
        rin: DVector::from_element(mi, 1.0),
    };
    let mut ueq = DVector::zeros(me);
    let mut uin = DVector::zeros(mi);
    let mut history = Vec::new();
    let mut failures = 0;
    let mut restarts_left = settings.restarts;
    let mut status = SqpStatus::NotConverged;
    let mut best: Option<(Vec<f64>, Evaluation)> = None;
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        let lo: Vec<f64> = lower.iter().zip(&x).map(|(l, xi)| l - xi).collect();
        let up: Vec<f64> = upper.iter().zip(&x).map(|(u, xi)| u - xi).collect();
        let step = qp_step(&b, &lin, &ev, &lo, &up).map_err(|source| SqpError::Qp {
            iteration: iter,
            source,
        })?;
        ueq = step.ueq.clone();
        uin = step.uin.clone();
        let d = step.d;
        let viol = ev.max_violation();
        let kkt = lin.g.dot(&d).abs()
            + ev.eq.iter().zip(ueq.iter()).map(|(c, u)| (c * u).abs()).sum::<f64>()
            + ev.ineq.iter().zip(uin.iter()).map(|(c, u)| (c * u).abs()).sum::<f64>();
        if !step.relaxed && kkt < settings.f_tol && viol < settings.constraint_tol {
            history.push(IterationRecord {
                iter,
                f: ev.f,
                max_violation: viol,
                step_norm: 0.0,
                evals: counted.count(),
                alpha: 0.0,
                merit_start: merit.value(&ev, &merit.veq, &merit.vin),
                merit_end: merit.value(&ev, &merit.veq, &merit.vin),
                accepted: true,
                relaxed_qp: false,
            });
            status = SqpStatus::Converged;
            break;
        }

        let dbd = d.dot(&(&b * &d));
        merit.update_penalties(&ueq, &uin, dbd);
        let mut slope = merit.slope(&ev, &lin, &d, &ueq, &uin);
        for _ in 0..6 {
            if slope < 0.0 {
                break;
            }
            merit.req *= 10.0;
            merit.rin *= 10.0;
            slope = merit.slope(&ev, &lin, &d, &ueq, &uin);
        }
        let phi0 = merit.value(&ev, &merit.veq, &merit.vin);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut phi_end = phi0;
        if slope < 0.0 {
            for _ in 0..settings.max_backtracks {
                let xt = project(&(0..n).map(|i| x[i] + alpha * d[i]).collect::<Vec<_>>());
                let veq_t = &merit.veq + (&ueq - &merit.veq) * alpha;
                let vin_t = &merit.vin + (&uin - &merit.vin) * alpha;
                let (evt, phi) = match counted.eval(&xt) {
                    Ok(e) => {
                        let phi = merit.value(&e, &veq_t, &vin_t);
                        (Some(e), phi)
                    }
                    Err(msg) => {
                        log::warn!("iteration {iter}: probe at alpha {alpha:.3e} failed: {msg}");
                        (None, f64::INFINITY)
                    }
                };
                if phi.is_finite() && phi <= phi0 + settings.armijo * alpha * slope {
                    phi_end = phi;
                    accepted = Some((xt, evt.expect("finite merit has an evaluation"), veq_t, vin_t));
                    break;
                }
                let next = if phi.is_finite() {
                    let denom = 2.0 * (phi - phi0 - slope * alpha);
                    if denom > 0.0 {
                        -slope * alpha * alpha / denom
                    } else {
                        0.5 * alpha
                    }
                } else {
                    0.1 * alpha
                };
                alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
            }
        }

        let Some((xt, evt, veq_t, vin_t)) = accepted else {
            failures += 1;
            b = DMatrix::identity(n, n);
            history.push(IterationRecord {
                iter,
                f: ev.f,
                max_violation: viol,
                step_norm: 0.0,
                evals: counted.count(),
                alpha: 0.0,
                merit_start: phi0,
                merit_end: phi0,
                accepted: false,
                relaxed_qp: step.relaxed,
            });
            log::debug!("iteration {iter}: line search failed ({failures} in a row)");
            if failures >= settings.max_line_search_failures {
                if lin.g.amax() <= settings.f_tol && viol < settings.constraint_tol {
                    status = SqpStatus::Converged;
                    break;
                }
                if restarts_left > 0 {
                    restarts_left -= 1;
                    failures = 0;
                    continue;
                }
                status = SqpStatus::NonsmoothStall;
                break;
            }
            continue;
        };
        failures = 0;
        let lin_t = linearize(&counted, &xt, &evt, settings, &upper, pool.as_ref()).map_err(fail(iter))?;
        let s = DVector::from_fn(n, |i, _| xt[i] - x[i]);
        let y = lin_t.lagrangian_gradient(&ueq, &uin) - lin.lagrangian_gradient(&ueq, &uin);
        bfgs_update(&mut b, &s, &y);
        let df = (evt.f - ev.f).abs();
        let step_norm = s.norm();
        x = xt;
        ev = evt;
        lin = lin_t;
        merit.veq = veq_t;
        merit.vin = vin_t;
        let viol_new = ev.max_violation();
        history.push(IterationRecord {
            iter,
            f: ev.f,
            max_violation: viol_new,
            step_norm,
            evals: counted.count(),
            alpha,
            merit_start: phi0,
            merit_end: phi_end,
            accepted: true,
            relaxed_qp: step.relaxed,
        });
        log::info!(
            "iter {iter:4}  f {:.10e}  viol {viol_new:.2e}  |s| {step_norm:.2e}  alpha {alpha:.3e}  evals {}",
            ev.f,
            counted.count()
        );
        if viol_new < settings.constraint_tol && best.as_ref().is_none_or(|(_, e)| ev.f < e.f) {
            best = Some((x.clone(), ev.clone()));
        }
        if (df < settings.f_tol || step_norm < settings.f_tol) && viol_new < settings.constraint_tol {
            status = SqpStatus::Converged;
            break;
        }
    }

    if status != SqpStatus::Converged {
        if let Some((bx, be)) = best {
            if be.f < ev.f || ev.max_violation() >= settings.constraint_tol {
                x = bx;
                ev = be;
            }
        }
    }
    Ok(SqpResult {
        f: ev.f,
        x,
        evaluation: ev,
        status,
        iterations,
        evaluations: counted.count(),
        history,
        eq_multipliers: ueq.iter().copied().collect(),
        ineq_multipliers: uin.iter().copied().collect(),
    })
}
