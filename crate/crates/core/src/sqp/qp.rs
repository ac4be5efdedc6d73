//! Strictly convex quadratic programs by the dual active-set method of
//! Goldfarb and Idnani.
//!
//!   min ½ dᵀBd + gᵀd   s.t.  E d = e,  A d ≥ a,  lower ≤ d ≤ upper
//!
//! The method starts from the unconstrained minimizer and adds violated
//! constraints one at a time while keeping dual feasibility, so no feasible
//! starting point is needed. Projections are recomputed densely from the
//! active normals at every step, which is cheap at the sizes used here.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("QP constraints are inconsistent")]
    Infeasible,
    #[error("QP Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("QP dimensions are inconsistent: {0}")]
    Dimension(String),
    #[error("QP active-set iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpProblem<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a DVector<f64>,
    /// Rows of E and right-hand side e.
    pub eq: Option<(&'a DMatrix<f64>, &'a DVector<f64>)>,
    /// Rows of A and right-hand side a.
    pub ineq: Option<(&'a DMatrix<f64>, &'a DVector<f64>)>,
    pub lower: Option<&'a [f64]>,
    pub upper: Option<&'a [f64]>,
}

/// Minimizer with multipliers for `B d + g = Eᵀλ + Aᵀμ + μ_lo − μ_up`,
/// where μ, μ_lo, μ_up ≥ 0.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Eq(usize),
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

struct Row {
    normal: DVector<f64>,
    rhs: f64,
    source: Source,
}

impl Row {
    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.rhs
    }
}

pub fn solve_qp(p: &QpProblem<'_>) -> Result<QpSolution, QpError> {
    let n = p.gradient.len();
    if p.hessian.nrows() != n || p.hessian.ncols() != n {
        return Err(QpError::Dimension(format!(
            "Hessian {}x{} for {n} variables",
            p.hessian.nrows(),
            p.hessian.ncols()
        )));
    }
    let mut rows: Vec<Row> = Vec::new();
    let (n_eq, n_ineq) = (
        p.eq.map_or(0, |(m, _)| m.nrows()),
        p.ineq.map_or(0, |(m, _)| m.nrows()),
    );
    for (set, is_eq) in [(p.eq, true), (p.ineq, false)] {
        if let Some((m, rhs)) = set {
            if m.ncols() != n || rhs.len() != m.nrows() {
                return Err(QpError::Dimension("constraint block".into()));
            }
            for i in 0..m.nrows() {
                rows.push(Row {
                    normal: m.row(i).transpose(),
                    rhs: rhs[i],
                    source: if is_eq { Source::Eq(i) } else { Source::Ineq(i) },
                });
            }
        }
    }
    for (bounds, lower) in [(p.lower, true), (p.upper, false)] {
        if let Some(b) = bounds {
            if b.len() != n {
                return Err(QpError::Dimension("bound vector".into()));
            }
            for (i, &v) in b.iter().enumerate() {
                if !v.is_finite() {
                    continue;
                }
                let mut e = DVector::zeros(n);
                e[i] = if lower { 1.0 } else { -1.0 };
                rows.push(Row {
                    normal: e,
                    rhs: if lower { v } else { -v },
                    source: if lower { Source::Lower(i) } else { Source::Upper(i) },
                });
            }
        }
    }
    if let (Some(lo), Some(up)) = (p.lower, p.upper) {
        if lo.iter().zip(up).any(|(l, u)| l > u) {
            return Err(QpError::Infeasible);
        }
    }

    let chol = p.hessian.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let ginv = chol.inverse();
    let mut x = -(&ginv * p.gradient);
    let scale = 1.0 + p.gradient.amax() + p.hessian.amax();
    let eps = 1e-13 * scale;

    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    // sign applied to an equality row so that it is approached from below
    let mut sign = vec![1.0; rows.len()];
    let mut iterations = 0;
    let max_iter = 50 * (n + rows.len()) + 10;

    let directions = |active: &[usize], np: &DVector<f64>, sign: &[f64]| -> (DVector<f64>, DVector<f64>) {
        let gn = &ginv * np;
        if active.is_empty() {
            return (gn, DVector::zeros(0));
        }
        let q = active.len();
        let nmat = DMatrix::from_fn(n, q, |i, j| sign[active[j]] * rows[active[j]].normal[i]);
        let gn_mat = &ginv * &nmat;
        let m = nmat.transpose() * &gn_mat;
        let rhs = nmat.transpose() * &gn;
        let r = m
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| m.lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(q));
        let z = gn - gn_mat * &r;
        (z, r)
    };

    // Equalities first, then the most violated inequality until none is.
    let mut pending_eq: Vec<usize> = (0..rows.len())
        .filter(|&i| matches!(rows[i].source, Source::Eq(_)))
        .collect();
    pending_eq.reverse();
    loop {
        let p_idx = if let Some(i) = pending_eq.pop() {
            if rows[i].slack(&x) > 0.0 {
                sign[i] = -1.0;
            }
            i
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in rows.iter().enumerate() {
                if matches!(row.source, Source::Eq(_)) || active.contains(&i) {
                    continue;
                }
                let nn = row.normal.norm().max(1e-300);
                let s = row.slack(&x) / nn;
                let tol = 1e-11 * (1.0 + row.rhs.abs() / nn + x.amax());
                if s < -tol && best.is_none_or(|(_, b)| s < b) {
                    best = Some((i, s));
                }
            }
            match best {
                Some((i, _)) => i,
                None => break,
            }
        };
        let is_eq = matches!(rows[p_idx].source, Source::Eq(_));
        let np = &rows[p_idx].normal * sign[p_idx];
        let rhs_p = rows[p_idx].rhs * sign[p_idx];
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let s = np.dot(&x) - rhs_p;
            let (z, r) = directions(&active, &np, &sign);
            let mut t1 = f64::INFINITY;
            let mut k_drop = None;
            for (j, &rj) in r.iter().enumerate() {
                let row_is_eq = matches!(rows[active[j]].source, Source::Eq(_));
                if !row_is_eq && rj > eps {
                    let t = u[j] / rj;
                    if t < t1 {
                        t1 = t;
                        k_drop = Some(j);
                    }
                }
            }
            let zn = z.dot(&np);
            let t2 = if z.amax() > eps * 1e-3 && zn > eps * 1e-3 {
                -s / zn
            } else {
                f64::INFINITY
            };
            if t2.is_infinite() && is_eq && s.abs() <= 1e-10 * (1.0 + rhs_p.abs()) {
                // linearly dependent but consistent equality
                break;
            }
            let t = t1.min(t2);
            if t.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_finite() {
                x += &z * t;
            }
            for (uj, rj) in u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_p += t;
            if t2 <= t1 {
                active.push(p_idx);
                u.push(u_p);
                break;
            }
            let k = k_drop.expect("finite partial step has a blocking index");
            active.remove(k);
            u.remove(k);
        }
    }

    let mut eq_m = DVector::zeros(n_eq);
    let mut ineq_m = DVector::zeros(n_ineq);
    let mut lo_m = DVector::zeros(n);
    let mut up_m = DVector::zeros(n);
    for (&i, &ui) in active.iter().zip(&u) {
        match rows[i].source {
            Source::Eq(k) => eq_m[k] = sign[i] * ui,
            Source::Ineq(k) => ineq_m[k] = ui.max(0.0),
            Source::Lower(k) => lo_m[k] = ui.max(0.0),
            Source::Upper(k) => up_m[k] = ui.max(0.0),
        }
    }
    // bounds hold exactly
    for i in 0..n {
        if let Some(lo) = p.lower {
            x[i] = x[i].max(lo[i]);
        }
        if let Some(up) = p.upper {
            x[i] = x[i].min(up[i]);
        }
    }
    Ok(QpSolution {
        x,
        eq_multipliers: eq_m,
        ineq_multipliers: ineq_m,
        lower_multipliers: lo_m,
        upper_multipliers: up_m,
        iterations,
    })
}

/// Largest violation of the KKT conditions of `p` at `sol`: stationarity,
/// primal feasibility, dual feasibility and complementarity.
pub fn kkt_residual(p: &QpProblem<'_>, sol: &QpSolution) -> f64 {
    let mut grad = p.hessian * &sol.x + p.gradient;
    let mut worst: f64 = 0.0;
    if let Some((e, rhs)) = p.eq {
        grad -= e.transpose() * &sol.eq_multipliers;
        worst = worst.max((e * &sol.x - rhs).amax());
    }
    if let Some((a, rhs)) = p.ineq {
        grad -= a.transpose() * &sol.ineq_multipliers;
        let s = a * &sol.x - rhs;
        for i in 0..s.len() {
            worst = worst.max((-s[i]).max(0.0));
            worst = worst.max((sol.ineq_multipliers[i] * s[i]).abs());
            worst = worst.max((-sol.ineq_multipliers[i]).max(0.0));
        }
    }
    grad -= &sol.lower_multipliers;
    grad += &sol.upper_multipliers;
    for i in 0..sol.x.len() {
        if let Some(lo) = p.lower {
            if lo[i].is_finite() {
                let s = sol.x[i] - lo[i];
                worst = worst.max((-s).max(0.0)).max((sol.lower_multipliers[i] * s).abs());
            }
        }
        if let Some(up) = p.upper {
            if up[i].is_finite() {
                let s = up[i] - sol.x[i];
                worst = worst.max((-s).max(0.0)).max((sol.upper_multipliers[i] * s).abs());
            }
        }
    }
    worst.max(grad.amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_is_newton_step() {
        let b = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let p = QpProblem {
            hessian: &b,
            gradient: &g,
            eq: None,
            ineq: None,
            lower: None,
            upper: None,
        };
        let s = solve_qp(&p).unwrap();
        let want = -b.clone().cholesky().unwrap().solve(&g);
        assert!((s.x - want).amax() < 1e-12);
    }

    #[test]
    fn active_bound_clips_step() {
        let b = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-3.0, 0.5]);
        let up = [1.0, 1.0];
        let p = QpProblem {
            hessian: &b,
            gradient: &g,
            eq: None,
            ineq: None,
            lower: None,
            upper: Some(&up),
        };
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.x[0], 1.0);
        assert!((s.x[1] + 0.5).abs() < 1e-14);
        assert!((s.upper_multipliers[0] - 2.0).abs() < 1e-12);
        assert!(kkt_residual(&p, &s) < 1e-10);
    }

    #[test]
    fn equality_and_inequality() {
        // min ½|x|² s.t. x0 + x1 = 1, x0 − x1 ≥ 0.6
        let b = DMatrix::identity(2, 2);
        let g = DVector::zeros(2);
        let e = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let ev = DVector::from_vec(vec![1.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let av = DVector::from_vec(vec![0.6]);
        let p = QpProblem {
            hessian: &b,
            gradient: &g,
            eq: Some((&e, &ev)),
            ineq: Some((&a, &av)),
            lower: None,
            upper: None,
        };
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 0.8).abs() < 1e-12 && (s.x[1] - 0.2).abs() < 1e-12);
        assert!(kkt_residual(&p, &s) < 1e-10);
    }

    #[test]
    fn inconsistent_constraints_detected() {
        let b = DMatrix::identity(1, 1);
        let g = DVector::zeros(1);
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let av = DVector::from_vec(vec![1.0, 0.0]);
        let p = QpProblem {
            hessian: &b,
            gradient: &g,
            eq: None,
            ineq: Some((&a, &av)),
            lower: None,
            upper: None,
        };
        assert_eq!(solve_qp(&p).unwrap_err(), QpError::Infeasible);
    }
}
