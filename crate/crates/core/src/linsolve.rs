//! Solvers for the symmetric positive-definite systems produced by assembly.
//!
//! Two routes: Jacobi-preconditioned conjugate gradients (matrix-free
//! friendly, used for one-off solves) and a sparse Cholesky factorization
//! that is computed once and reused for every right-hand side of a fixed
//! operator.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Cg,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub method: SolverMethod,
    pub rel_tol: f64,
    /// Iteration cap; `None` means 10 × number of unknowns.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: SolverMethod::Cholesky,
            rel_tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverSettings {
    pub fn cg() -> Self {
        Self {
            method: SolverMethod::Cg,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinSolveError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(LinSolveError::InvalidSettings(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(LinSolveError::InvalidSettings("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LinSolveError {
    #[error("iterative solver did not converge: relative residual {rel_residual:.3e} after {iterations} iterations")]
    NotConverged {
        best: Vec<f64>,
        rel_residual: f64,
        iterations: usize,
    },
    #[error("matrix is singular or not positive definite: {0}")]
    SingularMatrix(String),
    #[error("dimension mismatch: matrix {matrix}, rhs {rhs}")]
    DimensionMismatch { matrix: usize, rhs: usize },
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖Ax − b‖₂ / ‖b‖₂ (0 when b = 0).
    pub rel_residual: f64,
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Solves `A x = b` with the configured method.
pub fn solve(a: &CsrMatrix, b: &[f64], settings: &SolverSettings) -> Result<Solution, LinSolveError> {
    settings.validate()?;
    if a.dim() != b.len() {
        return Err(LinSolveError::DimensionMismatch {
            matrix: a.dim(),
            rhs: b.len(),
        });
    }
    match settings.method {
        SolverMethod::Cg => conjugate_gradient(a, b, settings, None),
        SolverMethod::Cholesky => {
            let f = CholeskyFactor::new(a)?;
            let x = f.solve(b);
            let rel_residual = relative_residual(a, &x, b);
            Ok(Solution {
                x,
                iterations: 0,
                rel_residual,
            })
        }
    }
}

/// Preconditioned conjugate gradients with an optional starting guess.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    settings: &SolverSettings,
    x0: Option<&[f64]>,
) -> Result<Solution, LinSolveError> {
    let n = a.dim();
    let max_iter = settings.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag: Vec<f64> = match settings.preconditioner {
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
        Preconditioner::None => vec![1.0; n],
    };
    let nb = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(Solution {
            x,
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut best = x.clone();
    let mut best_res = norm2(&r) / nb;
    if best_res <= settings.rel_tol {
        return Ok(Solution {
            x,
            iterations: 0,
            rel_residual: best_res,
        });
    }
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(LinSolveError::SingularMatrix(format!(
                "non-positive curvature pᵀAp = {pq:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let res = norm2(&r) / nb;
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= settings.rel_tol {
            // recursive residual drifts; confirm with the true one
            let true_res = relative_residual(a, &x, b);
            if true_res <= settings.rel_tol {
                return Ok(Solution {
                    x,
                    iterations: it,
                    rel_residual: true_res,
                });
            }
            let ax = a.mul_vec(&x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinSolveError::NotConverged {
        best,
        rel_residual: best_res,
        iterations: max_iter,
    })
}

/// Sparse Cholesky factorization with fill-reducing ordering, reusable
/// across right-hand sides.
pub struct CholeskyFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for CholeskyFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CholeskyFactor").field("n", &self.n).finish()
    }
}

impl CholeskyFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinSolveError> {
        let n = a.dim();
        let mut trip = Vec::with_capacity(a.nnz() / 2 + n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                // symmetric input: row i of A is column i, keep the lower half
                if j >= i {
                    trip.push(Triplet::new(j, i, v));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| LinSolveError::SingularMatrix(format!("{e:?}")))?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| LinSolveError::SingularMatrix(e.to_string()))?;
        Ok(Self { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// A fixed operator prepared for repeated solves: factorized once for the
/// direct method, warm-started conjugate gradients otherwise.
#[derive(Debug)]
pub struct PreparedSolver {
    matrix: CsrMatrix,
    factor: Option<CholeskyFactor>,
    settings: SolverSettings,
}

impl PreparedSolver {
    pub fn new(matrix: CsrMatrix, settings: &SolverSettings) -> Result<Self, LinSolveError> {
        settings.validate()?;
        let factor = match settings.method {
            SolverMethod::Cholesky => Some(CholeskyFactor::new(&matrix)?),
            SolverMethod::Cg => None,
        };
        Ok(Self {
            matrix,
            factor,
            settings: *settings,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Solves and checks `‖Ax − b‖ ≤ rel_tol ‖b‖`.
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>) -> Result<Solution, LinSolveError> {
        if b.len() != self.matrix.dim() {
            return Err(LinSolveError::DimensionMismatch {
                matrix: self.matrix.dim(),
                rhs: b.len(),
            });
        }
        match &self.factor {
            Some(f) => {
                let x = f.solve(b);
                let rel_residual = relative_residual(&self.matrix, &x, b);
                if !(rel_residual <= self.settings.rel_tol) {
                    return Err(LinSolveError::NotConverged {
                        best: x,
                        rel_residual,
                        iterations: 0,
                    });
                }
                Ok(Solution {
                    x,
                    iterations: 0,
                    rel_residual,
                })
            }
            None => conjugate_gradient(&self.matrix, b, &self.settings, x0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.5, 0.0, 7.0];
        for s in [SolverSettings::default(), SolverSettings::cg()] {
            let sol = solve(&a, &b, &s).unwrap();
            assert_eq!(sol.x, b.to_vec());
        }
    }

    #[test]
    fn two_by_two_hand_elimination() {
        let a = CsrMatrix::from_dense(2, &[4.0, 1.0, 1.0, 3.0]);
        let b = [1.0, 2.0];
        for s in [SolverSettings::default(), SolverSettings::cg()] {
            let x = solve(&a, &b, &s).unwrap().x;
            assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
            assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::from_dense(2, &[2.0, 0.0, 0.0, 2.0]);
        let sol = solve(&a, &[0.0, 0.0], &SolverSettings::cg()).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = CsrMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            solve(&a, &[1.0, 0.0], &SolverSettings::default()),
            Err(LinSolveError::SingularMatrix(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let n = 30;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0 + i as f64 * 10.0;
            if i + 1 < n {
                d[i * n + i + 1] = -0.5;
                d[(i + 1) * n + i] = -0.5;
            }
        }
        let a = CsrMatrix::from_dense(n, &d);
        let b = vec![1.0; n];
        let s = SolverSettings {
            max_iter: Some(2),
            preconditioner: Preconditioner::None,
            ..SolverSettings::cg()
        };
        match solve(&a, &b, &s) {
            Err(LinSolveError::NotConverged { best, rel_residual, .. }) => {
                assert_eq!(best.len(), n);
                assert!(rel_residual < 1.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn bad_settings_rejected() {
        let s = SolverSettings {
            rel_tol: 1.5,
            ..SolverSettings::default()
        };
        assert!(s.validate().is_err());
    }
}
