//! Finite-difference Jacobians of vector-valued callbacks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// √ε for f64, the customary relative forward-difference step.
pub const DEFAULT_FD_STEP: f64 = 1.490_116_119_384_765_6e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    #[default]
    Forward,
    Central,
}

impl FdScheme {
    /// Callback evaluations per Jacobian for `n` variables, baseline
    /// excluded.
    pub fn evaluations(self, n: usize) -> usize {
        match self {
            FdScheme::Forward => n,
            FdScheme::Central => 2 * n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdOptions<'a> {
    pub step: f64,
    pub scheme: FdScheme,
    /// Optional upper bounds; forward steps that would exceed them are taken
    /// backward.
    pub upper: Option<&'a [f64]>,
}

impl Default for FdOptions<'_> {
    fn default() -> Self {
        Self {
            step: DEFAULT_FD_STEP,
            scheme: FdScheme::Forward,
            upper: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdJacobian {
    /// `jac[k][i] = ∂f_k/∂x_i`.
    pub jac: Vec<Vec<f64>>,
    pub evaluations: usize,
    /// Variables whose perturbed evaluation failed; their columns are NaN.
    pub failed: Vec<(usize, String)>,
}

/// Jacobian of `f` at `x` with `f0 = f(x)` known. Perturbed evaluations
/// run on the current rayon pool and are combined in index order.
pub fn jacobian<F>(f: &F, x: &[f64], f0: &[f64], opts: &FdOptions<'_>) -> FdJacobian
where
    F: Fn(&[f64]) -> Result<Vec<f64>, String> + Sync,
{
    let n = x.len();
    let m = f0.len();
    let cols: Vec<(Result<Vec<f64>, String>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let h = opts.step * x[i].abs().max(1.0);
            let probe = |delta: f64| {
                let mut xp = x.to_vec();
                xp[i] += delta;
                let actual = xp[i] - x[i];
                f(&xp).and_then(|v| {
                    if v.len() != m {
                        Err(format!("callback returned {} values, expected {m}", v.len()))
                    } else {
                        Ok((v, actual))
                    }
                })
            };
            match opts.scheme {
                FdScheme::Forward => {
                    let up = opts.upper.map_or(f64::INFINITY, |u| u[i]);
                    let delta = if x[i] + h > up { -h } else { h };
                    let col = probe(delta)
                        .map(|(v, d)| v.iter().zip(f0).map(|(a, b)| (a - b) / d).collect());
                    (col, 1)
                }
                FdScheme::Central => {
                    let col = probe(h).and_then(|(vp, dp)| {
                        probe(-h).map(|(vm, dm)| {
                            vp.iter().zip(&vm).map(|(a, b)| (a - b) / (dp - dm)).collect()
                        })
                    });
                    (col, 2)
                }
            }
        })
        .collect();
    let mut jac = vec![vec![0.0; n]; m];
    let mut failed = Vec::new();
    let mut evaluations = 0;
    for (i, (col, evals)) in cols.into_iter().enumerate() {
        evaluations += evals;
        match col {
            Ok(c) => c.into_iter().enumerate().for_each(|(k, v)| jac[k][i] = v),
            Err(e) => {
                jac.iter_mut().for_each(|row| row[i] = f64::NAN);
                failed.push((i, e));
            }
        }
    }
    FdJacobian {
        jac,
        evaluations,
        failed,
    }
}
