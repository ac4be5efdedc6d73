//! Quasi-static linear thermoelasticity per time knot, stress recovery at
//! element vertices and tracking of the peak von Mises stress.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{
    ConstrainedMatrix, Constraints, ElasticityOperators, ElementOrder, FemError,
    MaterialProperties, TetGeometry,
};
use crate::linsolve::{LinSolveError, PreparedSolver, SolverSettings};
use crate::mesh::{Mesh, Point};

pub const PA_PER_MPA: f64 = 1e6;

/// Symmetric tensor stored as (xx, yy, zz, xy, yz, xz).
pub type SymTensor = [f64; 6];

#[derive(Debug, Error)]
pub enum ElasticError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("elasticity solve at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: LinSolveError,
    },
    #[error("thermal trajectory has {got} fields, schedule needs {expected}")]
    TrajectoryMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticSettings {
    pub solver: SolverSettings,
    /// Fix one axial displacement when nothing else removes the axial
    /// translation.
    pub pin_axial: bool,
}

impl Default for ElasticSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            pin_axial: true,
        }
    }
}

/// Von Mises equivalent stress √(3/2 s:s) of a symmetric tensor.
pub fn von_mises(s: &SymTensor) -> f64 {
    let [xx, yy, zz, xy, yz, xz] = *s;
    let j2 = ((xx - yy).powi(2) + (yy - zz).powi(2) + (zz - xx).powi(2)) / 6.0
        + xy * xy
        + yz * yz
        + xz * xz;
    (3.0 * j2.max(0.0)).sqrt()
}

/// Deviatoric part `s − tr(s)/3 I`.
pub fn deviator(s: &SymTensor) -> SymTensor {
    let p = (s[0] + s[1] + s[2]) / 3.0;
    [s[0] - p, s[1] - p, s[2] - p, s[3], s[4], s[5]]
}

/// Peak of an element-vertex von Mises field with its mesh node; ties go to
/// the lowest node index.
pub fn locate_max(tets: &[[usize; 4]], sigma_v: &[[f64; 4]]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (tet, vals) in tets.iter().zip(sigma_v) {
        for (&node, &v) in tet.iter().zip(vals) {
            if v > best.0 || (v == best.0 && node < best.1) {
                best = (v, node);
            }
        }
    }
    if best.1 == usize::MAX {
        (0.0, 0)
    } else {
        best
    }
}

#[derive(Debug, Clone)]
pub struct StressSnapshot {
    /// Von Mises stress at the 4 vertices of every element (MPa).
    pub sigma_v: Vec<[f64; 4]>,
    pub max_value: f64,
    pub max_node: usize,
    pub max_point: Point,
    /// P2 nodal displacement, interleaved components (m).
    pub displacement: Vec<f64>,
}

impl StressSnapshot {
    pub fn from_von_mises(mesh: &Mesh, sigma_v: Vec<[f64; 4]>, displacement: Vec<f64>) -> Self {
        let (max_value, max_node) = locate_max(mesh.tets(), &sigma_v);
        Self {
            max_point: mesh.nodes()[max_node],
            sigma_v,
            max_value,
            max_node,
            displacement,
        }
    }

    /// Per-vertex maximum over incident elements (MPa).
    pub fn nodal_max(&self, mesh: &Mesh) -> Vec<f64> {
        let mut out = vec![0.0f64; mesh.n_vertices()];
        for (tet, vals) in mesh.tets().iter().zip(&self.sigma_v) {
            for (&n, &v) in tet.iter().zip(vals) {
                out[n] = out[n].max(v);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MechanicalTrajectory {
    pub snapshots: Vec<StressSnapshot>,
    pub max_over_time: f64,
    pub argmax_step: usize,
}

impl MechanicalTrajectory {
    pub fn from_snapshots(snapshots: Vec<StressSnapshot>) -> Self {
        let (argmax_step, max_over_time) = snapshots
            .iter()
            .map(|s| s.max_value)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        Self {
            snapshots,
            max_over_time,
            argmax_step,
        }
    }
}

/// Factorized constrained stiffness and recovery data for one P2 mesh.
/// Shareable across threads; every solve is independent.
#[derive(Debug)]
pub struct ElasticSolver {
    mesh: Arc<Mesh>,
    ops: ElasticityOperators,
    constraints: Constraints,
    constrained: ConstrainedMatrix,
    solver: PreparedSolver,
    geometry: Vec<TetGeometry>,
    lambda: f64,
    mu: f64,
    beta: f64,
    t0: f64,
}

impl ElasticSolver {
    /// Uses the symmetry patches of the mesh (plus an axial pin when
    /// configured) as constraints.
    pub fn new(mesh: Arc<Mesh>, mat: &MaterialProperties, settings: &ElasticSettings) -> Result<Self, ElasticError> {
        if !mesh.is_p2() {
            return Err(FemError::NotP2.into());
        }
        let mut c = Constraints::symmetry(&mesh)?;
        if settings.pin_axial {
            if let Some(node) = c.pin_axial(&mesh)? {
                log::debug!("axial displacement pinned at node {node}");
            }
        }
        Self::with_constraints(mesh, mat, c, &settings.solver)
    }

    pub fn with_constraints(
        mesh: Arc<Mesh>,
        mat: &MaterialProperties,
        constraints: Constraints,
        solver: &SolverSettings,
    ) -> Result<Self, ElasticError> {
        constraints.check_rigid_modes(&mesh)?;
        let ops = ElasticityOperators::assemble(&mesh, mat)?;
        let constrained = constraints.apply_matrix(&ops.stiffness);
        let solver = PreparedSolver::new(constrained.matrix.clone(), solver)
            .map_err(|source| ElasticError::Solver { step: 0, source })?;
        let geometry = (0..mesh.tets().len())
            .map(|t| TetGeometry::new(&mesh.tet_vertices(t)))
            .collect();
        Ok(Self {
            ops,
            constraints,
            constrained,
            solver,
            geometry,
            lambda: mat.lambda(),
            mu: mat.mu(),
            beta: mat.thermal_modulus(),
            t0: mat.t0,
            mesh,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn operators(&self) -> &ElasticityOperators {
        &self.ops
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    /// Displacement for vertex temperatures and rotation `omega` (rad/s).
    pub fn displacement(&self, temperature: &[f64], omega: f64) -> Result<Vec<f64>, ElasticError> {
        let f = self.ops.load(omega, temperature)?;
        self.solve_load(&f, 0)
    }

    /// Displacement for an arbitrary global load vector.
    pub fn solve_load(&self, f: &[f64], step: usize) -> Result<Vec<f64>, ElasticError> {
        let b = self.constraints.apply_rhs(&self.constrained, f);
        let sol = self
            .solver
            .solve(&b, None)
            .map_err(|source| ElasticError::Solver { step, source })?;
        Ok(self.constraints.recover(&sol.x))
    }

    /// Stress tensors (Pa) at the 4 vertices of every element, element-major.
    pub fn stress_tensors(&self, u: &[f64], temperature: &[f64]) -> Vec<SymTensor> {
        let tets = self.mesh.tets();
        let mut out = vec![[0.0; 6]; 4 * tets.len()];
        out.par_chunks_mut(4).enumerate().for_each(|(t, chunk)| {
            let nodes = self.mesh.p2_element(t);
            let geo = &self.geometry[t];
            for (v, s) in chunk.iter_mut().enumerate() {
                let mut l = [0.0; 4];
                l[v] = 1.0;
                let g = geo.gradients(ElementOrder::P2, &l);
                // grad[i][j] = ∂u_i/∂x_j
                let mut grad = [[0.0; 3]; 3];
                for (a, &n) in nodes.iter().enumerate() {
                    for i in 0..3 {
                        let ui = u[3 * n + i];
                        for j in 0..3 {
                            grad[i][j] += ui * g[a][j];
                        }
                    }
                }
                let tr = grad[0][0] + grad[1][1] + grad[2][2];
                let dt = temperature[tets[t][v]] - self.t0;
                let p = self.lambda * tr - self.beta * dt;
                let m = self.mu;
                *s = [
                    2.0 * m * grad[0][0] + p,
                    2.0 * m * grad[1][1] + p,
                    2.0 * m * grad[2][2] + p,
                    m * (grad[0][1] + grad[1][0]),
                    m * (grad[1][2] + grad[2][1]),
                    m * (grad[0][2] + grad[2][0]),
                ];
            }
        });
        out
    }

    /// Element-vertex von Mises field (MPa) of a tensor field from
    /// [`ElasticSolver::stress_tensors`].
    pub fn von_mises_field(tensors: &[SymTensor]) -> Vec<[f64; 4]> {
        tensors
            .chunks(4)
            .map(|c| std::array::from_fn(|v| von_mises(&c[v]) / PA_PER_MPA))
            .collect()
    }

    /// Solve for one knot: temperature on the vertices, rotation in rad/s.
    pub fn solve_step(&self, temperature: &[f64], omega: f64) -> Result<StressSnapshot, ElasticError> {
        let u = self.displacement(temperature, omega)?;
        let s = self.stress_tensors(&u, temperature);
        Ok(StressSnapshot::from_von_mises(
            &self.mesh,
            Self::von_mises_field(&s),
            u,
        ))
    }

    /// One snapshot per temperature field; `omega_hz[k]` pairs with
    /// `fields[k]`.
    pub fn run(&self, fields: &[Vec<f64>], omega_hz: &[f64]) -> Result<MechanicalTrajectory, ElasticError> {
        if fields.len() != omega_hz.len() {
            return Err(ElasticError::TrajectoryMismatch {
                expected: omega_hz.len(),
                got: fields.len(),
            });
        }
        let snapshots = fields
            .par_iter()
            .zip(omega_hz.par_iter())
            .enumerate()
            .map(|(k, (t, w))| {
                self.solve_step(t, 2.0 * std::f64::consts::PI * w)
                    .map_err(|e| match e {
                        ElasticError::Solver { source, .. } => ElasticError::Solver { step: k, source },
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MechanicalTrajectory::from_snapshots(snapshots))
    }
}
