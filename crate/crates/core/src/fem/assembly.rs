//! Assembly of the heat and thermoelastic forms.
//!
//! Heat (P1 on vertices), backward Euler step n → n+1:
//!   (ρc_p/Δt) M T⁺ + K T⁺ + H T⁺ = (ρc_p/Δt) M Tⁿ + T_e b
//! with H, b integrated over Robin patches only.
//!
//! Elasticity (P2, three components per node):
//!   ∫ 2μ ε(u):ε(v) + λ div u div v = ∫ ρω² x_p·v + ∫ α(3λ+2μ)(T − T0) div v.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{tet_degree2, tet_degree4, tri_degree2, TetRule};
use super::shape::{values, ElementOrder, TetGeometry};
use super::{DofMap, FemError, MaterialProperties, SparseSystem};
use crate::mesh::{Mesh, PatchLabel};
use crate::sparse::{CsrMatrix, RectCsr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    #[default]
    Consistent,
    /// Row-sum lumped capacity; keeps backward Euler free of undershoot on
    /// non-obtuse meshes.
    Lumped,
}

/// Time-step independent heat operators on the vertex (P1) space.
#[derive(Debug, Clone)]
pub struct HeatOperators {
    /// ∫ ρc_p φ_i φ_j
    pub mass: CsrMatrix,
    /// ∫ k ∇φ_i·∇φ_j
    pub stiffness: CsrMatrix,
    /// ∮_Robin h φ_i φ_j
    pub robin: CsrMatrix,
    /// ∮_Robin h φ_i
    pub robin_load: Vec<f64>,
    pub robin_area: f64,
}

impl HeatOperators {
    pub fn assemble(mesh: &Mesh, mat: &MaterialProperties) -> Result<Self, FemError> {
        mat.validate()?;
        let n = mesh.n_vertices();
        let pattern = CsrMatrix::from_element_dofs(n, mesh.tets().iter().map(|t| &t[..]));
        let rule = tet_degree2();
        let cap = mat.heat_capacity();
        let locals: Vec<([f64; 16], [f64; 16])> = mesh
            .tets()
            .par_iter()
            .enumerate()
            .map(|(t, _)| {
                let geo = TetGeometry::new(&mesh.tet_vertices(t));
                let mut m = [0.0; 16];
                for (p, w) in rule.iter() {
                    let phi = values(ElementOrder::P1, p);
                    for a in 0..4 {
                        for b in 0..4 {
                            m[a * 4 + b] += cap * w * 6.0 * geo.volume * phi[a] * phi[b];
                        }
                    }
                }
                let mut k = [0.0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        let g = (0..3)
                            .map(|c| geo.grad_lambda[a][c] * geo.grad_lambda[b][c])
                            .sum::<f64>();
                        k[a * 4 + b] = mat.k * geo.volume * g;
                    }
                }
                (m, k)
            })
            .collect();
        let mut mass = pattern.clone();
        let mut stiffness = pattern.clone();
        for (tet, (m, k)) in mesh.tets().iter().zip(&locals) {
            mass.add_element(tet, m);
            stiffness.add_element(tet, k);
        }

        let mut robin = pattern;
        let mut robin_load = vec![0.0; n];
        let mut robin_area = 0.0;
        let tri_rule = tri_degree2();
        for tri in mesh.tris_with_label(PatchLabel::Robin) {
            let (area, _) = mesh.tri_area_normal(tri);
            robin_area += area;
            let mut h = [0.0; 9];
            for (p, w) in tri_rule.iter() {
                let jw = w * 2.0 * area;
                for a in 0..3 {
                    robin_load[tri.nodes[a]] += mat.h * jw * p[a];
                    for b in 0..3 {
                        h[a * 3 + b] += mat.h * jw * p[a] * p[b];
                    }
                }
            }
            robin.add_element(&tri.nodes, &h);
        }
        Ok(Self {
            mass,
            stiffness,
            robin,
            robin_load,
            robin_area,
        })
    }

    pub fn n(&self) -> usize {
        self.robin_load.len()
    }

    fn capacity_matrix(&self, mode: MassMode) -> CsrMatrix {
        match mode {
            MassMode::Consistent => self.mass.clone(),
            MassMode::Lumped => {
                let sums = self.mass.row_sums();
                let mut m = self.mass.scaled(0.0);
                for (i, s) in sums.into_iter().enumerate() {
                    m.add(i, i, s);
                }
                m
            }
        }
    }

    /// Implicit-step operator `C/Δt + K + H` and the scaled capacity `C/Δt`.
    pub fn step_matrices(&self, dt: f64, mode: MassMode) -> Result<(CsrMatrix, CsrMatrix), FemError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FemError::NonpositiveDt(dt));
        }
        let cap = self.capacity_matrix(mode).scaled(1.0 / dt);
        let mut a = cap.clone();
        a.axpy(1.0, &self.stiffness);
        a.axpy(1.0, &self.robin);
        Ok((a, cap))
    }

    /// Right-hand side `C/Δt · Tⁿ + T_e b`.
    pub fn step_rhs(&self, cap_dt: &CsrMatrix, t_prev: &[f64], t_e: f64) -> Vec<f64> {
        let mut rhs = cap_dt.mul_vec(t_prev);
        rhs.iter_mut()
            .zip(&self.robin_load)
            .for_each(|(r, b)| *r += t_e * b);
        rhs
    }
}

/// One backward Euler step of the heat equation as a linear system in
/// T_{n+1} (consistent capacity).
pub fn assemble_heat(
    mesh: &Mesh,
    mat: &MaterialProperties,
    dt: f64,
    t_prev: &[f64],
    t_e: f64,
) -> Result<SparseSystem, FemError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FemError::NonpositiveDt(dt));
    }
    if t_prev.len() != mesh.n_vertices() {
        return Err(FemError::LengthMismatch {
            expected: mesh.n_vertices(),
            got: t_prev.len(),
        });
    }
    let ops = HeatOperators::assemble(mesh, mat)?;
    if ops.robin_area == 0.0 {
        log::warn!("no Robin patch: temperature cannot change from its initial state");
    }
    let (a, cap) = ops.step_matrices(dt, MassMode::Consistent)?;
    let rhs = ops.step_rhs(&cap, t_prev, t_e);
    Ok(SparseSystem::new(a, rhs, DofMap::scalar(mesh.n_vertices())))
}

/// Element stiffness of a quadratic tetrahedron, 30×30 row-major with
/// unknown ordering `3·node + component`.
pub fn elastic_element_stiffness(
    points: &[[f64; 3]; 4],
    mat: &MaterialProperties,
    rule: &TetRule,
) -> Vec<f64> {
    let geo = TetGeometry::new(points);
    let (lam, mu) = (mat.lambda(), mat.mu());
    let mut k = vec![0.0; 900];
    for (p, w) in rule.iter() {
        let jw = w * 6.0 * geo.volume;
        let g = geo.gradients(ElementOrder::P2, p);
        for a in 0..10 {
            for b in 0..10 {
                let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                for i in 0..3 {
                    let row = (3 * a + i) * 30;
                    for j in 0..3 {
                        let mut v = lam * g[a][i] * g[b][j] + mu * g[a][j] * g[b][i];
                        if i == j {
                            v += mu * gg;
                        }
                        k[row + 3 * b + j] += jw * v;
                    }
                }
            }
        }
    }
    k
}

/// Temperature- and speed-independent elasticity operators on a P2 mesh.
#[derive(Debug, Clone)]
pub struct ElasticityOperators {
    pub stiffness: CsrMatrix,
    /// Centrifugal load for ω = 1 rad/s: ∫ ρ x_p·v.
    pub centrifugal_unit: Vec<f64>,
    /// Maps vertex temperature increments (T − T0) to the thermal load
    /// ∫ α(3λ+2μ)(T − T0) div v.
    pub thermal: RectCsr,
    pub dof_map: DofMap,
    pub t0: f64,
}

impl ElasticityOperators {
    pub fn assemble(mesh: &Mesh, mat: &MaterialProperties) -> Result<Self, FemError> {
        mat.validate()?;
        if !mesh.is_p2() {
            return Err(FemError::NotP2);
        }
        let dof_map = DofMap::vector(mesh.n_nodes());
        let elems: Vec<[usize; 30]> = (0..mesh.tets().len())
            .map(|t| {
                let nodes = mesh.p2_element(t);
                let mut d = [0usize; 30];
                for (a, &n) in nodes.iter().enumerate() {
                    for c in 0..3 {
                        d[3 * a + c] = dof_map.dof(n, c);
                    }
                }
                d
            })
            .collect();
        let mut stiffness = CsrMatrix::from_element_dofs(dof_map.len(), elems.iter().map(|e| &e[..]));
        let rule = tet_degree4();
        let beta = mat.thermal_modulus();

        struct Local {
            k: Vec<f64>,
            f: [f64; 30],
            g: Vec<(usize, usize, f64)>,
        }
        let locals: Vec<Local> = (0..mesh.tets().len())
            .into_par_iter()
            .map(|t| {
                let pts = mesh.tet_vertices(t);
                let k = elastic_element_stiffness(&pts, mat, &rule);
                let geo = TetGeometry::new(&pts);
                let verts = mesh.tets()[t];
                let mut f = [0.0; 30];
                let mut gl = [[0.0; 4]; 30];
                for (p, w) in rule.iter() {
                    let jw = w * 6.0 * geo.volume;
                    let n2 = values(ElementOrder::P2, p);
                    let grads = geo.gradients(ElementOrder::P2, p);
                    let x: [f64; 3] = std::array::from_fn(|c| (0..4).map(|v| p[v] * pts[v][c]).sum());
                    for a in 0..10 {
                        f[3 * a] += jw * mat.rho * x[0] * n2[a];
                        f[3 * a + 1] += jw * mat.rho * x[1] * n2[a];
                        for c in 0..3 {
                            for j in 0..4 {
                                gl[3 * a + c][j] += jw * beta * p[j] * grads[a][c];
                            }
                        }
                    }
                }
                let g = (0..30)
                    .flat_map(|r| (0..4).map(move |j| (r, j)))
                    .map(|(r, j)| (r, verts[j], gl[r][j]))
                    .collect();
                Local { k, f, g }
            })
            .collect();

        let mut centrifugal_unit = vec![0.0; dof_map.len()];
        let mut trip = Vec::with_capacity(locals.len() * 120);
        for (dofs, l) in elems.iter().zip(locals) {
            stiffness.add_element(dofs, &l.k);
            for (r, v) in dofs.iter().zip(l.f) {
                centrifugal_unit[*r] += v;
            }
            trip.extend(l.g.into_iter().map(|(r, j, v)| (dofs[r], j, v)));
        }
        let thermal = RectCsr::from_triplets(dof_map.len(), mesh.n_vertices(), trip);
        Ok(Self {
            stiffness,
            centrifugal_unit,
            thermal,
            dof_map,
            t0: mat.t0,
        })
    }

    /// Load vector for rotation `omega` (rad/s) and vertex temperatures.
    pub fn load(&self, omega: f64, temperature: &[f64]) -> Result<Vec<f64>, FemError> {
        if temperature.len() != self.thermal.ncols {
            return Err(FemError::MissingTemperatureField {
                expected: self.thermal.ncols,
                got: temperature.len(),
            });
        }
        let dt: Vec<f64> = temperature.iter().map(|t| t - self.t0).collect();
        let mut f = self.thermal.mul_vec(&dt);
        let w2 = omega * omega;
        f.iter_mut()
            .zip(&self.centrifugal_unit)
            .for_each(|(a, c)| *a += w2 * c);
        Ok(f)
    }
}

/// Unconstrained thermoelastic system for vertex temperatures and rotation
/// `omega` in rad/s.
pub fn assemble_elasticity(
    mesh: &Mesh,
    mat: &MaterialProperties,
    temperature: &[f64],
    omega: f64,
) -> Result<SparseSystem, FemError> {
    let ops = ElasticityOperators::assemble(mesh, mat)?;
    let rhs = ops.load(omega, temperature)?;
    Ok(SparseSystem::new(ops.stiffness, rhs, ops.dof_map))
}
