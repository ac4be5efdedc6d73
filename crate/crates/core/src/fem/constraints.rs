//! Homogeneous and prescribed displacement constraints.
//!
//! Symmetry planes constrain the displacement component normal to the plane.
//! Nodes whose constraint normals are not coordinate axes are expressed in a
//! rotated nodal frame `u' = R u`, giving the transformed operator
//! `K' = T K Tᵀ`. Constrained unknowns are removed by symmetric row/column
//! elimination with a unit diagonal.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix6, SymmetricEigen};

use super::{FemError, SparseSystem};
use crate::mesh::{cross, dot3, Mesh, PatchLabel, Point};
use crate::sparse::CsrMatrix;

const AXIS_TOL: f64 = 1e-12;
const PLANAR_TOL: f64 = 1e-6;

type Frame = [[f64; 3]; 3];

/// Block-diagonal rotation acting on 3-component nodal unknowns. Nodes
/// without an entry keep the global frame.
#[derive(Debug, Clone, Default)]
pub struct NodalTransform {
    frames: BTreeMap<usize, Frame>,
}

impl NodalTransform {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, node: usize) -> Option<&Frame> {
        self.frames.get(&node)
    }

    /// `T v`: global components to nodal-frame components.
    pub fn to_local(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for (&n, r) in &self.frames {
            let g = [v[3 * n], v[3 * n + 1], v[3 * n + 2]];
            for a in 0..3 {
                out[3 * n + a] = dot3(&r[a], &g);
            }
        }
        out
    }

    /// `Tᵀ v`: nodal-frame components back to global components.
    pub fn to_physical(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for (&n, r) in &self.frames {
            for b in 0..3 {
                out[3 * n + b] = (0..3).map(|a| r[a][b] * v[3 * n + a]).sum();
            }
        }
        out
    }

    /// `T K Tᵀ`. Requires the three rows of each rotated node to share one
    /// column pattern, which holds for any matrix assembled with full nodal
    /// blocks.
    pub fn transform_matrix(&self, k: &CsrMatrix) -> CsrMatrix {
        let mut m = k.clone();
        if self.frames.is_empty() {
            return m;
        }
        let row_ptr = m.row_ptr().to_vec();
        let col_idx = m.col_idx().to_vec();
        let vals = m.values_mut();
        // K Tᵀ: mix the three columns of each rotated node within every row
        for r in 0..row_ptr.len() - 1 {
            let (s, e) = (row_ptr[r], row_ptr[r + 1]);
            let mut p = s;
            while p < e {
                let c = col_idx[p];
                if c % 3 == 0 && p + 2 < e && col_idx[p + 2] == c + 2 {
                    if let Some(rot) = self.frames.get(&(c / 3)) {
                        let old = [vals[p], vals[p + 1], vals[p + 2]];
                        for a in 0..3 {
                            vals[p + a] = dot3(&rot[a], &old);
                        }
                    }
                    p += 3;
                } else {
                    debug_assert!(!self.frames.contains_key(&(c / 3)));
                    p += 1;
                }
            }
        }
        // T (K Tᵀ): mix the three rows of each rotated node
        for (&n, rot) in &self.frames {
            let rows = [3 * n, 3 * n + 1, 3 * n + 2];
            let len = row_ptr[rows[0] + 1] - row_ptr[rows[0]];
            debug_assert!(rows.iter().all(|&r| row_ptr[r + 1] - row_ptr[r] == len));
            for q in 0..len {
                let old = [
                    vals[row_ptr[rows[0]] + q],
                    vals[row_ptr[rows[1]] + q],
                    vals[row_ptr[rows[2]] + q],
                ];
                for a in 0..3 {
                    vals[row_ptr[rows[a]] + q] = dot3(&rot[a], &old);
                }
            }
        }
        m
    }
}

/// A constrained operator ready for repeated right-hand sides.
#[derive(Debug, Clone)]
pub struct ConstrainedMatrix {
    pub matrix: CsrMatrix,
    /// `K'[:, c] g_c` over constrained columns; subtracted from every load.
    lift: Vec<f64>,
}

/// Set of constrained unknowns (in nodal frames) with prescribed values.
#[derive(Debug, Clone)]
pub struct Constraints {
    n_dofs: usize,
    fixed: BTreeMap<usize, f64>,
    transform: Arc<NodalTransform>,
}

impl Constraints {
    pub fn none(n_dofs: usize) -> Self {
        Self {
            n_dofs,
            fixed: BTreeMap::new(),
            transform: Arc::new(NodalTransform::default()),
        }
    }

    /// Normal-component constraints on every node of the SymX/SymY patches.
    pub fn symmetry(mesh: &Mesh) -> Result<Self, FemError> {
        let tags: Vec<i32> = mesh
            .patches()
            .iter()
            .filter(|(_, l)| l.is_symmetry())
            .map(|(&t, _)| t)
            .collect();
        Self::normal_on_tags(mesh, &tags)
    }

    /// Constrains the displacement component normal to each listed planar
    /// patch, for all nodes lying on it.
    pub fn normal_on_tags(mesh: &Mesh, tags: &[i32]) -> Result<Self, FemError> {
        let n_dofs = 3 * mesh.n_nodes();
        let mut node_normals: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
        for &tag in tags {
            let tris: Vec<_> = mesh.boundary().iter().filter(|b| b.tag == tag).collect();
            if tris.is_empty() {
                continue;
            }
            let mut sum = [0.0; 3];
            for t in &tris {
                let (a, n) = mesh.tri_area_normal(t);
                for c in 0..3 {
                    sum[c] += a * n[c];
                }
            }
            let len = dot3(&sum, &sum).sqrt();
            if len == 0.0 {
                return Err(FemError::NonPlanarSymmetry {
                    tag,
                    deviation: f64::INFINITY,
                });
            }
            let mut normal = sum.map(|v| v / len);
            let deviation = tris
                .iter()
                .map(|t| {
                    let n = mesh.tri_area_normal(t).1;
                    1.0 - dot3(&n, &normal)
                })
                .fold(0.0, f64::max);
            if deviation > PLANAR_TOL {
                return Err(FemError::NonPlanarSymmetry { tag, deviation });
            }
            snap_axis(&mut normal);
            for t in &tris {
                for node in mesh.tri_nodes(t) {
                    let list = node_normals.entry(node).or_default();
                    if !list.iter().any(|m| dot3(m, &normal).abs() > 1.0 - 1e-9) {
                        list.push(normal);
                    }
                }
            }
        }

        let mut fixed = BTreeMap::new();
        let mut transform = NodalTransform::default();
        for (node, normals) in node_normals {
            let axes: Option<Vec<usize>> = normals.iter().map(|n| axis_of(n)).collect();
            if let Some(axes) = axes {
                for c in axes {
                    fixed.insert(3 * node + c, 0.0);
                }
                continue;
            }
            let frame = frame_from_normals(&normals)?;
            for a in 0..normals.len().min(3) {
                fixed.insert(3 * node + a, 0.0);
            }
            transform.frames.insert(node, frame);
        }
        Ok(Self {
            n_dofs,
            fixed,
            transform: Arc::new(transform),
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn n_constrained(&self) -> usize {
        self.fixed.len()
    }

    pub fn transform(&self) -> &Arc<NodalTransform> {
        &self.transform
    }

    /// Whether a global displacement component of `node` is constrained.
    pub fn is_fixed(&self, node: usize, component: usize) -> bool {
        self.local_dof(node, component)
            .map(|d| self.fixed.contains_key(&d))
            .unwrap_or(false)
    }

    fn local_dof(&self, node: usize, component: usize) -> Option<usize> {
        match self.transform.frame(node) {
            None => Some(3 * node + component),
            Some(r) => (0..3)
                .find(|&a| r[a][component].abs() > 1.0 - AXIS_TOL)
                .map(|a| 3 * node + a),
        }
    }

    /// Prescribes a global displacement component. Fails when the node uses
    /// a rotated frame in which that component is not a frame axis.
    pub fn add_fixed(&mut self, node: usize, component: usize, value: f64) -> Result<(), FemError> {
        if component > 2 || 3 * node + component >= self.n_dofs {
            return Err(FemError::InvalidConstraint(format!(
                "dof ({node}, {component}) out of range"
            )));
        }
        let dof = self.local_dof(node, component).ok_or_else(|| {
            FemError::InvalidConstraint(format!(
                "component {component} of node {node} is not a frame axis"
            ))
        })?;
        let sign = match self.transform.frame(node) {
            Some(r) => r[dof % 3][component].signum(),
            None => 1.0,
        };
        self.fixed.insert(dof, sign * value);
        Ok(())
    }

    /// Fixes one axial component if no constraint does so yet. Returns the
    /// node used.
    pub fn pin_axial(&mut self, mesh: &Mesh) -> Result<Option<usize>, FemError> {
        let already = (0..mesh.n_nodes()).any(|n| self.is_fixed(n, 2));
        if already {
            return Ok(None);
        }
        let node = (0..mesh.n_nodes())
            .find(|&n| self.local_dof(n, 2).is_some())
            .ok_or_else(|| FemError::InvalidConstraint("no node admits an axial pin".into()))?;
        self.add_fixed(node, 2, 0.0)?;
        Ok(Some(node))
    }

    /// Fails when some rigid-body motion satisfies every constraint.
    ///
    /// Each constrained unknown is a linear functional on the six rigid
    /// modes; the modes are fixed iff the Gram matrix of these functionals
    /// is nonsingular.
    pub fn check_rigid_modes(&self, mesh: &Mesh) -> Result<(), FemError> {
        let nodes = mesh.nodes();
        let (lo, hi) = bbox(nodes);
        let center = [0, 1, 2].map(|c| 0.5 * (lo[c] + hi[c]));
        let scale = ((0..3).map(|c| (hi[c] - lo[c]).powi(2)).sum::<f64>())
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let mut gram = Matrix6::<f64>::zeros();
        for &dof in self.fixed.keys() {
            let (node, a) = (dof / 3, dof % 3);
            let x = [0, 1, 2].map(|c| (nodes[node][c] - center[c]) / scale);
            let dir = match self.transform.frame(node) {
                Some(r) => r[a],
                None => {
                    let mut e = [0.0; 3];
                    e[a] = 1.0;
                    e
                }
            };
            // functional value on translations e_k and rotations e_k × x
            let mut row = [0.0; 6];
            for k in 0..3 {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                row[k] = dir[k];
                row[3 + k] = dot3(&dir, &cross(&e, &x));
            }
            for i in 0..6 {
                for j in 0..6 {
                    gram[(i, j)] += row[i] * row[j];
                }
            }
        }
        let eig = SymmetricEigen::new(gram);
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max().max(1.0);
        if min <= 1e-10 * max {
            let k = eig.eigenvalues.imin();
            let v = eig.eigenvectors.column(k);
            return Err(FemError::RigidBodyMode(format!(
                "free mode (tx,ty,tz,rx,ry,rz) ≈ ({:.2},{:.2},{:.2},{:.2},{:.2},{:.2})",
                v[0], v[1], v[2], v[3], v[4], v[5]
            )));
        }
        Ok(())
    }

    /// Rotates into nodal frames and eliminates constrained unknowns.
    pub fn apply_matrix(&self, k: &CsrMatrix) -> ConstrainedMatrix {
        assert_eq!(k.dim(), self.n_dofs);
        let mut m = self.transform.transform_matrix(k);
        let mut lift = vec![0.0; self.n_dofs];
        let n = m.dim();
        let row_ptr = m.row_ptr().to_vec();
        let col_idx = m.col_idx().to_vec();
        let vals = m.values_mut();
        for r in 0..n {
            let row_fixed = self.fixed.contains_key(&r);
            for p in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[p];
                if let Some(&g) = self.fixed.get(&c) {
                    if !row_fixed {
                        lift[r] += vals[p] * g;
                    }
                    vals[p] = if r == c { 1.0 } else { 0.0 };
                } else if row_fixed {
                    vals[p] = 0.0;
                }
            }
        }
        ConstrainedMatrix { matrix: m, lift }
    }

    /// Load vector matching [`Constraints::apply_matrix`].
    pub fn apply_rhs(&self, cm: &ConstrainedMatrix, f: &[f64]) -> Vec<f64> {
        let mut b = self.transform.to_local(f);
        b.iter_mut().zip(&cm.lift).for_each(|(b, l)| *b -= l);
        for (&d, &g) in &self.fixed {
            b[d] = g;
        }
        b
    }

    pub fn apply(&self, system: SparseSystem) -> SparseSystem {
        if self.fixed.is_empty() && self.transform.is_empty() {
            return system;
        }
        let cm = self.apply_matrix(&system.matrix);
        let rhs = self.apply_rhs(&cm, &system.rhs);
        SparseSystem {
            matrix: cm.matrix,
            rhs,
            dof_map: system.dof_map,
            transform: (!self.transform.is_empty()).then(|| self.transform.clone()),
        }
    }

    /// Global displacement from a solution of the constrained system.
    pub fn recover(&self, x: &[f64]) -> Vec<f64> {
        self.transform.to_physical(x)
    }
}

fn snap_axis(n: &mut Point) {
    if let Some(c) = axis_of(n) {
        let s = n[c].signum();
        *n = [0.0; 3];
        n[c] = s;
    }
}

fn axis_of(n: &Point) -> Option<usize> {
    (0..3).find(|&c| n[c].abs() > 1.0 - AXIS_TOL)
}

fn normalize(v: Point) -> Option<Point> {
    let l = dot3(&v, &v).sqrt();
    (l > 1e-9).then(|| v.map(|x| x / l))
}

/// Orthonormal frame whose leading axes span the given normals. A frame
/// axis is kept along z whenever the normals are orthogonal to it.
fn frame_from_normals(normals: &[Point]) -> Result<Frame, FemError> {
    let e1 = normals[0];
    let z = [0.0, 0.0, 1.0];
    let e2 = if normals.len() >= 2 {
        let n2 = normals[1];
        let d = dot3(&n2, &e1);
        normalize([0, 1, 2].map(|c| n2[c] - d * e1[c]))
            .ok_or_else(|| FemError::InvalidConstraint("parallel constraint normals".into()))?
    } else {
        normalize(cross(&z, &e1))
            .or_else(|| normalize(cross(&[1.0, 0.0, 0.0], &e1)))
            .expect("nonzero normal")
    };
    let mut e2 = e2;
    let mut e3 = cross(&e1, &e2);
    if dot3(&e3, &z) < 0.0 {
        e2 = e2.map(|v| -v);
        e3 = e3.map(|v| -v);
    }
    Ok([e1, e2, e3])
}

fn bbox(nodes: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in nodes {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

/// Eliminates the symmetry-plane normal components of an elasticity system.
/// Without symmetry patches the system is returned untouched.
pub fn apply_symmetry(system: SparseSystem, mesh: &Mesh) -> Result<SparseSystem, FemError> {
    let has_sym = mesh.boundary().iter().any(|b| {
        mesh.label_of(b.tag)
            .map(PatchLabel::is_symmetry)
            .unwrap_or(false)
    });
    if !has_sym {
        return Ok(system);
    }
    Ok(Constraints::symmetry(mesh)?.apply(system))
}

/// Prescribes `(dof, value)` pairs in the global frame with symmetric
/// elimination and lifting.
pub fn apply_dirichlet(system: SparseSystem, values: &[(usize, f64)]) -> Result<SparseSystem, FemError> {
    let n = system.rhs.len();
    let mut c = Constraints::none(n);
    for &(dof, v) in values {
        if dof >= n {
            return Err(FemError::InvalidConstraint(format!("dof {dof} out of range")));
        }
        c.fixed.insert(dof, v);
    }
    Ok(c.apply(system))
}
