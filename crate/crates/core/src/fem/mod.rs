//! Lagrange finite elements on tetrahedra: shape functions, quadrature,
//! operator assembly and displacement constraints.

mod assembly;
mod constraints;
mod material;
pub mod quadrature;
pub mod shape;

use std::sync::Arc;

use thiserror::Error;

use crate::sparse::CsrMatrix;

pub use assembly::{
    assemble_elasticity, assemble_heat, elastic_element_stiffness, ElasticityOperators,
    HeatOperators, MassMode,
};
pub use constraints::{
    apply_dirichlet, apply_symmetry, ConstrainedMatrix, Constraints, NodalTransform,
};
pub use material::MaterialProperties;
pub use shape::{shape_eval, ElementOrder, ShapeEval, TetGeometry};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("barycentric point {0:?} is not inside the reference element")]
    InvalidPoint([f64; 4]),
    #[error("element order {0} is not supported")]
    UnsupportedOrder(u32),
    #[error("time step must be positive, got {0}")]
    NonpositiveDt(f64),
    #[error("temperature field has {got} values, expected {expected}")]
    MissingTemperatureField { expected: usize, got: usize },
    #[error("vector has {got} values, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("elasticity requires a mesh promoted to P2")]
    NotP2,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("constraints leave rigid-body motion free: {0}")]
    RigidBodyMode(String),
    #[error("symmetry patch {tag} is not planar (normal deviation {deviation:.3e})")]
    NonPlanarSymmetry { tag: i32, deviation: f64 },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
}

/// Numbering of nodal unknowns: `dof = node · components + component`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub n_nodes: usize,
    pub components: usize,
}

impl DofMap {
    pub fn scalar(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            components: 1,
        }
    }

    pub fn vector(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            components: 3,
        }
    }

    #[inline]
    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    pub fn len(&self) -> usize {
        self.n_nodes * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes == 0
    }
}

/// Assembled linear system `A x = b`. After constraint application the
/// unknowns may be expressed in rotated nodal frames; use
/// [`SparseSystem::to_physical`] to map a solution back.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
    pub transform: Option<Arc<NodalTransform>>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, dof_map: DofMap) -> Self {
        assert_eq!(matrix.dim(), rhs.len());
        assert_eq!(dof_map.len(), rhs.len());
        Self {
            matrix,
            rhs,
            dof_map,
            transform: None,
        }
    }

    pub fn to_physical(&self, x: &[f64]) -> Vec<f64> {
        match &self.transform {
            Some(t) => t.to_physical(x),
            None => x.to_vec(),
        }
    }
}
