//! Lagrange shape functions on tetrahedra in barycentric form.
//!
//! P2 numbering: vertices 0..4, then edge midpoints in
//! [`crate::mesh::TET_EDGES`] order.

use serde::{Deserialize, Serialize};

use super::FemError;
use crate::mesh::TET_EDGES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementOrder {
    P1,
    P2,
}

impl ElementOrder {
    pub fn n_basis(self) -> usize {
        match self {
            ElementOrder::P1 => 4,
            ElementOrder::P2 => 10,
        }
    }

    pub fn from_degree(d: u32) -> Result<Self, FemError> {
        match d {
            1 => Ok(ElementOrder::P1),
            2 => Ok(ElementOrder::P2),
            _ => Err(FemError::UnsupportedOrder(d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    /// Gradients with respect to the reference coordinates (ξ, η, ζ), where
    /// the barycentric point is (1 − ξ − η − ζ, ξ, η, ζ).
    pub ref_gradients: Vec<[f64; 3]>,
}

fn check_point(bary: &[f64; 4]) -> Result<(), FemError> {
    let tol = 1e-12;
    if bary.iter().any(|&l| !l.is_finite() || l < -tol) || (bary.iter().sum::<f64>() - 1.0).abs() > tol {
        return Err(FemError::InvalidPoint(*bary));
    }
    Ok(())
}

/// Values of all basis functions at a barycentric point (unchecked).
pub fn values(order: ElementOrder, l: &[f64; 4]) -> Vec<f64> {
    match order {
        ElementOrder::P1 => l.to_vec(),
        ElementOrder::P2 => {
            let mut v = Vec::with_capacity(10);
            for &li in l {
                v.push(li * (2.0 * li - 1.0));
            }
            for (a, b) in TET_EDGES {
                v.push(4.0 * l[a] * l[b]);
            }
            v
        }
    }
}

/// Derivatives ∂N/∂λ_k of all basis functions (unchecked).
pub fn bary_derivatives(order: ElementOrder, l: &[f64; 4]) -> Vec<[f64; 4]> {
    match order {
        ElementOrder::P1 => (0..4)
            .map(|i| {
                let mut d = [0.0; 4];
                d[i] = 1.0;
                d
            })
            .collect(),
        ElementOrder::P2 => {
            let mut out = Vec::with_capacity(10);
            for i in 0..4 {
                let mut d = [0.0; 4];
                d[i] = 4.0 * l[i] - 1.0;
                out.push(d);
            }
            for (a, b) in TET_EDGES {
                let mut d = [0.0; 4];
                d[a] = 4.0 * l[b];
                d[b] = 4.0 * l[a];
                out.push(d);
            }
            out
        }
    }
}

/// Basis values and reference gradients at a barycentric point.
pub fn shape_eval(order: ElementOrder, bary: [f64; 4]) -> Result<ShapeEval, FemError> {
    check_point(&bary)?;
    let values = values(order, &bary);
    let ref_gradients = bary_derivatives(order, &bary)
        .into_iter()
        .map(|d| [d[1] - d[0], d[2] - d[0], d[3] - d[0]])
        .collect();
    Ok(ShapeEval {
        values,
        ref_gradients,
    })
}

/// Affine tetrahedron: volume and the constant physical gradients of the
/// barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grad_lambda: [[f64; 3]; 4],
}

impl TetGeometry {
    pub fn new(p: &[[f64; 3]; 4]) -> Self {
        let col = |i: usize| [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]];
        let (a, b, c) = (col(1), col(2), col(3));
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
            + c[0] * (a[1] * b[2] - a[2] * b[1]);
        // rows of J⁻¹ for J = [a b c] are (b×c, c×a, a×b)/det
        let cr = |u: [f64; 3], v: [f64; 3]| {
            [
                (u[1] * v[2] - u[2] * v[1]) / det,
                (u[2] * v[0] - u[0] * v[2]) / det,
                (u[0] * v[1] - u[1] * v[0]) / det,
            ]
        };
        let g1 = cr(b, c);
        let g2 = cr(c, a);
        let g3 = cr(a, b);
        let g0 = [
            -g1[0] - g2[0] - g3[0],
            -g1[1] - g2[1] - g3[1],
            -g1[2] - g2[2] - g3[2],
        ];
        Self {
            volume: det / 6.0,
            grad_lambda: [g0, g1, g2, g3],
        }
    }

    /// Physical gradients of all basis functions at a barycentric point.
    pub fn gradients(&self, order: ElementOrder, l: &[f64; 4]) -> Vec<[f64; 3]> {
        bary_derivatives(order, l)
            .into_iter()
            .map(|d| {
                let mut g = [0.0; 3];
                for (k, dk) in d.iter().enumerate() {
                    for c in 0..3 {
                        g[c] += dk * self.grad_lambda[k][c];
                    }
                }
                g
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VERTS: [[f64; 4]; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];

    #[test]
    fn p1_lagrange_property() {
        for (i, v) in VERTS.iter().enumerate() {
            let s = shape_eval(ElementOrder::P1, *v).unwrap();
            for (j, val) in s.values.iter().enumerate() {
                assert_eq!(*val, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn p2_lagrange_property_at_all_nodes() {
        let mut nodes: Vec<[f64; 4]> = VERTS.to_vec();
        for (a, b) in TET_EDGES {
            let mut p = [0.0; 4];
            p[a] = 0.5;
            p[b] = 0.5;
            nodes.push(p);
        }
        for (i, p) in nodes.iter().enumerate() {
            let s = shape_eval(ElementOrder::P2, *p).unwrap();
            for (j, v) in s.values.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14, "node {i} basis {j}: {v}");
            }
        }
    }

    #[test]
    fn p1_reference_gradients_constant() {
        let s = shape_eval(ElementOrder::P1, [0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(s.ref_gradients[0], [-1.0, -1.0, -1.0]);
        assert_eq!(s.ref_gradients[2], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(shape_eval(ElementOrder::P1, [0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(shape_eval(ElementOrder::P2, [0.3, 0.3, 0.3, 0.3]).is_err());
        assert!(ElementOrder::from_degree(3).is_err());
    }

    #[test]
    fn geometry_of_reference_tet() {
        let g = TetGeometry::new(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g.grad_lambda[0], [-1.0, -1.0, -1.0]);
        assert_eq!(g.grad_lambda[3], [0.0, 0.0, 1.0]);
    }
}
