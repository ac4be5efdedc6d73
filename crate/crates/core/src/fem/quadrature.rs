//! Symmetric quadrature rules on the reference tetrahedron and triangle,
//! with points in barycentric coordinates and weights summing to the
//! reference measure (1/6 and 1/2).

#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

pub type TetRule = QuadratureRule<4>;
pub type TriRule = QuadratureRule<3>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn perms4(a: f64, b: f64, c: f64, d: f64) -> Vec<[f64; 4]> {
    let base = [a, b, c, d];
    let mut out: Vec<[f64; 4]> = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    if i != j && i != k && i != l && j != k && j != l && k != l {
                        let p = [base[i], base[j], base[k], base[l]];
                        if !out.contains(&p) {
                            out.push(p);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Centroid only; degree 1.
pub fn tet_degree1() -> TetRule {
    TetRule {
        points: vec![[0.25; 4]],
        weights: vec![1.0 / 6.0],
        degree: 1,
    }
}

/// Four-point rule, degree 2.
pub fn tet_degree2() -> TetRule {
    let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
    let b = (5.0 - 5f64.sqrt()) / 20.0;
    let points = perms4(a, b, b, b);
    TetRule {
        weights: vec![1.0 / 24.0; points.len()],
        points,
        degree: 2,
    }
}

/// Keast's eleven-point rule, degree 4 (negative centroid weight).
pub fn tet_degree4() -> TetRule {
    let mut points = vec![[0.25; 4]];
    let mut weights = vec![-74.0 / 5625.0];
    for p in perms4(11.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0) {
        points.push(p);
        weights.push(343.0 / 45000.0);
    }
    let s = (5.0f64 / 14.0).sqrt();
    let a = (1.0 + s) / 4.0;
    let b = (1.0 - s) / 4.0;
    for p in perms4(a, a, b, b) {
        points.push(p);
        weights.push(56.0 / 2250.0);
    }
    TetRule {
        points,
        weights,
        degree: 4,
    }
}

/// Three-point edge-interior rule on the triangle, degree 2.
pub fn tri_degree2() -> TriRule {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    TriRule {
        points: vec![[a, b, b], [b, a, b], [b, b, a]],
        weights: vec![1.0 / 6.0; 3],
        degree: 2,
    }
}
