//! Parametric test geometries built from structured hexahedral grids.
//!
//! Every active grid cell is split into six tetrahedra along its main
//! diagonal (Kuhn subdivision), which is conforming across neighbouring
//! cells. Grid vertices may be merged (the cylinder axis, periodic seams);
//! tetrahedra that collapse under the merge are dropped.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    signed_volume, BoundaryTri, Mesh, MeshError, MeshOptions, PatchLabel, Point, TET_FACES,
};

/// Box face tags: x=0, x=lx, y=0, y=ly, z=0, z=lz.
pub const BOX_TAGS: [i32; 6] = [1, 2, 3, 4, 5, 6];

pub const SECTOR_TAG_BORE: i32 = 1;
pub const SECTOR_TAG_OUTER: i32 = 2;
pub const SECTOR_TAG_SYM_X: i32 = 3;
pub const SECTOR_TAG_SYM_Y: i32 = 4;
pub const SECTOR_TAG_END_FRONT: i32 = 5;
pub const SECTOR_TAG_END_BACK: i32 = 6;
pub const SECTOR_TAG_BLADE_END: i32 = 7;

/// The six Kuhn tetrahedra of the unit cube, as corner indices
/// `a + 2b + 4c` for corner offsets `(a, b, c)`.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

struct StructuredGrid<'a> {
    dims: [usize; 3],
    active: &'a dyn Fn(usize, usize, usize) -> bool,
    /// Canonical vertex key; equal keys are merged into one node.
    key: &'a dyn Fn(usize, usize, usize) -> (usize, usize, usize),
    position: &'a dyn Fn(usize, usize, usize) -> Point,
}

impl StructuredGrid<'_> {
    fn tetrahedralize(&self) -> (Vec<Point>, Vec<[usize; 4]>) {
        let [ni, nj, nk] = self.dims;
        let mut ids: HashMap<(usize, usize, usize), usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut tets = Vec::new();
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..ni {
                    if !(self.active)(i, j, k) {
                        continue;
                    }
                    let mut corner = [0usize; 8];
                    for (c, slot) in corner.iter_mut().enumerate() {
                        let (a, b, d) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
                        let (gi, gj, gk) = (i + a, j + b, k + d);
                        let key = (self.key)(gi, gj, gk);
                        *slot = *ids.entry(key).or_insert_with(|| {
                            nodes.push((self.position)(gi, gj, gk));
                            nodes.len() - 1
                        });
                    }
                    for kt in KUHN {
                        let mut t = [corner[kt[0]], corner[kt[1]], corner[kt[2]], corner[kt[3]]];
                        let distinct = (0..4).all(|a| (a + 1..4).all(|b| t[a] != t[b]));
                        if !distinct {
                            continue;
                        }
                        let v = signed_volume(&nodes[t[0]], &nodes[t[1]], &nodes[t[2]], &nodes[t[3]]);
                        if v < 0.0 {
                            t.swap(2, 3);
                        }
                        tets.push(t);
                    }
                }
            }
        }
        (nodes, tets)
    }
}

/// Exterior faces of a tet set, classified into tags by a callback on the
/// face vertex coordinates.
fn tag_exterior(
    nodes: &[Point],
    tets: &[[usize; 4]],
    classify: impl Fn(&[Point; 3]) -> i32,
) -> Vec<BoundaryTri> {
    let mut count: HashMap<[usize; 3], ([usize; 3], usize)> = HashMap::new();
    for tet in tets {
        for f in TET_FACES {
            let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
            let mut key = tri;
            key.sort_unstable();
            count.entry(key).or_insert((tri, 0)).1 += 1;
        }
    }
    let mut out: Vec<BoundaryTri> = count
        .into_values()
        .filter(|(_, c)| *c == 1)
        .map(|(tri, _)| {
            let pts = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            BoundaryTri {
                nodes: tri,
                tag: classify(&pts),
            }
        })
        .collect();
    out.sort_unstable_by_key(|b| b.nodes);
    out
}

/// Structured box `[0,lx]×[0,ly]×[0,lz]` with `6·nx·ny·nz` tets. Every face
/// gets its own tag (see [`BOX_TAGS`]) labelled Robin.
pub fn generate_box(
    lx: f64,
    ly: f64,
    lz: f64,
    nx: usize,
    ny: usize,
    nz: usize,
) -> Result<Mesh, MeshError> {
    for (name, v) in [("lx", lx), ("ly", ly), ("lz", lz)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(MeshError::InvalidDimension(format!("{name} must be > 0, got {v}")));
        }
    }
    for (name, v) in [("nx", nx), ("ny", ny), ("nz", nz)] {
        if v == 0 {
            return Err(MeshError::InvalidDimension(format!("{name} must be >= 1")));
        }
    }
    let pos = |i: usize, j: usize, k: usize| {
        [
            lx * i as f64 / nx as f64,
            ly * j as f64 / ny as f64,
            lz * k as f64 / nz as f64,
        ]
    };
    let grid = StructuredGrid {
        dims: [nx, ny, nz],
        active: &|_, _, _| true,
        key: &|i, j, k| (i, j, k),
        position: &pos,
    };
    let (nodes, tets) = grid.tetrahedralize();
    let eps = 1e-9 * lx.max(ly).max(lz);
    let boundary = tag_exterior(&nodes, &tets, |p| {
        let on = |axis: usize, v: f64| p.iter().all(|q| (q[axis] - v).abs() < eps);
        if on(0, 0.0) {
            BOX_TAGS[0]
        } else if on(0, lx) {
            BOX_TAGS[1]
        } else if on(1, 0.0) {
            BOX_TAGS[2]
        } else if on(1, ly) {
            BOX_TAGS[3]
        } else if on(2, 0.0) {
            BOX_TAGS[4]
        } else {
            BOX_TAGS[5]
        }
    });
    let patches = BOX_TAGS.iter().map(|&t| (t, PatchLabel::Robin)).collect();
    Mesh::new(nodes, tets, boundary, patches, MeshOptions { strict: true })
}

/// Radial blade fused on the outer rim of a sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BladeSpec {
    /// Radial extent beyond the rim (m).
    pub length: f64,
    /// Tangential thickness (m); constant along the blade.
    pub thickness: f64,
    /// Angular position of the blade centre line (rad); `None` = mid-sector.
    #[serde(default)]
    pub center_angle: Option<f64>,
    pub cells_radial: usize,
    pub cells_across: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorResolution {
    pub radial: usize,
    pub angular: usize,
    pub axial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    pub z_len: f64,
    pub angle: f64,
    #[serde(default)]
    pub blade: Option<BladeSpec>,
    pub resolution: SectorResolution,
}

impl SectorSpec {
    /// Quarter rotor disc with one blade, about 1.4 m across the blade tips
    /// and roughly 7k tetrahedra.
    pub fn demo() -> Self {
        Self {
            r_inner: 0.0,
            r_outer: 0.45,
            z_len: 0.15,
            angle: PI / 2.0,
            blade: Some(BladeSpec {
                length: 0.25,
                thickness: 0.01,
                center_angle: None,
                cells_radial: 8,
                cells_across: 2,
            }),
            resolution: SectorResolution {
                radial: 10,
                angular: 14,
                axial: 8,
            },
        }
    }

    /// Reduced-resolution variant of [`SectorSpec::demo`] (under 1k tets).
    pub fn demo_coarse() -> Self {
        let mut s = Self::demo();
        s.blade.as_mut().unwrap().cells_radial = 4;
        s.resolution = SectorResolution {
            radial: 5,
            angular: 8,
            axial: 3,
        };
        s
    }

    /// Analytic volume of the sector plus the blade block.
    pub fn analytic_volume(&self) -> f64 {
        let disc = 0.5 * self.angle * (self.r_outer.powi(2) - self.r_inner.powi(2)) * self.z_len;
        disc + self.blade.map_or(0.0, |b| b.length * b.thickness * self.z_len)
    }
}

/// Geometric progression of `n` cells over `[a, b]` whose last cell is
/// `ratio` times the first (ratio 1 = uniform).
fn graded(a: f64, b: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 0 {
        return vec![a];
    }
    if (ratio - 1.0).abs() < 1e-12 || n == 1 {
        return (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    }
    let q = ratio.powf(1.0 / (n as f64 - 1.0));
    let total: f64 = (0..n).map(|i| q.powi(i as i32)).sum();
    let mut out = vec![a];
    let mut acc = 0.0;
    for i in 0..n {
        acc += q.powi(i as i32) / total;
        out.push(a + (b - a) * acc);
    }
    *out.last_mut().unwrap() = b;
    out
}

/// Sector of an annulus (or solid cylinder when `r_inner = 0`) about the
/// z-axis, optionally with a radial blade on the rim.
///
/// Tags: bore (insulated), outer rim and blade surfaces (Robin), the cut at
/// θ = 0 (`SymX`), the cut at θ = angle (`SymY`), the end faces z = 0 and
/// z = z_len (insulated). A full circle (angle = 2π) has no cut faces.
pub fn generate_annular_sector(spec: &SectorSpec) -> Result<Mesh, MeshError> {
    let SectorSpec {
        r_inner,
        r_outer,
        z_len,
        angle,
        blade,
        resolution: res,
    } = *spec;
    if !(r_inner >= 0.0 && r_outer > r_inner && z_len > 0.0) || !r_outer.is_finite() {
        return Err(MeshError::InvalidDimension(format!(
            "need 0 <= r_inner < r_outer and z_len > 0 (got {r_inner}, {r_outer}, {z_len})"
        )));
    }
    if !(angle > 0.0 && angle <= 2.0 * PI + 1e-12) {
        return Err(MeshError::DegenerateSector(format!("angle {angle} outside (0, 2π]")));
    }
    if res.radial == 0 || res.angular == 0 || res.axial == 0 {
        return Err(MeshError::InvalidDimension("resolution counts must be >= 1".into()));
    }
    let full = (angle - 2.0 * PI).abs() < 1e-9;
    if full && res.angular < 3 {
        return Err(MeshError::DegenerateSector("a full circle needs >= 3 angular cells".into()));
    }

    // angular grid; blade cells get their own uniform block
    let (thetas, blade_cols) = match blade {
        None => (graded(0.0, angle, res.angular, 1.0), None),
        Some(b) => {
            if !(b.length > 0.0 && b.thickness > 0.0) || b.cells_radial == 0 || b.cells_across == 0 {
                return Err(MeshError::InvalidDimension("blade dimensions must be > 0".into()));
            }
            let centre = b.center_angle.unwrap_or(0.5 * angle);
            let half = (0.5 * b.thickness / r_outer).asin();
            let (lo, hi) = (centre - half, centre + half);
            if !(lo > 0.0 && hi < angle) || full {
                return Err(MeshError::DegenerateSector(
                    "blade must lie strictly inside a partial sector".into(),
                ));
            }
            let side = res.angular.saturating_sub(b.cells_across);
            if side < 2 {
                return Err(MeshError::DegenerateSector(
                    "angular resolution too small for blade".into(),
                ));
            }
            let left_cells = (side as f64 * lo / (lo + angle - hi)).round().clamp(1.0, side as f64 - 1.0) as usize;
            let right_cells = side - left_cells;
            // cells shrink toward the blade
            let mut th = graded(0.0, lo, left_cells, 0.35);
            th.pop();
            let mut mid = graded(lo, hi, b.cells_across, 1.0);
            mid.pop();
            th.extend(mid);
            th.extend(graded(hi, angle, right_cells, 1.0 / 0.35));
            let first = left_cells;
            (th, Some((first, first + b.cells_across, centre)))
        }
    };
    let n_theta = thetas.len() - 1;

    let disc_ratio = if blade.is_some() { 0.4 } else { 1.0 };
    let mut radii = graded(r_inner, r_outer, res.radial, disc_ratio);
    let n_disc = res.radial;
    if let Some(b) = blade {
        let outer = graded(r_outer, r_outer + b.length, b.cells_radial, 3.0);
        radii.extend_from_slice(&outer[1..]);
    }
    let zs = graded(0.0, z_len, res.axial, 1.0);
    let solid = r_inner == 0.0;

    let active = |i: usize, j: usize, _k: usize| -> bool {
        if i < n_disc {
            return true;
        }
        match blade_cols {
            Some((a, b, _)) => j >= a && j < b,
            None => false,
        }
    };
    let key = |i: usize, j: usize, k: usize| -> (usize, usize, usize) {
        let j = if full { j % n_theta } else { j };
        if solid && i == 0 {
            (0, 0, k)
        } else {
            (i, j, k)
        }
    };
    let position = |i: usize, j: usize, k: usize| -> Point {
        let r = radii[i];
        let z = zs[k];
        match blade_cols {
            Some((_, _, centre)) if i > n_disc => {
                // straight blade: constant tangential offset, radial along the centre line
                let th = thetas[j];
                let along = r - r_outer + r_outer * (th - centre).cos();
                let perp = r_outer * (th - centre).sin();
                let (c, s) = (centre.cos(), centre.sin());
                [along * c - perp * s, along * s + perp * c, z]
            }
            _ => {
                let th = thetas[j];
                [r * th.cos(), r * th.sin(), z]
            }
        }
    };
    let grid = StructuredGrid {
        dims: [radii.len() - 1, n_theta, res.axial],
        active: &active,
        key: &key,
        position: &position,
    };
    let (nodes, tets) = grid.tetrahedralize();

    let scale = r_outer + blade.map_or(0.0, |b| b.length);
    let eps = 1e-9 * scale.max(z_len);
    let (sa, ca) = angle.sin_cos();
    let boundary = tag_exterior(&nodes, &tets, |p| {
        let all = |f: &dyn Fn(&Point) -> bool| p.iter().all(f);
        let radius = |q: &Point| (q[0] * q[0] + q[1] * q[1]).sqrt();
        let in_disc = all(&|q| radius(q) <= r_outer * (1.0 + 1e-9));
        if !full && all(&|q| q[1].abs() < eps && q[0] >= -eps) {
            SECTOR_TAG_SYM_X
        } else if !full && all(&|q| (-sa * q[0] + ca * q[1]).abs() < eps && (ca * q[0] + sa * q[1]) >= -eps) {
            SECTOR_TAG_SYM_Y
        } else if all(&|q| q[2].abs() < eps) {
            if in_disc {
                SECTOR_TAG_END_FRONT
            } else {
                SECTOR_TAG_BLADE_END
            }
        } else if all(&|q| (q[2] - z_len).abs() < eps) {
            if in_disc {
                SECTOR_TAG_END_BACK
            } else {
                SECTOR_TAG_BLADE_END
            }
        } else if !solid && all(&|q| (radius(q) - r_inner).abs() < 1e-6 * r_outer) {
            SECTOR_TAG_BORE
        } else {
            SECTOR_TAG_OUTER
        }
    });
    let mut patches = BTreeMap::new();
    for b in &boundary {
        let label = match b.tag {
            SECTOR_TAG_OUTER | SECTOR_TAG_BLADE_END => PatchLabel::Robin,
            SECTOR_TAG_SYM_X => PatchLabel::SymX,
            SECTOR_TAG_SYM_Y => PatchLabel::SymY,
            _ => PatchLabel::Insulated,
        };
        patches.insert(b.tag, label);
    }
    Mesh::new(nodes, tets, boundary, patches, MeshOptions { strict: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshError;

    #[test]
    fn one_hex_box() {
        let m = generate_box(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.tets().len(), 6);
        assert_eq!(m.boundary().len(), 12);
    }

    #[test]
    fn box_counts_follow_construction_formula() {
        for n in 1..=4usize {
            let m = generate_box(1.0, 2.0, 0.5, n, n, n).unwrap();
            assert_eq!(m.n_vertices(), (n + 1).pow(3));
            assert_eq!(m.tets().len(), 6 * n.pow(3));
            assert_eq!(m.boundary().len(), 12 * n * n);
        }
    }

    #[test]
    fn box_volume_exact() {
        let m = generate_box(0.3, 0.7, 1.1, 3, 2, 5).unwrap();
        assert!((m.volume() - 0.3 * 0.7 * 1.1).abs() < 1e-12 * 0.231);
    }

    #[test]
    fn box_rejects_bad_input() {
        assert!(matches!(generate_box(0.0, 1.0, 1.0, 1, 1, 1), Err(MeshError::InvalidDimension(_))));
        assert!(matches!(generate_box(1.0, 1.0, 1.0, 0, 1, 1), Err(MeshError::InvalidDimension(_))));
    }

    #[test]
    fn box_faces_are_tagged_per_side() {
        let m = generate_box(1.0, 1.0, 1.0, 2, 2, 2).unwrap();
        let areas = m.patch_areas();
        for t in BOX_TAGS {
            assert!((areas[&t] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn graded_spacing_endpoints() {
        let g = graded(1.0, 2.0, 5, 3.0);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[5], 2.0);
        let first = g[1] - g[0];
        let last = g[5] - g[4];
        assert!((last / first - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sector_rejects_bad_geometry() {
        let mut s = SectorSpec::demo();
        s.angle = 0.0;
        assert!(matches!(generate_annular_sector(&s), Err(MeshError::DegenerateSector(_))));
        let mut s = SectorSpec::demo();
        s.r_inner = 0.5;
        assert!(matches!(generate_annular_sector(&s), Err(MeshError::InvalidDimension(_))));
        let mut s = SectorSpec::demo();
        s.resolution.angular = 3;
        assert!(matches!(generate_annular_sector(&s), Err(MeshError::DegenerateSector(_))));
    }
}
