//! Tetrahedral volume meshes with tagged boundary patches.

mod generate;
mod gmsh;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{
    generate_annular_sector, generate_box, BladeSpec, SectorResolution, SectorSpec, BOX_TAGS,
    SECTOR_TAG_BLADE_END, SECTOR_TAG_BORE, SECTOR_TAG_END_BACK, SECTOR_TAG_END_FRONT,
    SECTOR_TAG_OUTER, SECTOR_TAG_SYM_X, SECTOR_TAG_SYM_Y,
};
pub use gmsh::{read_gmsh, read_gmsh_str, write_gmsh, GmshOptions};

pub type Point = [f64; 3];

/// Semantic meaning of a boundary patch.
///
/// `SymX` is the symmetry cut containing the x-axis (the plane y = 0 for a
/// quarter model) and `SymY` the cut containing the y-axis (x = 0). Both
/// constrain the displacement component normal to their plane and are
/// thermally insulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchLabel {
    Robin,
    SymX,
    SymY,
    Insulated,
}

impl PatchLabel {
    pub fn is_symmetry(self) -> bool {
        matches!(self, PatchLabel::SymX | PatchLabel::SymY)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PatchLabel::Robin => "robin",
            PatchLabel::SymX => "sym_x",
            PatchLabel::SymY => "sym_y",
            PatchLabel::Insulated => "insulated",
        }
    }
}

impl fmt::Display for PatchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatchLabel {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "robin" => Ok(PatchLabel::Robin),
            "sym_x" | "symx" => Ok(PatchLabel::SymX),
            "sym_y" | "symy" => Ok(PatchLabel::SymY),
            "insulated" => Ok(PatchLabel::Insulated),
            other => Err(MeshError::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryTri {
    /// Vertex indices, ordered so the normal points out of the volume.
    pub nodes: [usize; 3],
    pub tag: i32,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed mesh file (line {line}): {msg}")]
    MalformedFile { line: usize, msg: String },
    #[error("unsupported mesh format version {0} (only Gmsh ASCII 2.2 is read)")]
    UnsupportedVersion(String),
    #[error("mesh contains no tetrahedra")]
    EmptyVolume,
    #[error("boundary triangle without a usable patch tag: {0}")]
    UntaggedBoundary(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("degenerate sector: {0}")]
    DegenerateSector(String),
    #[error("tetrahedron {0} has zero volume")]
    DegenerateElement(usize),
    #[error("node index {index} out of range ({count} nodes)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("mesh is already quadratic")]
    AlreadyP2,
    #[error("unknown patch label '{0}'")]
    UnknownLabel(String),
}

/// Quadratic (P2) connectivity: one midpoint node per unique edge.
#[derive(Debug, Clone)]
pub struct P2Topology {
    /// Midpoint node of each tet edge, in [`TET_EDGES`] order.
    pub tet_edges: Vec<[usize; 6]>,
    /// Sorted vertex pair → midpoint node index.
    pub edge_midpoint: HashMap<(usize, usize), usize>,
}

/// Local vertex pairs of the six tet edges (midpoint numbering 4..10).
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Local vertex triples of the four tet faces; face `i` is opposite vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

#[derive(Debug, Clone, Copy, Default)]
pub struct MeshOptions {
    /// Reject exterior faces or tags that lack a patch label instead of
    /// treating them as insulated.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    n_vertices: usize,
    tets: Vec<[usize; 4]>,
    boundary: Vec<BoundaryTri>,
    patches: BTreeMap<i32, PatchLabel>,
    p2: Option<P2Topology>,
    warnings: Vec<String>,
}

pub fn signed_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = sub(d, a);
    dot3(&u, &cross(&v, &w)) / 6.0
}

pub fn triangle_area_normal(a: &Point, b: &Point, c: &Point) -> (f64, Point) {
    let n = cross(&sub(b, a), &sub(c, a));
    let len = dot3(&n, &n).sqrt();
    if len == 0.0 {
        return (0.0, [0.0; 3]);
    }
    (0.5 * len, [n[0] / len, n[1] / len, n[2] / len])
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sorted3(f: [usize; 3]) -> [usize; 3] {
    let mut s = f;
    s.sort_unstable();
    s
}

/// All faces of a tet set: sorted face key → list of (tet, local face).
fn face_map(tets: &[[usize; 4]]) -> HashMap<[usize; 3], Vec<(usize, usize)>> {
    let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::with_capacity(tets.len() * 3);
    for (t, tet) in tets.iter().enumerate() {
        for (lf, f) in TET_FACES.iter().enumerate() {
            let key = sorted3([tet[f[0]], tet[f[1]], tet[f[2]]]);
            faces.entry(key).or_default().push((t, lf));
        }
    }
    faces
}

impl Mesh {
    /// Builds and validates a linear mesh.
    ///
    /// Negatively oriented tets are repaired by swapping two vertices and a
    /// warning is recorded. Boundary triangles are reoriented outward.
    pub fn new(
        nodes: Vec<Point>,
        mut tets: Vec<[usize; 4]>,
        boundary: Vec<BoundaryTri>,
        patches: BTreeMap<i32, PatchLabel>,
        options: MeshOptions,
    ) -> Result<Self, MeshError> {
        if tets.is_empty() {
            return Err(MeshError::EmptyVolume);
        }
        let count = nodes.len();
        for &i in tets.iter().flatten().chain(boundary.iter().flat_map(|b| b.nodes.iter())) {
            if i >= count {
                return Err(MeshError::IndexOutOfRange { index: i, count });
            }
        }
        let mut warnings = Vec::new();
        let scale = bounding_extent(&nodes);
        let vol_eps = 1e-14 * scale.powi(3);
        for (t, tet) in tets.iter_mut().enumerate() {
            let v = signed_volume(&nodes[tet[0]], &nodes[tet[1]], &nodes[tet[2]], &nodes[tet[3]]);
            if v.abs() <= vol_eps {
                return Err(MeshError::DegenerateElement(t));
            }
            if v < 0.0 {
                tet.swap(2, 3);
                let msg = format!("tetrahedron {t} had negative orientation; vertices reordered");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }

        let faces = face_map(&tets);
        let mut exterior: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for (key, owners) in &faces {
            match owners.len() {
                1 => {
                    exterior.insert(*key, owners[0]);
                }
                2 => {}
                n => {
                    return Err(MeshError::InvalidTopology(format!(
                        "face {key:?} shared by {n} tetrahedra"
                    )))
                }
            }
        }

        let mut patches = patches;
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        let mut oriented = Vec::with_capacity(exterior.len());
        for (bi, b) in boundary.iter().enumerate() {
            let key = sorted3(b.nodes);
            let Some(&(t, lf)) = exterior.get(&key) else {
                return Err(MeshError::InvalidTopology(format!(
                    "boundary triangle {:?} is not an exterior face of the volume",
                    b.nodes
                )));
            };
            if let Some(prev) = seen.insert(key, bi) {
                return Err(MeshError::InvalidTopology(format!(
                    "boundary triangles {prev} and {bi} cover the same face"
                )));
            }
            if !patches.contains_key(&b.tag) {
                if options.strict {
                    return Err(MeshError::UntaggedBoundary(format!(
                        "physical group {} has no patch label",
                        b.tag
                    )));
                }
                let msg = format!("physical group {} unmapped; treated as insulated", b.tag);
                log::warn!("{msg}");
                warnings.push(msg);
                patches.insert(b.tag, PatchLabel::Insulated);
            }
            let f = TET_FACES[lf];
            let tet = tets[t];
            oriented.push(BoundaryTri {
                nodes: [tet[f[0]], tet[f[1]], tet[f[2]]],
                tag: b.tag,
            });
        }

        let mut missing: Vec<([usize; 3], (usize, usize))> = exterior
            .iter()
            .filter(|(k, _)| !seen.contains_key(*k))
            .map(|(k, v)| (*k, *v))
            .collect();
        if !missing.is_empty() {
            if options.strict {
                return Err(MeshError::UntaggedBoundary(format!(
                    "{} exterior faces lack a tagged boundary triangle, e.g. {:?}",
                    missing.len(),
                    missing[0].0
                )));
            }
            missing.sort_unstable();
            let msg = format!(
                "{} untagged exterior faces assigned to tag 0 (insulated)",
                missing.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
            patches.entry(0).or_insert(PatchLabel::Insulated);
            for (_, (t, lf)) in missing {
                let f = TET_FACES[lf];
                let tet = tets[t];
                oriented.push(BoundaryTri {
                    nodes: [tet[f[0]], tet[f[1]], tet[f[2]]],
                    tag: 0,
                });
            }
        }

        Ok(Self {
            n_vertices: nodes.len(),
            nodes,
            tets,
            boundary: oriented,
            patches,
            p2: None,
            warnings,
        })
    }

    /// All node coordinates (vertices first, then P2 midpoints if promoted).
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Vertex (P1) coordinates.
    pub fn vertices(&self) -> &[Point] {
        &self.nodes[..self.n_vertices]
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary(&self) -> &[BoundaryTri] {
        &self.boundary
    }

    pub fn patches(&self) -> &BTreeMap<i32, PatchLabel> {
        &self.patches
    }

    pub fn label_of(&self, tag: i32) -> Option<PatchLabel> {
        self.patches.get(&tag).copied()
    }

    pub fn p2(&self) -> Option<&P2Topology> {
        self.p2.as_ref()
    }

    pub fn is_p2(&self) -> bool {
        self.p2.is_some()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Reassigns the label of an existing tag.
    pub fn set_patch_label(&mut self, tag: i32, label: PatchLabel) -> Result<(), MeshError> {
        match self.patches.get_mut(&tag) {
            Some(l) => {
                *l = label;
                Ok(())
            }
            None => Err(MeshError::UntaggedBoundary(format!("no patch with tag {tag}"))),
        }
    }

    /// Relabels every patch.
    pub fn set_all_labels(&mut self, label: PatchLabel) {
        self.patches.values_mut().for_each(|l| *l = label);
    }

    pub fn tet_vertices(&self, t: usize) -> [Point; 4] {
        let tet = self.tets[t];
        [
            self.nodes[tet[0]],
            self.nodes[tet[1]],
            self.nodes[tet[2]],
            self.nodes[tet[3]],
        ]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_vertices(t);
        signed_volume(&a, &b, &c, &d)
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tri_area_normal(&self, tri: &BoundaryTri) -> (f64, Point) {
        let [a, b, c] = tri.nodes;
        triangle_area_normal(&self.nodes[a], &self.nodes[b], &self.nodes[c])
    }

    pub fn tris_with_label(&self, label: PatchLabel) -> impl Iterator<Item = &BoundaryTri> {
        self.boundary
            .iter()
            .filter(move |b| self.patches.get(&b.tag) == Some(&label))
    }

    pub fn patch_areas(&self) -> BTreeMap<i32, f64> {
        let mut areas: BTreeMap<i32, f64> = self.patches.keys().map(|&k| (k, 0.0)).collect();
        for b in &self.boundary {
            *areas.entry(b.tag).or_insert(0.0) += self.tri_area_normal(b).0;
        }
        areas
    }

    pub fn label_area(&self, label: PatchLabel) -> f64 {
        self.tris_with_label(label).map(|b| self.tri_area_normal(b).0).sum()
    }

    /// Exterior faces of the tet set, as sorted vertex triples.
    pub fn exterior_faces(&self) -> Vec<[usize; 3]> {
        let mut v: Vec<[usize; 3]> = face_map(&self.tets)
            .into_iter()
            .filter(|(_, o)| o.len() == 1)
            .map(|(k, _)| k)
            .collect();
        v.sort_unstable();
        v
    }

    /// Unique edges as sorted vertex pairs, in first-appearance order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tet in &self.tets {
            for (a, b) in TET_EDGES {
                let e = ordered(tet[a], tet[b]);
                if seen.insert(e, ()).is_none() {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Adds one midpoint node per unique edge.
    pub fn promote_to_p2(&self) -> Result<Mesh, MeshError> {
        if self.p2.is_some() {
            return Err(MeshError::AlreadyP2);
        }
        let mut nodes = self.nodes.clone();
        let mut edge_midpoint = HashMap::with_capacity(self.tets.len() * 2);
        let mut tet_edges = Vec::with_capacity(self.tets.len());
        for tet in &self.tets {
            let mut mids = [0usize; 6];
            for (k, (a, b)) in TET_EDGES.iter().enumerate() {
                let e = ordered(tet[*a], tet[*b]);
                mids[k] = *edge_midpoint.entry(e).or_insert_with(|| {
                    let pa = self.nodes[e.0];
                    let pb = self.nodes[e.1];
                    nodes.push([
                        0.5 * (pa[0] + pb[0]),
                        0.5 * (pa[1] + pb[1]),
                        0.5 * (pa[2] + pb[2]),
                    ]);
                    nodes.len() - 1
                });
            }
            tet_edges.push(mids);
        }
        Ok(Mesh {
            nodes,
            n_vertices: self.n_vertices,
            tets: self.tets.clone(),
            boundary: self.boundary.clone(),
            patches: self.patches.clone(),
            p2: Some(P2Topology {
                tet_edges,
                edge_midpoint,
            }),
            warnings: self.warnings.clone(),
        })
    }

    /// Global node ids of the 10 P2 nodes of tet `t` (vertices, then edges).
    pub fn p2_element(&self, t: usize) -> [usize; 10] {
        let p2 = self.p2.as_ref().expect("mesh not promoted to P2");
        let v = self.tets[t];
        let e = p2.tet_edges[t];
        [v[0], v[1], v[2], v[3], e[0], e[1], e[2], e[3], e[4], e[5]]
    }

    /// Nodes lying on a boundary triangle: its vertices plus, for P2 meshes,
    /// its edge midpoints.
    pub fn tri_nodes(&self, tri: &BoundaryTri) -> Vec<usize> {
        let mut v = tri.nodes.to_vec();
        if let Some(p2) = &self.p2 {
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                let e = ordered(tri.nodes[a], tri.nodes[b]);
                v.push(p2.edge_midpoint[&e]);
            }
        }
        v
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            nodes: self.n_vertices,
            p2_nodes: self.p2.as_ref().map(|_| self.nodes.len()),
            tets: self.tets.len(),
            boundary_tris: self.boundary.len(),
            volume: self.volume(),
            patches: self
                .patch_areas()
                .into_iter()
                .map(|(tag, area)| PatchStats {
                    tag,
                    label: self.patches[&tag],
                    tris: self.boundary.iter().filter(|b| b.tag == tag).count(),
                    area,
                })
                .collect(),
        }
    }
}

pub(crate) fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn bounding_extent(nodes: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in nodes {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchStats {
    pub tag: i32,
    pub label: PatchLabel,
    pub tris: usize,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub nodes: usize,
    pub p2_nodes: Option<usize>,
    pub tets: usize,
    pub boundary_tris: usize,
    pub volume: f64,
    pub patches: Vec<PatchStats>,
}

impl fmt::Display for MeshStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.nodes)?;
        if let Some(n) = self.p2_nodes {
            writeln!(f, "p2_nodes: {n}")?;
        }
        writeln!(f, "boundary_triangles: {}", self.boundary_tris)?;
        writeln!(f, "tetrahedra: {}", self.tets)?;
        writeln!(f, "volume_m3: {:.9e}", self.volume)?;
        for p in &self.patches {
            writeln!(
                f,
                "patch: tag={} label={} triangles={} area_m2={:.9e}",
                p.tag, p.label, p.tris, p.area
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tet() -> (Vec<Point>, Vec<[usize; 4]>) {
        (
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
    }

    fn all_faces(tag: i32) -> Vec<BoundaryTri> {
        vec![
            BoundaryTri { nodes: [0, 1, 2], tag },
            BoundaryTri { nodes: [0, 1, 3], tag },
            BoundaryTri { nodes: [0, 2, 3], tag },
            BoundaryTri { nodes: [1, 2, 3], tag },
        ]
    }

    fn robin(tag: i32) -> BTreeMap<i32, PatchLabel> {
        BTreeMap::from([(tag, PatchLabel::Robin)])
    }

    #[test]
    fn single_tet_mesh() {
        let (n, t) = unit_tet();
        let m = Mesh::new(n, t, all_faces(1), robin(1), MeshOptions { strict: true }).unwrap();
        assert_eq!((m.n_vertices(), m.tets().len(), m.boundary().len()), (4, 1, 4));
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn boundary_normals_point_outward() {
        let (n, t) = unit_tet();
        let m = Mesh::new(n, t, all_faces(1), robin(1), MeshOptions::default()).unwrap();
        let centroid = [0.25, 0.25, 0.25];
        for b in m.boundary() {
            let (_, normal) = m.tri_area_normal(b);
            let p = m.nodes()[b.nodes[0]];
            assert!(dot3(&normal, &sub(&p, &centroid)) > 0.0);
        }
    }

    #[test]
    fn negative_tet_is_repaired_with_warning() {
        let (n, _) = unit_tet();
        let m = Mesh::new(n, vec![[0, 2, 1, 3]], all_faces(1), robin(1), MeshOptions::default())
            .unwrap();
        assert!(m.tet_volume(0) > 0.0);
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn degenerate_tet_rejected() {
        let n = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let r = Mesh::new(n, vec![[0, 1, 2, 3]], vec![], robin(1), MeshOptions::default());
        assert!(matches!(r, Err(MeshError::DegenerateElement(0))));
    }

    #[test]
    fn empty_volume_rejected() {
        let (n, _) = unit_tet();
        let r = Mesh::new(n, vec![], vec![], robin(1), MeshOptions::default());
        assert!(matches!(r, Err(MeshError::EmptyVolume)));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let (n, _) = unit_tet();
        let r = Mesh::new(n, vec![[0, 1, 2, 9]], vec![], robin(1), MeshOptions::default());
        assert!(matches!(r, Err(MeshError::IndexOutOfRange { index: 9, .. })));
    }

    #[test]
    fn strict_mode_requires_full_tagging() {
        let (n, t) = unit_tet();
        let mut tris = all_faces(1);
        tris.pop();
        let r = Mesh::new(n.clone(), t.clone(), tris.clone(), robin(1), MeshOptions { strict: true });
        assert!(matches!(r, Err(MeshError::UntaggedBoundary(_))));
        let m = Mesh::new(n, t, tris, robin(1), MeshOptions::default()).unwrap();
        assert_eq!(m.boundary().len(), 4);
        assert_eq!(m.label_of(0), Some(PatchLabel::Insulated));
    }

    #[test]
    fn unmapped_tag_strict_vs_lenient() {
        let (n, t) = unit_tet();
        let r = Mesh::new(n.clone(), t.clone(), all_faces(7), robin(1), MeshOptions { strict: true });
        assert!(matches!(r, Err(MeshError::UntaggedBoundary(_))));
        let m = Mesh::new(n, t, all_faces(7), robin(1), MeshOptions::default()).unwrap();
        assert_eq!(m.label_of(7), Some(PatchLabel::Insulated));
    }

    #[test]
    fn interior_face_cannot_be_boundary() {
        let n = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ];
        let t = vec![[0, 1, 2, 3], [1, 2, 3, 4]];
        let tris = vec![BoundaryTri { nodes: [1, 2, 3], tag: 1 }];
        let r = Mesh::new(n, t, tris, robin(1), MeshOptions::default());
        assert!(matches!(r, Err(MeshError::InvalidTopology(_))));
    }

    #[test]
    fn p2_promotion_of_single_tet() {
        let (n, t) = unit_tet();
        let m = Mesh::new(n, t, all_faces(1), robin(1), MeshOptions::default()).unwrap();
        let p2 = m.promote_to_p2().unwrap();
        assert_eq!(p2.n_nodes(), 10);
        assert_eq!(p2.n_vertices(), 4);
        assert_eq!(p2.nodes()[4], [0.5, 0.0, 0.0]);
        assert!(matches!(p2.promote_to_p2(), Err(MeshError::AlreadyP2)));
        let face = p2.boundary()[0];
        assert_eq!(p2.tri_nodes(&face).len(), 6);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("sym_x".parse::<PatchLabel>().unwrap(), PatchLabel::SymX);
        assert_eq!("Robin".parse::<PatchLabel>().unwrap(), PatchLabel::Robin);
        assert!("wall".parse::<PatchLabel>().is_err());
    }
}
