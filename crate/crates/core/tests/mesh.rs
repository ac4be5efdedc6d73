use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use rotor_activation::mesh::{
    generate_annular_sector, generate_box, read_gmsh, read_gmsh_str, GmshOptions, MeshError, PatchLabel,
    SectorResolution, SectorSpec,
};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Node and tetrahedron counts by a plain scan of the file text.
fn scan_counts(text: &str) -> (usize, usize, usize) {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let nodes_at = lines.iter().position(|l| *l == "$Nodes").unwrap();
    let n_nodes: usize = lines[nodes_at + 1].parse().unwrap();
    let elems_at = lines.iter().position(|l| *l == "$Elements").unwrap();
    let n_elems: usize = lines[elems_at + 1].parse().unwrap();
    let (mut tets, mut tris) = (0, 0);
    for l in &lines[elems_at + 2..elems_at + 2 + n_elems] {
        match l.split_whitespace().nth(1) {
            Some("4") => tets += 1,
            Some("2") => tris += 1,
            _ => {}
        }
    }
    (n_nodes, tets, tris)
}

const SINGLE_TET: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
1
2 1 \"robin\"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
5
1 2 2 1 1 1 3 2
2 2 2 1 1 1 2 4
3 2 2 1 1 1 4 3
4 2 2 1 1 2 3 4
5 4 2 100 1 1 2 3 4
$EndElements
";

#[test]
fn single_tet_file() {
    let m = read_gmsh_str(SINGLE_TET, &GmshOptions::default()).unwrap();
    assert_eq!((m.n_vertices(), m.tets().len(), m.boundary().len()), (4, 1, 4));
    assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(m.label_of(1), Some(PatchLabel::Robin));
}

#[test]
fn negative_tet_is_reordered_with_warning() {
    let flipped = SINGLE_TET.replace("5 4 2 100 1 1 2 3 4", "5 4 2 100 1 2 1 3 4");
    let m = read_gmsh_str(&flipped, &GmshOptions::default()).unwrap();
    assert!(m.tet_volume(0) > 0.0);
    assert!(!m.warnings().is_empty());
}

#[test]
fn malformed_and_unsupported_files() {
    let v4 = SINGLE_TET.replace("2.2 0 8", "4.1 0 8");
    assert!(matches!(
        read_gmsh_str(&v4, &GmshOptions::default()),
        Err(MeshError::UnsupportedVersion(_))
    ));
    let broken = SINGLE_TET.replace("3 0 1 0", "3 0 x 0");
    assert!(matches!(
        read_gmsh_str(&broken, &GmshOptions::default()),
        Err(MeshError::MalformedFile { .. })
    ));
    let no_tet = SINGLE_TET.replace("5\n1 2 2", "4\n1 2 2").replace("5 4 2 100 1 1 2 3 4\n", "");
    assert!(matches!(
        read_gmsh_str(&no_tet, &GmshOptions::default()),
        Err(MeshError::EmptyVolume)
    ));
    let missing_face = SINGLE_TET.replace("5\n1 2 2", "4\n1 2 2").replace("4 2 2 1 1 2 3 4\n", "");
    let strict = GmshOptions {
        strict: true,
        ..Default::default()
    };
    assert!(matches!(
        read_gmsh_str(&missing_face, &strict),
        Err(MeshError::UntaggedBoundary(_))
    ));
}

#[test]
fn bundled_demo_mesh_matches_file_counts() {
    for name in ["disk_blade.msh", "disk_blade_coarse.msh"] {
        let path = data(name);
        let text = std::fs::read_to_string(&path).unwrap();
        let (nodes, tets, tris) = scan_counts(&text);
        let m = read_gmsh(&path, &GmshOptions::default()).unwrap();
        assert_eq!(m.n_vertices(), nodes, "{name}");
        assert_eq!(m.tets().len(), tets, "{name}");
        assert_eq!(m.boundary().len(), tris, "{name}");
    }
}

#[test]
fn box_counts_and_volume() {
    let m = generate_box(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
    assert_eq!((m.n_vertices(), m.tets().len(), m.boundary().len()), (8, 6, 12));
    for n in 1..=3usize {
        let m = generate_box(0.3, 0.5, 0.7, n, n, n).unwrap();
        assert_eq!(m.n_vertices(), (n + 1).pow(3));
        assert_eq!(m.tets().len(), 6 * n.pow(3));
        assert!((m.volume() - 0.3 * 0.5 * 0.7).abs() < 1e-12 * 0.105);
    }
    assert!(matches!(generate_box(0.0, 1.0, 1.0, 1, 1, 1), Err(MeshError::InvalidDimension(_))));
    assert!(matches!(generate_box(1.0, 1.0, 1.0, 0, 1, 1), Err(MeshError::InvalidDimension(_))));
}

/// Every face of the tet mesh appears twice (interior) or once (exterior)
/// and the exterior faces are exactly the boundary triangles.
fn assert_watertight(m: &rotor_activation::mesh::Mesh) {
    let mut count = std::collections::BTreeMap::new();
    for t in m.tets() {
        for f in [[t[1], t[2], t[3]], [t[0], t[2], t[3]], [t[0], t[1], t[3]], [t[0], t[1], t[2]]] {
            let mut k = f;
            k.sort_unstable();
            *count.entry(k).or_insert(0) += 1;
        }
    }
    assert!(count.values().all(|&c| c == 1 || c == 2));
    let exterior: BTreeSet<[usize; 3]> = count.into_iter().filter(|(_, c)| *c == 1).map(|(k, _)| k).collect();
    let boundary: BTreeSet<[usize; 3]> = m
        .boundary()
        .iter()
        .map(|b| {
            let mut k = b.nodes;
            k.sort_unstable();
            k
        })
        .collect();
    assert_eq!(boundary.len(), m.boundary().len(), "boundary triangle listed twice");
    assert_eq!(exterior, boundary);
}

#[test]
fn quarter_cylinder_is_closed() {
    let spec = SectorSpec {
        r_inner: 0.0,
        r_outer: 0.1,
        z_len: 0.1,
        angle: PI / 2.0,
        blade: None,
        resolution: SectorResolution {
            radial: 3,
            angular: 6,
            axial: 2,
        },
    };
    let m = generate_annular_sector(&spec).unwrap();
    assert_watertight(&m);
    assert!(m.tets().iter().enumerate().all(|(i, _)| m.tet_volume(i) > 0.0));
    let exact = spec.analytic_volume();
    assert!((m.volume() - exact).abs() < 0.02 * exact);
    let labels: BTreeSet<_> = m.patches().values().copied().collect();
    assert!(labels.contains(&PatchLabel::SymX) && labels.contains(&PatchLabel::SymY));
}

#[test]
fn sector_rejects_bad_input() {
    let mut spec = SectorSpec::demo_coarse();
    spec.r_inner = 0.5;
    assert!(generate_annular_sector(&spec).is_err());
    let mut spec = SectorSpec::demo_coarse();
    spec.angle = 7.0;
    assert!(generate_annular_sector(&spec).is_err());
}

#[test]
fn demo_sector_scale_and_volume() {
    let spec = SectorSpec::demo();
    let m = generate_annular_sector(&spec).unwrap();
    assert!((5000..=15000).contains(&m.tets().len()), "{} tets", m.tets().len());
    assert_watertight(&m);
    let exact = spec.analytic_volume();
    assert!((m.volume() - exact).abs() < 0.02 * exact);
    // about 1.4 m across the blade tips
    let r_max = m.nodes().iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    assert!((2.0 * r_max - 1.4).abs() < 0.05);

    let coarse = generate_annular_sector(&SectorSpec::demo_coarse()).unwrap();
    assert!(coarse.tets().len() <= 1000);
}

#[test]
fn p2_promotion_counts_and_preservation() {
    let m = generate_box(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
    let mut edges = BTreeSet::new();
    for t in m.tets() {
        for i in 0..4 {
            for j in i + 1..4 {
                edges.insert((t[i].min(t[j]), t[i].max(t[j])));
            }
        }
    }
    let p2 = m.promote_to_p2().unwrap();
    assert_eq!(p2.n_nodes(), 8 + edges.len());
    assert_eq!(p2.tets(), m.tets());
    for (a, b) in p2.nodes()[..8].iter().zip(m.nodes()) {
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }
    assert!(matches!(p2.promote_to_p2(), Err(MeshError::AlreadyP2)));

    let tet = read_gmsh_str(SINGLE_TET, &GmshOptions::default()).unwrap();
    assert_eq!(tet.promote_to_p2().unwrap().n_nodes(), 10);
}
