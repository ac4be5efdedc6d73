//! Gmsh ASCII 2.2 reader and writer.
//!
//! Only linear tetrahedra (type 4) and triangles (type 2) are used; other
//! element types (points, lines, ...) are skipped. The first element tag is
//! the physical group, which is mapped to a [`PatchLabel`] either through an
//! explicit mapping or through `$PhysicalNames` entries whose name is a
//! label (`robin`, `sym_x`, `sym_y`, `insulated`).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTri, Mesh, MeshError, MeshOptions, PatchLabel};

#[derive(Debug, Clone, Default)]
pub struct GmshOptions {
    /// Physical group → label; takes precedence over `$PhysicalNames`.
    pub mapping: BTreeMap<i32, PatchLabel>,
    pub strict: bool,
}

pub fn read_gmsh(path: impl AsRef<Path>, options: &GmshOptions) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_gmsh_str(&text, options)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                self.line = i + 1;
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let line = self.line;
        self.next_nonempty().ok_or_else(|| MeshError::MalformedFile {
            line,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::MalformedFile {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn count(&mut self, section: &str) -> Result<usize, MeshError> {
        let l = self.expect(section)?;
        l.parse().map_err(|_| self.err(format!("bad {section} count '{l}'")))
    }

    fn end(&mut self, section: &str) -> Result<(), MeshError> {
        let l = self.expect(section)?;
        if l != section {
            return Err(self.err(format!("expected {section}, found '{l}'")));
        }
        Ok(())
    }
}

pub fn read_gmsh_str(text: &str, options: &GmshOptions) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut version_ok = false;
    let mut names: BTreeMap<i32, String> = BTreeMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut tets_raw: Vec<[i64; 4]> = Vec::new();
    let mut tris_raw: Vec<([i64; 3], i32)> = Vec::new();

    while let Some(header) = lines.next_nonempty() {
        match header {
            "$MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version = it.next().unwrap_or("");
                let file_type = it.next().unwrap_or("");
                if version != "2.2" {
                    return Err(MeshError::UnsupportedVersion(version.to_string()));
                }
                if file_type != "0" {
                    return Err(MeshError::UnsupportedVersion(format!("{version} (binary)")));
                }
                version_ok = true;
                lines.end("$EndMeshFormat")?;
            }
            "$PhysicalNames" => {
                let n = lines.count("$PhysicalNames")?;
                for _ in 0..n {
                    let l = lines.expect("physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let _dim = it.next();
                    let tag: i32 = it
                        .next()
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| lines.err("bad physical tag"))?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert(tag, name);
                }
                lines.end("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                if !version_ok {
                    return Err(lines.err("$Nodes before $MeshFormat"));
                }
                let n = lines.count("$Nodes")?;
                coords.reserve(n);
                for _ in 0..n {
                    let l = lines.expect("node")?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(lines.err(format!("node line needs 4 fields: '{l}'")));
                    }
                    let id: i64 = f[0].parse().map_err(|_| lines.err("bad node id"))?;
                    let mut p = [0.0; 3];
                    for k in 0..3 {
                        p[k] = f[k + 1]
                            .parse()
                            .map_err(|_| lines.err(format!("bad coordinate '{}'", f[k + 1])))?;
                    }
                    if node_ids.insert(id, coords.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    coords.push(p);
                }
                lines.end("$EndNodes")?;
            }
            "$Elements" => {
                if !version_ok {
                    return Err(lines.err("$Elements before $MeshFormat"));
                }
                let n = lines.count("$Elements")?;
                for _ in 0..n {
                    let l = lines.expect("element")?;
                    let f: Vec<i64> = l
                        .split_whitespace()
                        .map(|s| s.parse::<i64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| lines.err(format!("non-integer in element line '{l}'")))?;
                    if f.len() < 3 {
                        return Err(lines.err("element line too short"));
                    }
                    let etype = f[1];
                    let ntags = f[2] as usize;
                    let rest = f.get(3 + ntags..).ok_or_else(|| lines.err("missing element nodes"))?;
                    let phys = if ntags > 0 { f[3] as i32 } else { 0 };
                    match etype {
                        4 => {
                            if rest.len() != 4 {
                                return Err(lines.err("tetrahedron needs 4 nodes"));
                            }
                            tets_raw.push([rest[0], rest[1], rest[2], rest[3]]);
                        }
                        2 => {
                            if rest.len() != 3 {
                                return Err(lines.err("triangle needs 3 nodes"));
                            }
                            tris_raw.push(([rest[0], rest[1], rest[2]], phys));
                        }
                        _ => {}
                    }
                }
                lines.end("$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // unknown section: skip to its end marker
                let end = format!("$End{}", &other[1..]);
                loop {
                    let l = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line '{other}'"))),
        }
    }
    if !version_ok {
        return Err(MeshError::MalformedFile {
            line: lines.line,
            msg: "missing $MeshFormat section".into(),
        });
    }
    if tets_raw.is_empty() {
        return Err(MeshError::EmptyVolume);
    }
    if tris_raw.is_empty() {
        return Err(MeshError::UntaggedBoundary("file contains no triangles".into()));
    }

    let lookup = |id: i64| -> Result<usize, MeshError> {
        node_ids.get(&id).copied().ok_or_else(|| MeshError::MalformedFile {
            line: 0,
            msg: format!("element references unknown node {id}"),
        })
    };

    // keep only nodes used by the volume, renumbered in file order
    let mut used = vec![false; coords.len()];
    let mut tets = Vec::with_capacity(tets_raw.len());
    for t in &tets_raw {
        let mut v = [0usize; 4];
        for k in 0..4 {
            v[k] = lookup(t[k])?;
            used[v[k]] = true;
        }
        tets.push(v);
    }
    let mut remap = vec![usize::MAX; coords.len()];
    let mut nodes = Vec::with_capacity(coords.len());
    for (i, p) in coords.iter().enumerate() {
        if used[i] {
            remap[i] = nodes.len();
            nodes.push(*p);
        }
    }
    if nodes.len() < coords.len() {
        log::warn!(
            "dropped {} nodes not referenced by any tetrahedron",
            coords.len() - nodes.len()
        );
    }
    for t in tets.iter_mut() {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }
    let mut boundary = Vec::with_capacity(tris_raw.len());
    for (t, phys) in &tris_raw {
        let mut v = [0usize; 3];
        for k in 0..3 {
            let i = lookup(t[k])?;
            if remap[i] == usize::MAX {
                return Err(MeshError::InvalidTopology(format!(
                    "triangle node {} not part of the volume",
                    t[k]
                )));
            }
            v[k] = remap[i];
        }
        boundary.push(BoundaryTri { nodes: v, tag: *phys });
    }

    let mut patches = BTreeMap::new();
    for (_, tag) in &tris_raw {
        if let Some(l) = options.mapping.get(tag) {
            patches.insert(*tag, *l);
        } else if let Some(l) = names.get(tag).and_then(|n| n.parse::<PatchLabel>().ok()) {
            patches.insert(*tag, l);
        }
    }
    Mesh::new(
        nodes,
        tets,
        boundary,
        patches,
        MeshOptions {
            strict: options.strict,
        },
    )
}

/// Serializes a linear mesh as Gmsh ASCII 2.2 with `$PhysicalNames` carrying
/// the patch labels. Volume elements get physical group 100.
pub fn write_gmsh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let patches = mesh.patches();
    let _ = writeln!(s, "$PhysicalNames\n{}", patches.len() + 1);
    for (tag, label) in patches {
        let _ = writeln!(s, "2 {tag} \"{label}\"");
    }
    s.push_str("3 100 \"domain\"\n$EndPhysicalNames\n");
    let verts = mesh.vertices();
    let _ = writeln!(s, "$Nodes\n{}", verts.len());
    for (i, p) in verts.iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} {:.17e}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n");
    let n = mesh.boundary().len() + mesh.tets().len();
    let _ = writeln!(s, "$Elements\n{n}");
    let mut id = 1;
    for b in mesh.boundary() {
        let [a, c, d] = b.nodes;
        let _ = writeln!(s, "{id} 2 2 {} {} {} {} {}", b.tag, b.tag, a + 1, c + 1, d + 1);
        id += 1;
    }
    for t in mesh.tets() {
        let _ = writeln!(s, "{id} 4 2 100 1 {} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}
