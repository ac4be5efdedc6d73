//! Legacy ASCII VTK output of per-step fields on the linear tetrahedral mesh.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::mesh::Mesh;

const VTK_TETRA: u8 = 10;

/// Fields of one time step. Point data lives on the mesh vertices,
/// cell data on the tetrahedra.
#[derive(Debug, Default)]
pub struct VtkStep<'a> {
    pub time: f64,
    pub temperature: Option<&'a [f64]>,
    /// Interleaved `3·node + component`; only the vertex entries are written.
    pub displacement: Option<&'a [f64]>,
    pub nodal_von_mises: Option<&'a [f64]>,
    /// Per-tet von Mises at the four vertices; the cell value is the max.
    pub cell_von_mises: Option<&'a [[f64; 4]]>,
}

pub fn write_vtk<W: Write>(mesh: &Mesh, step: &VtkStep, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    let nv = mesh.n_vertices();
    let tets = mesh.tets();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "rotor step t={}", step.time)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in &mesh.nodes()[..nv] {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    writeln!(w, "CELLS {} {}", tets.len(), 5 * tets.len())?;
    for t in tets {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {}", tets.len())?;
    for _ in tets {
        writeln!(w, "{VTK_TETRA}")?;
    }

    let scalar = |w: &mut BufWriter<W>, name: &str, v: &[f64]| -> io::Result<()> {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for x in v {
            writeln!(w, "{x}")?;
        }
        Ok(())
    };
    let has_point = step.temperature.is_some() || step.displacement.is_some() || step.nodal_von_mises.is_some();
    if has_point {
        writeln!(w, "POINT_DATA {nv}")?;
        if let Some(t) = step.temperature {
            check_len("temperature", t.len(), nv)?;
            scalar(&mut w, "temperature_C", t)?;
        }
        if let Some(u) = step.displacement {
            if u.len() < 3 * nv {
                return Err(bad_len("displacement", u.len(), 3 * nv));
            }
            writeln!(w, "VECTORS displacement_m double")?;
            for c in u[..3 * nv].chunks_exact(3) {
                writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
            }
        }
        if let Some(s) = step.nodal_von_mises {
            check_len("nodal von Mises", s.len(), nv)?;
            scalar(&mut w, "von_mises_max_MPa", s)?;
        }
    }
    if let Some(s) = step.cell_von_mises {
        check_len("cell von Mises", s.len(), tets.len())?;
        writeln!(w, "CELL_DATA {}", tets.len())?;
        let cell: Vec<f64> = s.iter().map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        scalar(&mut w, "von_mises_MPa", &cell)?;
    }
    w.flush()
}

pub fn write_vtk_file(mesh: &Mesh, step: &VtkStep, path: &Path) -> io::Result<()> {
    write_vtk(mesh, step, File::create(path)?)
}

fn bad_len(what: &str, got: usize, expected: usize) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidInput,
        format!("{what} field has {got} values, expected {expected}"),
    )
}

fn check_len(what: &str, got: usize, expected: usize) -> io::Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(bad_len(what, got, expected))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box;

    #[test]
    fn sections_and_counts() {
        let mesh = generate_box(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
        let t = vec![1.5; 8];
        let vm = vec![[1.0, 2.0, 3.0, 4.0]; 6];
        let mut out = Vec::new();
        write_vtk(
            &mesh,
            &VtkStep {
                time: 90.0,
                temperature: Some(&t),
                cell_von_mises: Some(&vm),
                ..Default::default()
            },
            &mut out,
        )
        .unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.contains("POINTS 8 double"));
        assert!(s.contains("CELLS 6 30"));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), 6);
        assert!(s.contains("POINT_DATA 8"));
        assert!(s.contains("CELL_DATA 6"));
        assert_eq!(s.lines().filter(|l| *l == "4").count(), 6);
    }

    #[test]
    fn rejects_wrong_length() {
        let mesh = generate_box(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
        let t = vec![0.0; 3];
        let r = write_vtk(
            &mesh,
            &VtkStep {
                temperature: Some(&t),
                ..Default::default()
            },
            Vec::new(),
        );
        assert!(r.is_err());
    }
}
