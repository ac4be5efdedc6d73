//! Writes the bundled demo meshes as Gmsh 2.2 files.
//!
//!     cargo run --release --example write_demo_mesh -- crates/core/data

use std::path::PathBuf;

use rotor_activation::mesh::{generate_annular_sector, write_gmsh, SectorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, spec) in [
        ("disk_blade.msh", SectorSpec::demo()),
        ("disk_blade_coarse.msh", SectorSpec::demo_coarse()),
    ] {
        let mesh = generate_annular_sector(&spec)?;
        std::fs::write(dir.join(name), write_gmsh(&mesh))?;
        let s = mesh.stats();
        println!("{name}: {} nodes, {} tets, {} boundary triangles", s.nodes, s.tets, s.boundary_tris);
    }
    Ok(())
}
