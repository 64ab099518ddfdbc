//! Writes the fixture meshes and configs: `ccmsim-fixtures [DIR]` (default `fixtures`).

use std::path::PathBuf;

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let meshes = root.join("meshes");
    let configs = root.join("configs");
    for d in [&meshes, &configs] {
        if let Err(e) = std::fs::create_dir_all(d) {
            eprintln!("cannot create {}: {e}", d.display());
            std::process::exit(2);
        }
    }
    for (name, mesh) in ccmsim::fixtures::meshes() {
        let path = meshes.join(name);
        if let Err(e) = ccmsim::mesh::write_mesh(&mesh, &path) {
            eprintln!("{}: {e}", path.display());
            std::process::exit(2);
        }
        println!("{} ({} nodes, {} triangles)", path.display(), mesh.n_nodes(), mesh.n_triangles());
    }
    for (name, text) in ccmsim::fixtures::configs() {
        let path = configs.join(name);
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("{}: {e}", path.display());
            std::process::exit(2);
        }
        println!("{}", path.display());
    }
}
