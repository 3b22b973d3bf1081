//! The `mesh-info` and `catalog` subcommands: plain-text reports with no
//! side effects.

use gaugefem::mesh::{load_mesh, validate_mesh};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::Result;

/// Parse and validate a mesh file, returning its statistics as
/// `key=value` lines.
pub fn mesh_info(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let (mesh, load) = load_mesh(&text)?;
    let r = validate_mesh(&mesh)?;
    let mut s = String::new();
    let _ = writeln!(s, "vertices={}", r.num_vertices);
    let _ = writeln!(s, "triangles={}", r.num_triangles);
    let _ = writeln!(s, "edges={}", r.num_edges);
    let _ = writeln!(s, "boundary_edges={}", r.num_boundary_edges);
    let _ = writeln!(s, "boundary_components={}", r.boundary_components);
    let _ = writeln!(s, "holes={}", r.holes);
    let _ = writeln!(s, "area={:.12e}", r.area);
    let _ = writeln!(s, "h_max={:.12e}", r.h_max);
    let markers: Vec<String> = r.markers.iter().map(ToString::to_string).collect();
    let _ = writeln!(s, "markers={}", markers.join(","));
    let _ = writeln!(s, "reoriented_triangles={}", load.reoriented);
    Ok(s)
}

/// The built-in domains, potentials, and scalar specs, as consumed by the
/// config keys of the same names.
pub fn catalog() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "domains");
    let _ = writeln!(s, "  square          (-1,1)^2, crossed-diagonal triangulation");
    let _ = writeln!(s, "  lshape          (0,3)^2 minus [2,3)^2, reentrant corner at (2,2)");
    let _ = writeln!(s, "  mesh=<file>     ASCII mesh file (vertices / triangles / boundary markers)");
    let _ = writeln!(s);
    let _ = writeln!(s, "vector potentials (key: potential)");
    let _ = writeln!(s, "  ex1             -100(x^2 + y^2, x^2 - y^2)");
    let _ = writeln!(s, "  ex2             -100(cos f1 sin f2, sin f1 cos f2),");
    let _ = writeln!(s, "                  f1 = 5 pi sin(x^2 + y^2), f2 = 5 pi cos(x^2 + y^2)");
    let _ = writeln!(s, "  ex3             -100(cos f, sin f), f = pi sin(pi x) cos(pi y)");
    let _ = writeln!(s, "  ex4             25(-y, x), uniform magnetic field of strength 50");
    let _ = writeln!(s, "  a1              (-y/2, x/2), symmetric gauge of the unit field");
    let _ = writeln!(s, "  a2              (-y, 0), Landau gauge of the unit field");
    let _ = writeln!(s, "  a3              (0, x), Landau gauge of the unit field");
    let _ = writeln!(s, "  constant:ax,ay  constant curl-free field");
    let _ = writeln!(s, "  zero            A = 0");
    let _ = writeln!(s);
    let _ = writeln!(s, "scalar potentials (key: scalar)");
    let _ = writeln!(s, "  none            V = 0");
    let _ = writeln!(s, "  grid            16x16 piecewise-constant random V,");
    let _ = writeln!(s, "                  amplitude `vstar`, SplitMix64 stream `seed`");
    let _ = writeln!(s);
    let _ = writeln!(s, "gauge modes (key: gauge)");
    let _ = writeln!(s, "  original        assemble with the catalog potential A");
    let _ = writeln!(s, "  canonical       assemble with the minimal-norm field F = A - grad a_h");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaugefem::potentials::vector_by_name;

    #[test]
    fn every_catalog_name_resolves() {
        let text = catalog();
        for name in ["ex1", "ex2", "ex3", "ex4", "a1", "a2", "a3", "zero"] {
            assert!(text.contains(&format!("  {name} ")), "{name} missing from catalog");
            assert!(vector_by_name(name).is_some(), "{name} does not resolve");
        }
        assert!(vector_by_name("constant:1,2").is_some());
    }

    #[test]
    fn mesh_info_reports_a_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.mesh");
        // Unit square split along one diagonal, all markers 1.
        let text = "# unit square\n4 2 4\n0 0\n1 0\n1 1\n0 1\n\
                    0 1 2\n0 2 3\n\
                    0 1 1\n1 2 1\n2 3 1\n3 0 1\n";
        fs::write(&path, text).unwrap();
        let info = mesh_info(&path).unwrap();
        assert!(info.contains("vertices=4"));
        assert!(info.contains("triangles=2"));
        assert!(info.contains("holes=0"));
        assert!(info.contains("markers=1"));
    }

    #[test]
    fn missing_files_map_to_config_exit_code() {
        let err = mesh_info(Path::new("/no/such/mesh.txt")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
