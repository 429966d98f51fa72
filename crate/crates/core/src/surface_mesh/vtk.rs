//! Legacy ASCII VTK unstructured-grid output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::field::{NodalField, PositionVector};

const VTK_TRIANGLE: u8 = 5;
const VTK_QUADRATIC_TRIANGLE: u8 = 22;

/// VTK orders quadratic mid-edge nodes as edges (0,1), (1,2), (2,0).
const QUADRATIC_TO_VTK: [usize; 6] = [0, 1, 2, 5, 3, 4];

/// A named nodal field: one component (scalar) or three (vector).
pub struct VtkField<'a> {
    pub name: &'a str,
    pub field: &'a NodalField,
}

pub fn write_vtk(
    path: &Path,
    mesh: &SurfaceMesh,
    x: &PositionVector,
    fields: &[VtkField<'_>],
) -> Result<()> {
    let n = mesh.n_nodes();
    for f in fields {
        if f.field.n_nodes() != n || !(f.field.dim() == 1 || f.field.dim() == 3) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.field.as_slice().len(),
            });
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "forcedflow surface")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for j in 0..n {
        let p = x.node3(j);
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    let n_loc = mesh.n_loc();
    let n_el = mesh.n_elements();
    writeln!(w, "CELLS {} {}", n_el, n_el * (n_loc + 1))?;
    for el in mesh.elements() {
        write!(w, "{n_loc}")?;
        if n_loc == 6 {
            for &a in &QUADRATIC_TO_VTK {
                write!(w, " {}", el[a])?;
            }
        } else {
            for i in el {
                write!(w, " {i}")?;
            }
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {n_el}")?;
    let ty = if n_loc == 6 { VTK_QUADRATIC_TRIANGLE } else { VTK_TRIANGLE };
    for _ in 0..n_el {
        writeln!(w, "{ty}")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {n}")?;
    }
    for f in fields {
        let name = f.name.replace(char::is_whitespace, "_");
        if f.field.dim() == 1 {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in f.field.component(0) {
                writeln!(w, "{v:.17e}")?;
            }
        } else {
            writeln!(w, "VECTORS {name} double")?;
            for j in 0..n {
                let v = f.field.node3(j);
                writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the `POINTS` block of a legacy ASCII file.
pub fn read_vtk_points(path: &Path) -> Result<PositionVector> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    while let Some(t) = tokens.next() {
        if t == "POINTS" {
            let n: usize = tokens
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidMesh("bad POINTS header".into()))?;
            tokens.next();
            let mut coords = Vec::with_capacity(3 * n);
            for _ in 0..3 * n {
                let v: f64 = tokens
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidMesh("truncated POINTS block".into()))?;
                coords.push(v);
            }
            return Ok(PositionVector::from_fn(n, 3, |j| coords[3 * j..3 * j + 3].to_vec()));
        }
    }
    Err(Error::InvalidMesh("no POINTS block".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_mesh::make_sphere_mesh;

    #[test]
    fn round_trip_with_zero_field() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, x) = make_sphere_mesh(0, 1.0, 2).unwrap();
        let u = NodalField::zeros(mesh.n_nodes(), 1);
        let path = dir.path().join("s.vtk");
        write_vtk(&path, &mesh, &x, &[VtkField { name: "u", field: &u }]).unwrap();
        assert_eq!(read_vtk_points(&path).unwrap(), x);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("CELL_TYPES 20\n22\n"));
        assert!(text.contains("SCALARS u double 1"));
    }

    #[test]
    fn geometry_only() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, x) = make_sphere_mesh(1, 1.0, 1).unwrap();
        let path = dir.path().join("g.vtk");
        write_vtk(&path, &mesh, &x, &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("POINT_DATA"));
        assert_eq!(read_vtk_points(&path).unwrap(), x);
    }

    #[test]
    fn wrong_field_length() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, x) = make_sphere_mesh(0, 1.0, 1).unwrap();
        let bad = NodalField::zeros(5, 1);
        let r = write_vtk(&dir.path().join("b.vtk"), &mesh, &x, &[VtkField { name: "b", field: &bad }]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
