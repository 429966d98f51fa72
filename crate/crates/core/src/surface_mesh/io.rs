//! Plain-text mesh files.
//!
//! ```text
//! N E k
//! x y z            (N lines)
//! i0 i1 ... i{n_loc-1}   (E lines, zero-based, local node order of `ref_element`)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::field::PositionVector;

pub fn write_mesh(path: &Path, mesh: &SurfaceMesh, x: &PositionVector) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {} {}", mesh.n_nodes(), mesh.n_elements(), mesh.degree())?;
    for j in 0..mesh.n_nodes() {
        let p = x.node3(j);
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    for el in mesh.elements() {
        let line: Vec<String> = el.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<(SurfaceMesh, PositionVector)> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(1, format!("bad header token '{t}'"))))
        .collect::<Result<_>>()?;
    let [n, n_el, k] = head[..] else {
        return Err(err(1, "header must be 'N E k'".into()));
    };
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, l) = lines.next().ok_or_else(|| err(0, "missing node lines".into()))?;
        let p: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(i + 1, format!("bad coordinate '{t}'"))))
            .collect::<Result<_>>()?;
        if p.len() != 3 {
            return Err(err(i + 1, "expected three coordinates".into()));
        }
        coords.push(p);
    }
    let mut elements = Vec::new();
    for _ in 0..n_el {
        let (i, l) = lines.next().ok_or_else(|| err(0, "missing element lines".into()))?;
        for t in l.split_whitespace() {
            elements.push(t.parse().map_err(|_| err(i + 1, format!("bad node index '{t}'")))?);
        }
    }
    let x = PositionVector::from_fn(n, 3, |j| coords[j].clone());
    let mesh = SurfaceMesh::new(n, k, elements)?;
    Ok((mesh, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_mesh::make_sphere_mesh;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mesh");
        let (mesh, x) = make_sphere_mesh(1, 1.3, 2).unwrap();
        write_mesh(&path, &mesh, &x).unwrap();
        let (m2, x2) = read_mesh(&path).unwrap();
        assert_eq!(m2, mesh);
        assert_eq!(x2, x);
    }

    #[test]
    fn malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        fs::write(&path, "3 1\n").unwrap();
        assert!(matches!(read_mesh(&path), Err(Error::Config { line: 1, .. })));
    }
}
