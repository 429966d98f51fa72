use std::collections::HashMap;

use super::{cross, SurfaceMesh};
use crate::error::{Error, Result};
use crate::field::PositionVector;

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn icosahedron_vertices() -> [[f64; 3]; 12] {
    let p = 0.5 * (1.0 + 5f64.sqrt());
    [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
}

fn project(p: [f64; 3], radius: f64) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [radius * p[0] / n, radius * p[1] / n, radius * p[2] / n]
}

/// Lattice point identity shared between neighbouring icosahedron faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum LatticeKey {
    Corner(usize),
    /// Edge between icosahedron vertices `a < b`, `s` steps from `a`.
    Edge(usize, usize, usize),
    Interior(usize, usize, usize),
}

/// Geodesic icosphere of the given frequency: every icosahedron face is split
/// into `frequency²` triangles whose vertices are radially projected onto the
/// sphere. For degree 2 the mid-edge nodes are the projected chord midpoints.
///
/// Node numbering: all corner vertices first, then mid-edge nodes.
pub fn icosphere(frequency: usize, radius: f64, degree: usize) -> Result<(SurfaceMesh, PositionVector)> {
    if frequency == 0 {
        return Err(Error::InvalidMesh("icosphere frequency must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidMesh(format!("radius {radius} must be positive")));
    }
    let n = frequency;
    let base = icosahedron_vertices();
    let mut ids: HashMap<LatticeKey, usize> = HashMap::new();
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(20 * n * n);

    for (f, face) in ICOSAHEDRON_FACES.iter().enumerate() {
        let [a, b, c] = *face;
        let key = |i: usize, j: usize| -> LatticeKey {
            let k = n - i - j;
            // barycentric weights (k, i, j) on (a, b, c)
            let on = |w: usize, v: usize| -> Option<usize> { (w == n).then_some(v) };
            if let Some(v) = on(k, a).or(on(i, b)).or(on(j, c)) {
                return LatticeKey::Corner(v);
            }
            // `s` steps from `u` towards `v`
            let edge = |u: usize, v: usize, s: usize| {
                if u < v {
                    LatticeKey::Edge(u, v, s)
                } else {
                    LatticeKey::Edge(v, u, n - s)
                }
            };
            if j == 0 {
                edge(a, b, i)
            } else if k == 0 {
                edge(b, c, j)
            } else if i == 0 {
                edge(c, a, k)
            } else {
                LatticeKey::Interior(f, i, j)
            }
        };
        let mut node = |i: usize, j: usize| -> usize {
            let k = key(i, j);
            *ids.entry(k).or_insert_with(|| {
                let wk = (n - i - j) as f64;
                let (wi, wj) = (i as f64, j as f64);
                let p = [
                    (wk * base[a][0] + wi * base[b][0] + wj * base[c][0]) / n as f64,
                    (wk * base[a][1] + wi * base[b][1] + wj * base[c][1]) / n as f64,
                    (wk * base[a][2] + wi * base[b][2] + wj * base[c][2]) / n as f64,
                ];
                points.push(project(p, radius));
                points.len() - 1
            })
        };
        for j in 0..n {
            for i in 0..n - j {
                triangles.push([node(i, j), node(i + 1, j), node(i, j + 1)]);
                if i + j + 2 <= n {
                    triangles.push([node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
                }
            }
        }
    }

    // outward orientation
    for t in &mut triangles {
        let (p0, p1, p2) = (points[t[0]], points[t[1]], points[t[2]]);
        let nrm = cross(
            [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]],
            [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]],
        );
        if nrm[0] * p0[0] + nrm[1] * p0[1] + nrm[2] * p0[2] < 0.0 {
            t.swap(1, 2);
        }
    }

    let mut elements = Vec::new();
    match degree {
        1 => elements.extend(triangles.iter().flatten()),
        2 => {
            let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
            let n_vertices = points.len();
            let mut mid_points: Vec<[f64; 3]> = Vec::new();
            for t in &triangles {
                elements.extend_from_slice(t);
                for [p, q] in crate::ref_element::EDGE_OPPOSITE {
                    let (u, v) = (t[p].min(t[q]), t[p].max(t[q]));
                    let id = *mids.entry((u, v)).or_insert_with(|| {
                        let (pu, pv) = (points[u], points[v]);
                        mid_points.push(project(
                            [0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1]), 0.5 * (pu[2] + pv[2])],
                            radius,
                        ));
                        n_vertices + mid_points.len() - 1
                    });
                    elements.push(id);
                }
            }
            points.extend(mid_points);
        }
        k => return Err(Error::UnsupportedDegree(k)),
    }

    let x = PositionVector::from_fn(points.len(), 3, |j| points[j].to_vec());
    let mesh = SurfaceMesh::new(points.len(), degree, elements)?;
    Ok((mesh, x))
}

/// Icosphere after `refinement_level` uniform refinements of the
/// icosahedron (frequency `2^level`).
pub fn make_sphere_mesh(
    refinement_level: usize,
    radius: f64,
    degree: usize,
) -> Result<(SurfaceMesh, PositionVector)> {
    icosphere(1 << refinement_level, radius, degree)
}
