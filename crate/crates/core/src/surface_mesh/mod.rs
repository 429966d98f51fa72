//! Closed triangulated surfaces with curved (isoparametric) elements.
//!
//! Connectivity lives in [`SurfaceMesh`]; the geometry is a separate
//! [`PositionVector`] so that the same mesh can be evaluated on the current,
//! extrapolated or exact node positions.

mod io;
mod sphere;
mod vtk;

use std::collections::HashMap;

pub use io::{read_mesh, write_mesh};
pub use sphere::{icosphere, make_sphere_mesh};
pub use vtk::{read_vtk_points, write_vtk, VtkField};

use crate::error::{Error, Result};
use crate::field::PositionVector;
use crate::ref_element::{local_node_count, QuadratureRule, ShapeFunctionSet};

/// Gram determinant threshold relative to the fourth power of the element
/// diameter.
pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    n_nodes: usize,
    degree: usize,
    n_loc: usize,
    elements: Vec<usize>,
}

impl SurfaceMesh {
    /// Validates node indices and closedness: every corner edge must be
    /// shared by exactly two elements with opposite orientation.
    pub fn new(n_nodes: usize, degree: usize, elements: Vec<usize>) -> Result<Self> {
        let n_loc = local_node_count(degree)?;
        if elements.len() % n_loc != 0 {
            return Err(Error::InvalidMesh(format!(
                "connectivity length {} is not a multiple of {n_loc}",
                elements.len()
            )));
        }
        if let Some(&bad) = elements.iter().find(|&&i| i >= n_nodes) {
            return Err(Error::InvalidMesh(format!(
                "node index {bad} out of range for {n_nodes} nodes"
            )));
        }
        let mesh = Self {
            n_nodes,
            degree,
            n_loc,
            elements,
        };
        let boundary = mesh.boundary_edge_count();
        if boundary != 0 {
            return Err(Error::InvalidMesh(format!(
                "surface is not closed: {boundary} unmatched edges"
            )));
        }
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / self.n_loc
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e * self.n_loc..(e + 1) * self.n_loc]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks_exact(self.n_loc)
    }

    /// Directed corner edges mapped to their multiplicity.
    fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for el in self.elements() {
            for (a, b) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Number of corner edges that are not matched by exactly one oppositely
    /// oriented edge of a neighbouring element.
    pub fn boundary_edge_count(&self) -> usize {
        let edges = self.directed_edges();
        edges
            .iter()
            .filter(|(&(a, b), &count)| count != 1 || edges.get(&(b, a)) != Some(&1))
            .count()
    }

    /// Number of undirected corner edges.
    pub fn edge_count(&self) -> usize {
        self.directed_edges().len() / 2
    }

    /// Number of distinct corner nodes.
    pub fn vertex_count(&self) -> usize {
        let mut seen = vec![false; self.n_nodes];
        for el in self.elements() {
            for &i in &el[..3] {
                seen[i] = true;
            }
        }
        seen.into_iter().filter(|&s| s).count()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.n_elements() as i64
    }

    pub(crate) fn check_positions(&self, x: &PositionVector) -> Result<()> {
        if x.n_nodes() != self.n_nodes || x.dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.n_nodes,
                got: x.as_slice().len(),
            });
        }
        Ok(())
    }

    /// Largest distance between two corners of element `e`.
    pub fn element_diameter(&self, x: &PositionVector, e: usize) -> f64 {
        let el = self.element(e);
        let p = [x.node3(el[0]), x.node3(el[1]), x.node3(el[2])];
        dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
    }
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Maximum element diameter over the mesh.
pub fn mesh_width(mesh: &SurfaceMesh, x: &PositionVector) -> f64 {
    (0..mesh.n_elements())
        .map(|e| mesh.element_diameter(x, e))
        .fold(0.0, f64::max)
}

/// Geometric data of one curved element at the points of a quadrature rule.
#[derive(Clone, Debug)]
pub struct ElementFrame {
    /// `jacobians[q][i][c]` = ∂x_i/∂ξ_c
    pub jacobians: Vec<[[f64; 2]; 3]>,
    pub gram_dets: Vec<f64>,
    /// sqrt(det(JᵀJ))
    pub area_elements: Vec<f64>,
    /// (JᵀJ)⁻¹Jᵀ
    pub pseudo_inverses: Vec<[[f64; 3]; 2]>,
    /// Physical quadrature points.
    pub points: Vec<[f64; 3]>,
}

impl ElementFrame {
    /// Tangential gradient J(JᵀJ)⁻¹ĝ of a function with reference gradient ĝ.
    pub fn tangential_gradient(&self, q: usize, ref_grad: [f64; 2]) -> [f64; 3] {
        let p = &self.pseudo_inverses[q];
        [
            p[0][0] * ref_grad[0] + p[1][0] * ref_grad[1],
            p[0][1] * ref_grad[0] + p[1][1] * ref_grad[1],
            p[0][2] * ref_grad[0] + p[1][2] * ref_grad[1],
        ]
    }

    /// Unnormalized normal ∂x/∂ξ × ∂x/∂η at quadrature point `q`.
    pub fn normal(&self, q: usize) -> [f64; 3] {
        let j = &self.jacobians[q];
        let a = [j[0][0], j[1][0], j[2][0]];
        let b = [j[0][1], j[1][1], j[2][1]];
        cross(a, b)
    }

    pub fn min_gram_det(&self) -> f64 {
        self.gram_dets.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Computes the element frame of element `e` on the surface `x`.
///
/// Fails with [`Error::DegenerateElement`] when the Gram determinant drops
/// below `tolerance · diam⁴` at any quadrature point.
pub fn element_frame(
    mesh: &SurfaceMesh,
    x: &PositionVector,
    e: usize,
    shape: &ShapeFunctionSet,
    tolerance: f64,
) -> Result<ElementFrame> {
    let el = mesh.element(e);
    let nq = shape.values.len();
    let nodes: Vec<[f64; 3]> = el.iter().map(|&i| x.node3(i)).collect();
    let diam = mesh.element_diameter(x, e);
    let threshold = tolerance * diam.powi(4);

    let mut frame = ElementFrame {
        jacobians: Vec::with_capacity(nq),
        gram_dets: Vec::with_capacity(nq),
        area_elements: Vec::with_capacity(nq),
        pseudo_inverses: Vec::with_capacity(nq),
        points: Vec::with_capacity(nq),
    };
    for q in 0..nq {
        let mut jac = [[0.0; 2]; 3];
        let mut point = [0.0; 3];
        for (a, node) in nodes.iter().enumerate() {
            let g = shape.grads[q][a];
            let phi = shape.values[q][a];
            for i in 0..3 {
                jac[i][0] += node[i] * g[0];
                jac[i][1] += node[i] * g[1];
                point[i] += node[i] * phi;
            }
        }
        let g00: f64 = (0..3).map(|i| jac[i][0] * jac[i][0]).sum();
        let g01: f64 = (0..3).map(|i| jac[i][0] * jac[i][1]).sum();
        let g11: f64 = (0..3).map(|i| jac[i][1] * jac[i][1]).sum();
        let det = g00 * g11 - g01 * g01;
        if !(det > threshold) {
            return Err(Error::DegenerateElement {
                element: e,
                gram: det,
                tolerance: threshold,
            });
        }
        let (i00, i01, i11) = (g11 / det, -g01 / det, g00 / det);
        let mut pinv = [[0.0; 3]; 2];
        for i in 0..3 {
            pinv[0][i] = i00 * jac[i][0] + i01 * jac[i][1];
            pinv[1][i] = i01 * jac[i][0] + i11 * jac[i][1];
        }
        frame.jacobians.push(jac);
        frame.gram_dets.push(det);
        frame.area_elements.push(det.sqrt());
        frame.pseudo_inverses.push(pinv);
        frame.points.push(point);
    }
    Ok(frame)
}

/// Minimum Gram determinant over all quadrature points of the mesh.
pub fn min_gram_det(
    mesh: &SurfaceMesh,
    x: &PositionVector,
    shape: &ShapeFunctionSet,
    tolerance: f64,
) -> Result<f64> {
    let mut m = f64::INFINITY;
    for e in 0..mesh.n_elements() {
        m = m.min(element_frame(mesh, x, e, shape, tolerance)?.min_gram_det());
    }
    Ok(m)
}

/// Surface area of Γ_h[x] by quadrature.
pub fn surface_area(mesh: &SurfaceMesh, x: &PositionVector, rule: &QuadratureRule) -> Result<f64> {
    mesh.check_positions(x)?;
    let shape = ShapeFunctionSet::new(mesh.degree(), rule)?;
    let mut area = 0.0;
    for e in 0..mesh.n_elements() {
        let frame = element_frame(mesh, x, e, &shape, DEFAULT_DEGENERACY_TOLERANCE)?;
        area += frame
            .area_elements
            .iter()
            .zip(&rule.weights)
            .map(|(a, w)| a * w)
            .sum::<f64>();
    }
    Ok(area)
}

/// Shape-regularity summary of the flat corner triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub n_nodes: usize,
    pub n_elements: usize,
    pub degree: usize,
    pub h_max: f64,
    pub h_min: f64,
    /// Smallest interior angle in degrees.
    pub min_angle: f64,
    /// Largest ratio of diameter to inradius.
    pub max_aspect: f64,
    pub euler_characteristic: i64,
    pub boundary_edges: usize,
}

pub fn quality_report(mesh: &SurfaceMesh, x: &PositionVector) -> QualityReport {
    let mut h_min = f64::INFINITY;
    let mut h_max: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let p = [x.node3(el[0]), x.node3(el[1]), x.node3(el[2])];
        let l = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
        let diam = l[0].max(l[1]).max(l[2]);
        h_min = h_min.min(diam);
        h_max = h_max.max(diam);
        let s = 0.5 * (l[0] + l[1] + l[2]);
        let area = (s * (s - l[0]) * (s - l[1]) * (s - l[2])).max(0.0).sqrt();
        max_aspect = max_aspect.max(diam * s / area);
        for i in 0..3 {
            let (a, b, c) = (l[i], l[(i + 1) % 3], l[(i + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos().to_degrees());
        }
    }
    QualityReport {
        n_nodes: mesh.n_nodes(),
        n_elements: mesh.n_elements(),
        degree: mesh.degree(),
        h_max,
        h_min,
        min_angle,
        max_aspect,
        euler_characteristic: mesh.euler_characteristic(),
        boundary_edges: mesh.boundary_edge_count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ref_element::quadrature;

    fn flat_triangle() -> (SurfaceMesh, PositionVector) {
        // not closed, so bypass validation
        let mesh = SurfaceMesh {
            n_nodes: 3,
            degree: 1,
            n_loc: 3,
            elements: vec![0, 1, 2],
        };
        let x = PositionVector::from_fn(3, 3, |j| match j {
            0 => vec![0.0, 0.0, 0.0],
            1 => vec![1.0, 0.0, 0.0],
            _ => vec![0.0, 1.0, 0.0],
        });
        (mesh, x)
    }

    #[test]
    fn reference_aligned_frame() {
        let (mesh, x) = flat_triangle();
        let rule = quadrature(2).unwrap();
        let shape = ShapeFunctionSet::new(1, &rule).unwrap();
        let f = element_frame(&mesh, &x, 0, &shape, DEFAULT_DEGENERACY_TOLERANCE).unwrap();
        for q in 0..rule.len() {
            assert!((f.area_elements[q] - 1.0).abs() < 1e-15);
            let g = f.tangential_gradient(q, [0.3, -0.7]);
            assert_eq!(g, [0.3, -0.7, 0.0]);
        }
    }

    #[test]
    fn equilateral_width() {
        let s = 2.5;
        let mesh = SurfaceMesh {
            n_nodes: 3,
            degree: 1,
            n_loc: 3,
            elements: vec![0, 1, 2],
        };
        let x = PositionVector::from_fn(3, 3, |j| match j {
            0 => vec![0.0, 0.0, 0.0],
            1 => vec![s, 0.0, 0.0],
            _ => vec![0.5 * s, 0.5 * 3f64.sqrt() * s, 0.0],
        });
        assert!((mesh_width(&mesh, &x) - s).abs() < 1e-14);
    }

    #[test]
    fn degenerate_element_is_reported() {
        let (mesh, mut x) = flat_triangle();
        x.set_node3(2, [2.0, 0.0, 0.0]);
        let rule = quadrature(1).unwrap();
        let shape = ShapeFunctionSet::new(1, &rule).unwrap();
        let err = element_frame(&mesh, &x, 0, &shape, DEFAULT_DEGENERACY_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { element: 0, .. }));
    }

    #[test]
    fn open_mesh_rejected() {
        assert!(matches!(
            SurfaceMesh::new(3, 1, vec![0, 1, 2]),
            Err(Error::InvalidMesh(_))
        ));
        assert!(SurfaceMesh::new(2, 1, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn sphere_gradients_are_tangent_and_scale() {
        let (mesh, x) = make_sphere_mesh(2, 1.0, 2).unwrap();
        let rule = quadrature(6).unwrap();
        let shape = ShapeFunctionSet::new(2, &rule).unwrap();
        let x1 = x.component(0).to_vec();
        let mut x2 = x.clone();
        x2.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
        for e in (0..mesh.n_elements()).step_by(17) {
            let f = element_frame(&mesh, &x, e, &shape, DEFAULT_DEGENERACY_TOLERANCE).unwrap();
            let f2 = element_frame(&mesh, &x2, e, &shape, DEFAULT_DEGENERACY_TOLERANCE).unwrap();
            for q in 0..rule.len() {
                let mut rg = [0.0; 2];
                for (a, &i) in mesh.element(e).iter().enumerate() {
                    rg[0] += x1[i] * shape.grads[q][a][0];
                    rg[1] += x1[i] * shape.grads[q][a][1];
                }
                let g = f.tangential_gradient(q, rg);
                let n = f.normal(q);
                let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                let dot = (g[0] * n[0] + g[1] * n[1] + g[2] * n[2]) / nn;
                assert!(dot.abs() < 1e-12);
                // the coordinate x₁ is scaled with the geometry, so its gradient
                // is scale invariant while the area element grows by 4
                let rg2 = [2.0 * rg[0], 2.0 * rg[1]];
                let g2 = f2.tangential_gradient(q, rg2);
                let g2_same_field = f2.tangential_gradient(q, rg);
                for i in 0..3 {
                    assert!((g2[i] - g[i]).abs() < 1e-12);
                    assert!((g2_same_field[i] - 0.5 * g[i]).abs() < 1e-12);
                }
                assert!((f2.area_elements[q] - 4.0 * f.area_elements[q]).abs() < 1e-12);
                // (JᵀJ)(JᵀJ)⁻¹ = I via J⁺J = I
                let j = &f.jacobians[q];
                let p = &f.pseudo_inverses[q];
                for r in 0..2 {
                    for c in 0..2 {
                        let v: f64 = (0..3).map(|i| p[r][i] * j[i][c]).sum();
                        let id = if r == c { 1.0 } else { 0.0 };
                        assert!((v - id).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn quality_report_on_sphere() {
        let (mesh, x) = make_sphere_mesh(1, 1.0, 1).unwrap();
        let r = quality_report(&mesh, &x);
        assert_eq!(r.euler_characteristic, 2);
        assert_eq!(r.boundary_edges, 0);
        assert!(r.min_angle > 45.0 && r.min_angle < 60.0);
        assert!(r.h_min <= r.h_max);
    }
}
