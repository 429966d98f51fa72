//! Mass and stiffness matrices and the nonlinear load vectors of the
//! evolving surface finite element discretisation.
//!
//! The coupled unknowns `w` are a nodal field with `4 + m` blocks: the normal
//! ν (blocks 0..3), the mean curvature H (block 3) and the PDE components u
//! (blocks 4..4+m).
//!
//! Element contributions are computed in parallel and scattered serially in
//! element order, so every assembly is bit-for-bit reproducible.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{NodalField, PositionVector};
use crate::problems::ProblemDefinition;
use crate::ref_element::{quadrature, QuadratureRule, ShapeFunctionSet, DEFAULT_QUADRATURE_DEGREE};
use crate::sparse::{SparseSymmetricMatrix, SparsityPattern};
use crate::surface_mesh::{element_frame, ElementFrame, SurfaceMesh, DEFAULT_DEGENERACY_TOLERANCE};

pub const NU_BLOCK: usize = 0;
pub const H_BLOCK: usize = 3;
pub const U_BLOCK: usize = 4;

/// How ∇_Γ(V_h ν_h) enters the velocity load vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientMode {
    /// Differentiate the nodal interpolant of V ν.
    #[default]
    InterpolateFirst,
    /// ∇V_h ν_h + V_h ∇ν_h at the quadrature points.
    ProductRule,
}

/// Which part of the kinetics F goes into a load vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KineticsPart {
    Full,
    /// `F − L u`; the diagonal linear part is then carried by the matrix.
    Explicit,
}

/// Mesh, quadrature and sparsity pattern: everything that does not depend on
/// the node positions.
#[derive(Debug)]
pub struct FeSpace {
    mesh: SurfaceMesh,
    rule: QuadratureRule,
    shape: ShapeFunctionSet,
    pattern: Arc<SparsityPattern>,
    degeneracy_tolerance: f64,
}

impl FeSpace {
    pub fn new(mesh: SurfaceMesh) -> Result<Self> {
        Self::with_quadrature(mesh, DEFAULT_QUADRATURE_DEGREE)
    }

    pub fn with_quadrature(mesh: SurfaceMesh, degree: usize) -> Result<Self> {
        let rule = quadrature(degree)?;
        let shape = ShapeFunctionSet::new(mesh.degree(), &rule)?;
        let pattern = Arc::new(SparsityPattern::from_mesh(&mesh));
        Ok(Self {
            mesh,
            rule,
            shape,
            pattern,
            degeneracy_tolerance: DEFAULT_DEGENERACY_TOLERANCE,
        })
    }

    pub fn set_degeneracy_tolerance(&mut self, tolerance: f64) {
        self.degeneracy_tolerance = tolerance;
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn shape(&self) -> &ShapeFunctionSet {
        &self.shape
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Element frames and basis gradients on Γ_h[x].
    pub fn geometry(&self, x: &PositionVector) -> Result<SurfaceGeometry<'_>> {
        self.geometry_with_tolerance(x, self.degeneracy_tolerance)
    }

    pub fn geometry_with_tolerance(&self, x: &PositionVector, tolerance: f64) -> Result<SurfaceGeometry<'_>> {
        self.mesh.check_positions(x)?;
        if !x.is_finite() {
            return Err(Error::NonFinite("node positions"));
        }
        let frames = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|e| element_frame(&self.mesh, x, e, &self.shape, tolerance))
            .collect::<Result<Vec<_>>>()?;
        let n_loc = self.shape.n_loc;
        let mut grads = Vec::with_capacity(frames.len() * self.rule.len() * n_loc);
        for frame in &frames {
            for q in 0..self.rule.len() {
                for a in 0..n_loc {
                    grads.push(frame.tangential_gradient(q, self.shape.grads[q][a]));
                }
            }
        }
        Ok(SurfaceGeometry {
            space: self,
            x: x.clone(),
            frames,
            grads,
        })
    }
}

/// Fields of `w` evaluated at one quadrature point.
#[derive(Clone, Debug)]
pub struct FieldAtQuadrature {
    pub nu: [f64; 3],
    pub grad_nu: [[f64; 3]; 3],
    pub h: f64,
    pub grad_h: [f64; 3],
    pub u: Vec<f64>,
    pub grad_u: Vec<[f64; 3]>,
}

impl FieldAtQuadrature {
    /// α_h² = |∇_Γh ν_h|², Frobenius norm of the broken gradient.
    pub fn alpha_squared(&self) -> f64 {
        self.grad_nu.iter().flatten().map(|g| g * g).sum()
    }
}

/// The discrete surface Γ_h[x] with its element frames.
pub struct SurfaceGeometry<'a> {
    space: &'a FeSpace,
    x: PositionVector,
    frames: Vec<ElementFrame>,
    /// Tangential basis gradients indexed (element, quadrature point, local node).
    grads: Vec<[f64; 3]>,
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl<'a> SurfaceGeometry<'a> {
    pub fn space(&self) -> &FeSpace {
        self.space
    }

    pub fn positions(&self) -> &PositionVector {
        &self.x
    }

    pub fn frame(&self, e: usize) -> &ElementFrame {
        &self.frames[e]
    }

    fn nq(&self) -> usize {
        self.space.rule.len()
    }

    fn n_loc(&self) -> usize {
        self.space.shape.n_loc
    }

    pub fn basis_gradient(&self, e: usize, q: usize, a: usize) -> [f64; 3] {
        self.grads[(e * self.nq() + q) * self.n_loc() + a]
    }

    /// Quadrature weight times area element.
    pub fn weight(&self, e: usize, q: usize) -> f64 {
        self.space.rule.weights[q] * self.frames[e].area_elements[q]
    }

    pub fn min_gram_det(&self) -> f64 {
        self.frames.iter().map(|f| f.min_gram_det()).fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        let mut s = 0.0;
        for e in 0..self.frames.len() {
            for q in 0..self.nq() {
                s += self.weight(e, q);
            }
        }
        s
    }

    /// Value and tangential gradient at (e, q) of the scalar nodal vector `values`.
    pub fn eval(&self, e: usize, q: usize, values: &[f64]) -> (f64, [f64; 3]) {
        let el = self.space.mesh.element(e);
        let phi = &self.space.shape.values[q];
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for (a, &node) in el.iter().enumerate() {
            let c = values[node];
            v += phi[a] * c;
            let ga = self.basis_gradient(e, q, a);
            for i in 0..3 {
                g[i] += ga[i] * c;
            }
        }
        (v, g)
    }

    /// Evaluates all blocks of the coupled unknowns at (e, q).
    pub fn sample(&self, e: usize, q: usize, w: &NodalField) -> FieldAtQuadrature {
        let mut nu = [0.0; 3];
        let mut grad_nu = [[0.0; 3]; 3];
        for l in 0..3 {
            let (v, g) = self.eval(e, q, w.component(NU_BLOCK + l));
            nu[l] = v;
            grad_nu[l] = g;
        }
        let (h, grad_h) = self.eval(e, q, w.component(H_BLOCK));
        let m = w.dim() - U_BLOCK;
        let mut u = Vec::with_capacity(m);
        let mut grad_u = Vec::with_capacity(m);
        for i in 0..m {
            let (v, g) = self.eval(e, q, w.component(U_BLOCK + i));
            u.push(v);
            grad_u.push(g);
        }
        FieldAtQuadrature {
            nu,
            grad_nu,
            h,
            grad_h,
            u,
            grad_u,
        }
    }

    fn assemble_matrix<F>(&self, local: F) -> SparseSymmetricMatrix
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let n_loc = self.n_loc();
        let locals: Vec<Vec<f64>> = (0..self.frames.len())
            .into_par_iter()
            .map(|e| {
                let mut buf = vec![0.0; n_loc * n_loc];
                local(e, &mut buf);
                buf
            })
            .collect();
        let mut mat = SparseSymmetricMatrix::zeros(Arc::clone(&self.space.pattern));
        for (e, buf) in locals.iter().enumerate() {
            mat.add_element(e, buf);
        }
        mat
    }

    /// Assembles a blocked vector; `local` fills `blocks × n_loc` entries
    /// laid out block-major.
    fn assemble_vector<F>(&self, blocks: usize, what: &'static str, local: F) -> Result<Vec<f64>>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let n_loc = self.n_loc();
        let n = self.space.n_nodes();
        let locals: Vec<Vec<f64>> = (0..self.frames.len())
            .into_par_iter()
            .map(|e| {
                let mut buf = vec![0.0; blocks * n_loc];
                local(e, &mut buf);
                buf
            })
            .collect();
        let mut out = vec![0.0; blocks * n];
        for (e, buf) in locals.iter().enumerate() {
            let el = self.space.mesh.element(e);
            for b in 0..blocks {
                for (a, &node) in el.iter().enumerate() {
                    out[b * n + node] += buf[b * n_loc + a];
                }
            }
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn mass_matrix(&self) -> SparseSymmetricMatrix {
        let n_loc = self.n_loc();
        self.assemble_matrix(|e, buf| {
            for q in 0..self.nq() {
                let w = self.weight(e, q);
                let phi = &self.space.shape.values[q];
                for a in 0..n_loc {
                    for b in a..n_loc {
                        let v = w * phi[a] * phi[b];
                        buf[a * n_loc + b] += v;
                        if b != a {
                            buf[b * n_loc + a] += v;
                        }
                    }
                }
            }
        })
    }

    pub fn stiffness_matrix(&self) -> SparseSymmetricMatrix {
        let n_loc = self.n_loc();
        self.assemble_matrix(|e, buf| {
            for q in 0..self.nq() {
                let w = self.weight(e, q);
                for a in 0..n_loc {
                    let ga = self.basis_gradient(e, q, a);
                    for b in a..n_loc {
                        let v = w * dot3(ga, self.basis_gradient(e, q, b));
                        buf[a * n_loc + b] += v;
                        if b != a {
                            buf[b * n_loc + a] += v;
                        }
                    }
                }
            }
        })
    }

    /// α_h² at every quadrature point, indexed (element, point).
    pub fn alpha_squared(&self, nu: &NodalField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frames.len() * self.nq());
        for e in 0..self.frames.len() {
            for q in 0..self.nq() {
                let mut s = 0.0;
                for l in 0..3 {
                    let g = self.eval(e, q, nu.component(l)).1;
                    s += dot3(g, g);
                }
                out.push(s);
            }
        }
        out
    }

    fn check_w(&self, w: &NodalField, problem: &ProblemDefinition) -> Result<()> {
        let expected = (U_BLOCK + problem.components) * self.space.n_nodes();
        if w.n_nodes() != self.space.n_nodes() || w.dim() != U_BLOCK + problem.components {
            return Err(Error::DimensionMismatch {
                expected,
                got: w.as_slice().len(),
            });
        }
        Ok(())
    }

    /// Velocity load: component (j, ℓ) = ∫ P_ℓ φ_j + ∫ ∇_Γh P_ℓ · ∇_Γh φ_j
    /// with P = V_h ν_h + ρ2.
    pub fn vec_g(
        &self,
        problem: &ProblemDefinition,
        w: &NodalField,
        t: f64,
        mode: GradientMode,
    ) -> Result<Vec<f64>> {
        self.check_w(w, problem)?;
        let n = self.space.n_nodes();
        let has_sources = problem.exact.is_some();
        // nodal values of ρ2 (interpolated in both modes) and of V ν
        let mut nodal = NodalField::zeros(n, 3);
        let mut u = vec![0.0; problem.components];
        for j in 0..n {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = w.component(U_BLOCK + i)[j];
            }
            let rho2 = if has_sources {
                problem.sources(self.x.node3(j), t).rho2
            } else {
                [0.0; 3]
            };
            let v = match mode {
                GradientMode::InterpolateFirst => problem.normal_velocity(w.component(H_BLOCK)[j], &u),
                GradientMode::ProductRule => 0.0,
            };
            let nu = w.node3(j);
            nodal.set_node3(j, [v * nu[0] + rho2[0], v * nu[1] + rho2[1], v * nu[2] + rho2[2]]);
        }
        let n_loc = self.n_loc();
        let eps = problem.epsilon;
        self.assemble_vector(3, "velocity load", |e, buf| {
            for q in 0..self.nq() {
                let wq = self.weight(e, q);
                let s = self.sample(e, q, w);
                let v = problem.normal_velocity(s.h, &s.u);
                let rho2 = if has_sources {
                    problem.sources(self.frames[e].points[q], t).rho2
                } else {
                    [0.0; 3]
                };
                let grad_v = match mode {
                    GradientMode::ProductRule => {
                        let gg = problem.forcing.gradient(&s.u, &s.grad_u);
                        [
                            -eps * s.grad_h[0] + gg[0],
                            -eps * s.grad_h[1] + gg[1],
                            -eps * s.grad_h[2] + gg[2],
                        ]
                    }
                    GradientMode::InterpolateFirst => [0.0; 3],
                };
                for l in 0..3 {
                    let value = v * s.nu[l] + rho2[l];
                    let mut grad = self.eval(e, q, nodal.component(l)).1;
                    if mode == GradientMode::ProductRule {
                        for c in 0..3 {
                            grad[c] += grad_v[c] * s.nu[l] + v * s.grad_nu[l][c];
                        }
                    }
                    for a in 0..n_loc {
                        let phi = self.space.shape.values[q][a];
                        buf[l * n_loc + a] +=
                            wq * (value * phi + dot3(grad, self.basis_gradient(e, q, a)));
                    }
                }
            }
        })
    }

    /// Load vector of the coupled system, blocks (f_ν, f_H, f_u):
    ///
    /// ```text
    /// f_ν = ∫ (ε α² ν_ℓ − (∇g(u))_ℓ + ρ3_ℓ) φ
    /// f_H = ∫ (−α² V + ρ4) φ + ∫ ∇g(u)·∇φ
    /// f_u = ∫ (F(u, ∇u) − V H u + ρ1) φ
    /// ```
    pub fn vec_f(
        &self,
        problem: &ProblemDefinition,
        w: &NodalField,
        t: f64,
        part: KineticsPart,
    ) -> Result<Vec<f64>> {
        self.check_w(w, problem)?;
        let m = problem.components;
        let n_loc = self.n_loc();
        let eps = problem.epsilon;
        self.assemble_vector(U_BLOCK + m, "coupled load", |e, buf| {
            let mut reaction = vec![0.0; m];
            for q in 0..self.nq() {
                let wq = self.weight(e, q);
                let s = self.sample(e, q, w);
                let src = problem.sources(self.frames[e].points[q], t);
                let alpha2 = s.alpha_squared();
                let v = problem.normal_velocity(s.h, &s.u);
                let grad_g = problem.forcing.gradient(&s.u, &s.grad_u);
                match part {
                    KineticsPart::Full => problem.kinetics.eval(&s.u, &s.grad_u, &mut reaction),
                    KineticsPart::Explicit => problem.kinetics.eval_explicit(&s.u, &s.grad_u, &mut reaction),
                }
                let mut point = [0.0; 8];
                for l in 0..3 {
                    point[l] = eps * alpha2 * s.nu[l] - grad_g[l] + src.rho3[l];
                }
                point[3] = -alpha2 * v + src.rho4;
                for a in 0..n_loc {
                    let phi = self.space.shape.values[q][a];
                    for l in 0..4 {
                        buf[l * n_loc + a] += wq * point[l] * phi;
                    }
                    buf[H_BLOCK * n_loc + a] += wq * dot3(grad_g, self.basis_gradient(e, q, a));
                    for i in 0..m {
                        let mut fu = reaction[i] - v * s.h * s.u[i];
                        if i == 0 {
                            fu += src.rho1_coupled;
                        }
                        buf[(U_BLOCK + i) * n_loc + a] += wq * fu * phi;
                    }
                }
            }
        })
    }

    /// Reaction load of the conservative form: ∫ (F(u, ∇u) + ρ1) φ per component.
    pub fn vec_reaction(
        &self,
        problem: &ProblemDefinition,
        u: &NodalField,
        t: f64,
        part: KineticsPart,
    ) -> Result<Vec<f64>> {
        let m = problem.components;
        if u.n_nodes() != self.space.n_nodes() || u.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m * self.space.n_nodes(),
                got: u.as_slice().len(),
            });
        }
        let n_loc = self.n_loc();
        self.assemble_vector(m, "reaction load", |e, buf| {
            let mut vals = vec![0.0; m];
            let mut grads = vec![[0.0; 3]; m];
            let mut reaction = vec![0.0; m];
            for q in 0..self.nq() {
                let wq = self.weight(e, q);
                for i in 0..m {
                    (vals[i], grads[i]) = self.eval(e, q, u.component(i));
                }
                match part {
                    KineticsPart::Full => problem.kinetics.eval(&vals, &grads, &mut reaction),
                    KineticsPart::Explicit => problem.kinetics.eval_explicit(&vals, &grads, &mut reaction),
                }
                if problem.exact.is_some() {
                    reaction[0] += problem.sources(self.frames[e].points[q], t).rho1;
                }
                for a in 0..n_loc {
                    let phi = self.space.shape.values[q][a];
                    for i in 0..m {
                        buf[i * n_loc + a] += wq * reaction[i] * phi;
                    }
                }
            }
        })
    }
}

/// `I_d ⊗ base` applied to blocked vectors.
pub struct LiftedMatrix<'m> {
    pub base: &'m SparseSymmetricMatrix,
    pub blocks: usize,
}

impl LiftedMatrix<'_> {
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let expected = self.blocks * self.base.n();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(self.base.mul_lifted(x))
    }
}

pub fn lifted_matrix(base: &SparseSymmetricMatrix, blocks: usize) -> LiftedMatrix<'_> {
    LiftedMatrix { base, blocks }
}

/// K = M + A
pub fn k_matrix(mass: &SparseSymmetricMatrix, stiffness: &SparseSymmetricMatrix) -> SparseSymmetricMatrix {
    mass.linear_combination(1.0, stiffness, 1.0)
}

/// Mass matrix with the default quadrature.
pub fn mass_matrix(mesh: &SurfaceMesh, x: &PositionVector) -> Result<SparseSymmetricMatrix> {
    let space = FeSpace::new(mesh.clone())?;
    Ok(space.geometry(x)?.mass_matrix())
}

/// Stiffness matrix with the default quadrature.
pub fn stiffness_matrix(mesh: &SurfaceMesh, x: &PositionVector) -> Result<SparseSymmetricMatrix> {
    let space = FeSpace::new(mesh.clone())?;
    Ok(space.geometry(x)?.stiffness_matrix())
}
