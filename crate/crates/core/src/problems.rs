//! Problem definitions: the manufactured logistic sphere, pure mean curvature
//! flow of a sphere, and the activator-depleted tumour growth model.
//!
//! All problems are instances of the forced system
//!
//! ```text
//! ∂•u = −u ∇_Γ·v + D Δ_Γ u + F(u, ∇_Γ u) + ρ1
//! v   = (−εH + g(u)) ν + ρ2
//! ∂•ν = ε Δ_Γ ν + ε|A|² ν − ∇_Γ g(u) + ρ3
//! ∂•H = ε Δ_Γ H + ε|A|² H − Δ_Γ g(u) − |A|² g(u) + ρ4
//! ```
//!
//! with the inhomogeneities ρ_i nonzero only when an exact solution is
//! attached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::FeSpace;
use crate::error::{Error, Result};
use crate::field::{NodalField, PositionVector};
use crate::flow_solver::{integrate_fixed_surface, SolverConfig};

/// Reaction terms F(u, ∇u), split as `F_i = L_i u_i + explicit_i(u, ∇u)`
/// where the diagonal linear part `L_i ≤ 0` is treated implicitly.
#[derive(Clone, Debug, PartialEq)]
pub enum Kinetics {
    Zero,
    /// F(u) = u²
    Square,
    /// F(u) = (γ(a − u₁ + u₁²u₂), γ(b − u₁²u₂))
    ActivatorDepleted { gamma: f64, a: f64, b: f64 },
}

impl Kinetics {
    /// Full F at one point.
    pub fn eval(&self, u: &[f64], grad: &[[f64; 3]], out: &mut [f64]) {
        self.eval_explicit(u, grad, out);
        for (i, l) in self.implicit_linear(u.len()).into_iter().enumerate() {
            out[i] += l * u[i];
        }
    }

    /// Diagonal coefficients `L_i` of the implicitly treated linear part.
    pub fn implicit_linear(&self, m: usize) -> Vec<f64> {
        match self {
            Kinetics::ActivatorDepleted { gamma, .. } => {
                let mut l = vec![0.0; m];
                l[0] = -gamma;
                l
            }
            _ => vec![0.0; m],
        }
    }

    /// `F − L u`, the part evaluated at extrapolated values.
    pub fn eval_explicit(&self, u: &[f64], _grad: &[[f64; 3]], out: &mut [f64]) {
        match *self {
            Kinetics::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Kinetics::Square => out[0] = u[0] * u[0],
            Kinetics::ActivatorDepleted { gamma, a, b } => {
                let r = u[0] * u[0] * u[1];
                out[0] = gamma * (a + r);
                out[1] = gamma * (b - r);
            }
        }
    }
}

/// Velocity forcing g(u) in the normal velocity V = −εH + g(u).
#[derive(Clone, Debug, PartialEq)]
pub enum VelocityForcing {
    Zero,
    /// g(u) = Σ α_i u_i
    Linear(Vec<f64>),
    /// g(u) = ½ u₁²
    HalfSquare,
}

impl VelocityForcing {
    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            VelocityForcing::Zero => 0.0,
            VelocityForcing::Linear(alpha) => alpha.iter().zip(u).map(|(a, u)| a * u).sum(),
            VelocityForcing::HalfSquare => 0.5 * u[0] * u[0],
        }
    }

    /// ∂g/∂u_i
    pub fn partial(&self, u: &[f64], i: usize) -> f64 {
        match self {
            VelocityForcing::Zero => 0.0,
            VelocityForcing::Linear(alpha) => alpha.get(i).copied().unwrap_or(0.0),
            VelocityForcing::HalfSquare => {
                if i == 0 {
                    u[0]
                } else {
                    0.0
                }
            }
        }
    }

    /// ∂²g/∂u₁² (scalar problems only).
    pub fn second_derivative(&self, _u: f64) -> f64 {
        match self {
            VelocityForcing::HalfSquare => 1.0,
            _ => 0.0,
        }
    }

    /// ∇_Γ g(u) = Σ_i ∂g/∂u_i ∇_Γ u_i
    pub fn gradient(&self, u: &[f64], grad: &[[f64; 3]]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, gi) in grad.iter().enumerate() {
            let d = self.partial(u, i);
            if d != 0.0 {
                for c in 0..3 {
                    out[c] += d * gi[c];
                }
            }
        }
        out
    }
}

/// Closed-form evolving spheres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactSolution {
    /// Radius following the logistic law dR/dt = (1 − R/R₁)R, with
    /// u = e^{−t} x₁x₂.
    LogisticSphere { r0: f64, r1: f64 },
    /// Mean curvature flow of a sphere, R(t)² = R₀² − 4εt, with u ≡ 0.
    ShrinkingSphere { r0: f64, epsilon: f64 },
}

/// Exact fields at a point of Γ(t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactFields {
    pub nu: [f64; 3],
    pub h: f64,
    pub u: f64,
    pub v: [f64; 3],
    pub a2: f64,
}

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// R(t) = R₀R₁ / (R₀(1 − e^{−t}) + R₁e^{−t})
pub fn exact_radius(t: f64, r0: f64, r1: f64) -> f64 {
    let e = (-t).exp();
    r0 * r1 / (r0 * (1.0 - e) + r1 * e)
}

impl ExactSolution {
    pub fn initial_radius(&self) -> f64 {
        match *self {
            ExactSolution::LogisticSphere { r0, .. } | ExactSolution::ShrinkingSphere { r0, .. } => r0,
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        match *self {
            ExactSolution::LogisticSphere { r0, r1 } => exact_radius(t, r0, r1),
            ExactSolution::ShrinkingSphere { r0, epsilon } => (r0 * r0 - 4.0 * epsilon * t).sqrt(),
        }
    }

    pub fn radius_rate(&self, t: f64) -> f64 {
        let r = self.radius(t);
        match *self {
            ExactSolution::LogisticSphere { r1, .. } => (1.0 - r / r1) * r,
            ExactSolution::ShrinkingSphere { epsilon, .. } => -2.0 * epsilon / r,
        }
    }

    /// X(p, t) for a point p on the initial sphere.
    pub fn flow_map(&self, p: [f64; 3], t: f64) -> [f64; 3] {
        let s = self.radius(t) / self.initial_radius();
        [s * p[0], s * p[1], s * p[2]]
    }

    /// Radial projection onto Γ(t).
    pub fn project(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let s = self.radius(t) / norm3(x);
        [s * x[0], s * x[1], s * x[2]]
    }

    fn u_on_sphere(&self, x: [f64; 3], t: f64) -> f64 {
        match self {
            ExactSolution::LogisticSphere { .. } => (-t).exp() * x[0] * x[1],
            ExactSolution::ShrinkingSphere { .. } => 0.0,
        }
    }

    /// Exact fields at x ∈ Γ(t); fails for points off the sphere.
    pub fn fields(&self, x: [f64; 3], t: f64) -> Result<ExactFields> {
        let r = self.radius(t);
        let d = norm3(x);
        if (d - r).abs() > 1e-8 * r {
            return Err(Error::OffSurface { distance: d, radius: r });
        }
        Ok(self.fields_extended(x, t))
    }

    /// Exact fields of the radially projected point.
    pub fn fields_extended(&self, x: [f64; 3], t: f64) -> ExactFields {
        let r = self.radius(t);
        let xs = self.project(x, t);
        let nu = [xs[0] / r, xs[1] / r, xs[2] / r];
        let rate = self.radius_rate(t);
        ExactFields {
            nu,
            h: 2.0 / r,
            u: self.u_on_sphere(xs, t),
            v: [rate * nu[0], rate * nu[1], rate * nu[2]],
            a2: 2.0 / (r * r),
        }
    }

    /// Tangential gradient of u at the radially projected point.
    pub fn u_gradient(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        match self {
            ExactSolution::LogisticSphere { .. } => {
                let xs = self.project(x, t);
                let r = self.radius(t);
                let nu = [xs[0] / r, xs[1] / r, xs[2] / r];
                let e = (-t).exp();
                let g = [e * xs[1], e * xs[0], 0.0];
                let gn = g[0] * nu[0] + g[1] * nu[1];
                [g[0] - gn * nu[0], g[1] - gn * nu[1], g[2] - gn * nu[2]]
            }
            ExactSolution::ShrinkingSphere { .. } => [0.0; 3],
        }
    }

    /// Δ_Γ u; x₁x₂ is a degree-2 spherical harmonic.
    pub fn u_laplacian(&self, x: [f64; 3], t: f64) -> f64 {
        let r = self.radius(t);
        -6.0 * self.fields_extended(x, t).u / (r * r)
    }

    /// Material derivative of u along the radial flow.
    pub fn u_material_derivative(&self, x: [f64; 3], t: f64) -> f64 {
        match self {
            ExactSolution::LogisticSphere { .. } => {
                let u = self.fields_extended(x, t).u;
                u * (2.0 * self.radius_rate(t) / self.radius(t) - 1.0)
            }
            ExactSolution::ShrinkingSphere { .. } => 0.0,
        }
    }
}

/// Inhomogeneities at one point in space-time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inhomogeneities {
    pub rho1: f64,
    pub rho2: [f64; 3],
    pub rho3: [f64; 3],
    pub rho4: f64,
    /// Source of the u-equation in the form where ∇_Γ·v is replaced by
    /// V·H, i.e. `rho1 − u ∇_Γ·rho2`.
    pub rho1_coupled: f64,
}

impl Inhomogeneities {
    pub const ZERO: Inhomogeneities = Inhomogeneities {
        rho1: 0.0,
        rho2: [0.0; 3],
        rho3: [0.0; 3],
        rho4: 0.0,
        rho1_coupled: 0.0,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemDefinition {
    pub name: String,
    pub epsilon: f64,
    pub components: usize,
    pub diffusivity: Vec<f64>,
    pub kinetics: Kinetics,
    pub forcing: VelocityForcing,
    pub exact: Option<ExactSolution>,
}

impl ProblemDefinition {
    /// Forced flow with F(u) = u², ε = 1 and the logistic sphere as exact
    /// solution.
    pub fn manufactured_sphere(r0: f64, r1: f64, forcing: VelocityForcing) -> Self {
        Self {
            name: "manufactured_sphere".into(),
            epsilon: 1.0,
            components: 1,
            diffusivity: vec![1.0],
            kinetics: Kinetics::Square,
            forcing,
            exact: Some(ExactSolution::LogisticSphere { r0, r1 }),
        }
    }

    /// Unforced mean curvature flow of a sphere, u ≡ 0.
    pub fn pure_mcf_sphere(r0: f64, epsilon: f64) -> Self {
        Self {
            name: "pure_mcf_sphere".into(),
            epsilon,
            components: 1,
            diffusivity: vec![1.0],
            kinetics: Kinetics::Zero,
            forcing: VelocityForcing::Zero,
            exact: Some(ExactSolution::ShrinkingSphere { r0, epsilon }),
        }
    }

    /// Normal velocity V = −εH + g(u).
    pub fn normal_velocity(&self, h: f64, u: &[f64]) -> f64 {
        -self.epsilon * h + self.forcing.value(u)
    }

    /// Closed-form inhomogeneities, radially extended off Γ(t).
    pub fn inhomogeneities(&self, x: [f64; 3], t: f64) -> Result<Inhomogeneities> {
        let exact = self.exact.ok_or(Error::NoExactSolution)?;
        let eps = self.epsilon;
        let f = exact.fields_extended(x, t);
        let r = exact.radius(t);
        let rate = exact.radius_rate(t);
        let u = [f.u];
        let grad_u = exact.u_gradient(x, t);
        let lap_u = exact.u_laplacian(x, t);
        let g = self.forcing.value(&u);
        let dg = self.forcing.partial(&u, 0);
        let d2g = self.forcing.second_derivative(f.u);
        let mut reaction = [0.0];
        self.kinetics.eval(&u, &[grad_u], &mut reaction);
        let diff = self.diffusivity[0];

        // ∇_Γ·v = Ṙ H for the normal velocity Ṙν
        let div_v = rate * f.h;
        let rho1 = exact.u_material_derivative(x, t) + f.u * div_v - diff * lap_u - reaction[0];
        let c2 = rate + eps * f.h - g;
        let rho2 = [c2 * f.nu[0], c2 * f.nu[1], c2 * f.nu[2]];
        // Δ_Γ ν = −|A|² ν on the sphere and ν is constant along trajectories
        let rho3 = [dg * grad_u[0], dg * grad_u[1], dg * grad_u[2]];
        let grad_u2 = grad_u.iter().map(|c| c * c).sum::<f64>();
        let lap_g = dg * lap_u + d2g * grad_u2;
        let rho4 = -2.0 * rate / (r * r) - eps * f.a2 * f.h + lap_g + f.a2 * g;
        // ∇_Γ·(c ν) = c H since ∇_Γ c ⟂ ν
        let rho1_coupled = rho1 - f.u * c2 * f.h;
        Ok(Inhomogeneities {
            rho1,
            rho2,
            rho3,
            rho4,
            rho1_coupled,
        })
    }

    /// Sources used during assembly: zero without an exact solution.
    pub fn sources(&self, x: [f64; 3], t: f64) -> Inhomogeneities {
        match self.exact {
            Some(_) => self.inhomogeneities(x, t).expect("exact solution attached"),
            None => Inhomogeneities::ZERO,
        }
    }
}

/// Parameters of the tumour growth model.
#[derive(Clone, Debug, PartialEq)]
pub struct TumourParams {
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Half-width of the uniform perturbation of the steady state.
    pub amplitude: f64,
    pub seed: u64,
}

impl TumourParams {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            d: 10.0,
            a: 0.1,
            b: 0.9,
            delta: 0.1,
            epsilon: 0.01,
            gamma,
            amplitude: 1e-2,
            seed: 0,
        }
    }

    pub fn steady_state(&self) -> [f64; 2] {
        let s = self.a + self.b;
        [s, self.b / (s * s)]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.d, self.a, self.b, self.delta, self.epsilon, self.gamma];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) && self.amplitude >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("tumour parameters must be positive: {self:?}")))
        }
    }
}

pub fn tumour_problem(params: &TumourParams) -> ProblemDefinition {
    ProblemDefinition {
        name: "tumour".into(),
        epsilon: params.epsilon,
        components: 2,
        diffusivity: vec![1.0, params.d],
        kinetics: Kinetics::ActivatorDepleted {
            gamma: params.gamma,
            a: params.a,
            b: params.b,
        },
        forcing: VelocityForcing::Linear(vec![params.delta, 0.0]),
        exact: None,
    }
}

/// Steady state plus independent uniform perturbations in
/// `[−amplitude, amplitude]` per node and component (blocked layout).
pub fn perturbed_steady_state(n_nodes: usize, params: &TumourParams) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let s = params.steady_state();
    let mut u = Vec::with_capacity(2 * n_nodes);
    for comp in s {
        for _ in 0..n_nodes {
            let p = if params.amplitude > 0.0 {
                rng.gen_range(-params.amplitude..=params.amplitude)
            } else {
                0.0
            };
            u.push(comp + p);
        }
    }
    u
}

/// End of the fixed-sphere pre-integration that produces tumour initial data.
pub const PRE_INTEGRATION_END: f64 = 5.0;

/// u at t = 5 from the reaction–diffusion system on the fixed unit sphere
/// `x`, started at the perturbed steady state. Uses `config.tau` and
/// `config.q`.
pub fn tumour_initial_data(
    space: &FeSpace,
    x: &PositionVector,
    params: &TumourParams,
    config: &SolverConfig,
) -> Result<NodalField> {
    params.validate()?;
    let n = x.n_nodes();
    for j in 0..n {
        let p = x.node3(j);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if (r - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidConfig(format!("node {j} is not on the unit sphere (|x| = {r})")));
        }
    }
    let problem = tumour_problem(params);
    let u0 = NodalField::from_vec(n, 2, perturbed_steady_state(n, params))?;
    let u = integrate_fixed_surface(space, &problem, x, &u0, 0.0, PRE_INTEGRATION_END, config.q, config)?;
    if u.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tumour pre-integration"));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_radius() {
        assert_eq!(exact_radius(0.0, 1.0, 2.0), 1.0);
        assert!((exact_radius(60.0, 1.0, 2.0) - 2.0).abs() < 1e-12);
        let r1 = exact_radius(1.0, 1.0, 2.0);
        assert!((r1 - 2.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((r1 - 1.462117).abs() < 1e-6);
    }

    #[test]
    fn radius_satisfies_logistic_ode() {
        let ex = ExactSolution::LogisticSphere { r0: 1.0, r1: 2.0 };
        let mut prev: Option<f64> = None;
        for k in 0..4 {
            let h = 1e-2 / 2f64.powi(k);
            let mut worst: f64 = 0.0;
            for i in 0..10 {
                let t = 0.1 * i as f64;
                let fd = (ex.radius(t + h) - ex.radius(t - h)) / (2.0 * h);
                worst = worst.max((fd - ex.radius_rate(t)).abs());
            }
            if let Some(p) = prev {
                let slope: f64 = (p / worst).log2();
                assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
            }
            prev = Some(worst);
        }
        assert!(prev.unwrap() < 1e-6);
    }

    #[test]
    fn exact_fields_on_sphere() {
        let ex = ExactSolution::LogisticSphere { r0: 1.0, r1: 2.0 };
        let t = 0.4;
        let r = ex.radius(t);
        let f = ex.fields([r, 0.0, 0.0], t).unwrap();
        assert_eq!(f.u, 0.0);
        assert_eq!(f.nu, [1.0, 0.0, 0.0]);
        assert!((f.h * r - 2.0).abs() < 1e-15);
        assert!((f.a2 - 2.0 / (r * r)).abs() < 1e-15);
        assert!(matches!(ex.fields([1.1 * r, 0.0, 0.0], t), Err(Error::OffSurface { .. })));
    }

    #[test]
    fn gradient_of_u_matches_surface_finite_differences() {
        // t = 0, R = 1, x = (1/√2, 1/√2, 0); differentiate along great circles
        let ex = ExactSolution::LogisticSphere { r0: 1.0, r1: 2.0 };
        let s = 0.5f64.sqrt();
        let x = [s, s, 0.0];
        let g = ex.u_gradient(x, 0.0);
        let tangents = [[-s, s, 0.0], [0.0, 0.0, 1.0]];
        let h = 1e-5;
        for tdir in tangents {
            let along = |a: f64| {
                let p = [
                    x[0] * a.cos() + tdir[0] * a.sin(),
                    x[1] * a.cos() + tdir[1] * a.sin(),
                    x[2] * a.cos() + tdir[2] * a.sin(),
                ];
                ex.fields(p, 0.0).unwrap().u
            };
            let fd = (along(h) - along(-h)) / (2.0 * h);
            let an = g[0] * tdir[0] + g[1] * tdir[1] + g[2] * tdir[2];
            assert!((fd - an).abs() < 1e-9);
        }
        // the gradient of x₁x₂ at this point is radial, so it projects to 0
        assert!(g.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn pure_mcf_has_no_sources() {
        let p = ProblemDefinition::pure_mcf_sphere(1.0, 1.0);
        let s = p.inhomogeneities([0.3, -0.2, 0.8], 0.05).unwrap();
        assert!(s.rho1.abs() < 1e-14 && s.rho4.abs() < 1e-12 && s.rho1_coupled.abs() < 1e-14);
        assert!(s.rho2.iter().chain(&s.rho3).all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn manufactured_rho1_and_rho2_closed_forms() {
        let p = ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::Linear(vec![1.0]));
        let ex = p.exact.unwrap();
        let t = 0.3;
        let r = ex.radius(t);
        let rate = ex.radius_rate(t);
        let x = ex.project([0.3, 0.5, -0.7], t);
        let u = ex.fields(x, t).unwrap().u;
        let s = p.inhomogeneities(x, t).unwrap();
        let rho1 = u * (2.0 * rate / r - 1.0) + 2.0 * u * rate / r + 6.0 * u / (r * r) - u * u;
        assert!((s.rho1 - rho1).abs() < 1e-14);
        let nu = ex.fields(x, t).unwrap().nu;
        for c in 0..3 {
            let expect = rate / r * x[c] + 2.0 / r * nu[c] - u * nu[c];
            assert!((s.rho2[c] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn sources_require_exact_solution() {
        let p = tumour_problem(&TumourParams::with_gamma(30.0));
        assert!(matches!(p.inhomogeneities([1.0, 0.0, 0.0], 0.0), Err(Error::NoExactSolution)));
        assert_eq!(p.sources([1.0, 0.0, 0.0], 0.0), Inhomogeneities::ZERO);
    }

    #[test]
    fn tumour_steady_state_and_forcing() {
        let params = TumourParams::with_gamma(30.0);
        let p = tumour_problem(&params);
        assert_eq!(p.components, 2);
        assert_eq!(p.diffusivity, vec![1.0, 10.0]);
        let ss = params.steady_state();
        let mut f = [0.0; 2];
        p.kinetics.eval(&ss, &[[0.0; 3]; 2], &mut f);
        assert!(f[0].abs() < 1e-13 && f[1].abs() < 1e-13);
        assert!((p.forcing.value(&ss) - 0.1).abs() < 1e-15);
        assert_eq!(p.kinetics.implicit_linear(2), vec![-30.0, 0.0]);
    }

    #[test]
    fn perturbation_is_seeded() {
        let mut params = TumourParams::with_gamma(30.0);
        params.seed = 42;
        let a = perturbed_steady_state(50, &params);
        assert_eq!(a, perturbed_steady_state(50, &params));
        let ss = params.steady_state();
        assert!(a[..50].iter().all(|v| (v - ss[0]).abs() <= 1e-2));
        params.amplitude = 0.0;
        let z = perturbed_steady_state(50, &params);
        assert!(z[..50].iter().all(|&v| v == ss[0]) && z[50..].iter().all(|&v| v == ss[1]));
    }

    fn unit_sphere(frequency: usize) -> (FeSpace, PositionVector) {
        let (mesh, x) = crate::surface_mesh::icosphere(frequency, 1.0, 2).unwrap();
        (FeSpace::new(mesh).unwrap(), x)
    }

    #[test]
    fn unperturbed_tumour_data_stays_steady() {
        let (space, x) = unit_sphere(2);
        let mut params = TumourParams::with_gamma(30.0);
        params.amplitude = 0.0;
        let config = SolverConfig { tau: 0.005, ..SolverConfig::default() };
        let u = tumour_initial_data(&space, &x, &params, &config).unwrap();
        let ss = params.steady_state();
        for c in 0..2 {
            assert!(u.component(c).iter().all(|v| (v - ss[c]).abs() < 1e-8));
        }
    }

    #[test]
    fn tumour_data_is_deterministic() {
        let (space, x) = unit_sphere(2);
        let params = TumourParams::with_gamma(30.0);
        let config = SolverConfig { tau: 0.005, ..SolverConfig::default() };
        let a = tumour_initial_data(&space, &x, &params, &config).unwrap();
        let b = tumour_initial_data(&space, &x, &params, &config).unwrap();
        assert_eq!(a, b);
        let scaled = PositionVector::from_vec(x.n_nodes(), 3, x.as_slice().iter().map(|c| 2.0 * c).collect()).unwrap();
        assert!(tumour_initial_data(&space, &scaled, &params, &config).is_err());
    }
}
