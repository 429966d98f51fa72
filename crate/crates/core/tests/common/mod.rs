//! Finite-difference residual oracle for the exact sphere solutions.
//!
//! Only the radius R(t), the scalar u on Γ(t) and the problem's F and g are
//! taken from the library. Normals, curvatures, velocities and all
//! derivatives are recomputed here by finite differences of radial
//! extensions, which are constant along normals, so ambient derivatives
//! restricted to Γ(t) are surface derivatives.

#![allow(dead_code)]

use forcedflow::problems::{ExactSolution, ProblemDefinition};

type V3 = [f64; 3];

// spatial steps are relative to the current radius
const H_SPACE: f64 = 1e-3;
const H_OUTER: f64 = 1e-2;
const H_TIME: f64 = 1e-3;

fn norm(x: V3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn shift(x: V3, axis: usize, s: f64) -> V3 {
    let mut y = x;
    y[axis] += s;
    y
}

/// Fourth-order central first derivative.
fn d1(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
fn d2(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

fn gradient(f: &dyn Fn(V3) -> f64, x: V3, h: f64) -> V3 {
    [0, 1, 2].map(|a| d1(|s| f(shift(x, a, s)), h))
}

fn laplacian(f: &dyn Fn(V3) -> f64, x: V3, h: f64) -> f64 {
    (0..3).map(|a| d2(|s| f(shift(x, a, s)), h)).sum()
}

/// Residuals of the four equations with the exact fields inserted.
#[derive(Clone, Copy, Debug)]
pub struct OracleResiduals {
    pub rho1: f64,
    pub rho1_coupled: f64,
    pub rho2: V3,
    pub rho3: V3,
    pub rho4: f64,
}

struct Oracle<'a> {
    exact: ExactSolution,
    problem: &'a ProblemDefinition,
}

impl Oracle<'_> {
    fn radius(&self, t: f64) -> f64 {
        self.exact.radius(t)
    }

    fn project(&self, y: V3, t: f64) -> V3 {
        let s = self.radius(t) / norm(y);
        y.map(|c| s * c)
    }

    /// u on Γ(t), extended constantly along rays.
    fn u(&self, y: V3, t: f64) -> f64 {
        self.exact.fields_extended(self.project(y, t), t).u
    }

    fn g(&self, y: V3, t: f64) -> f64 {
        self.problem.forcing.value(&[self.u(y, t)])
    }

    fn normal(&self, y: V3) -> V3 {
        let r = norm(y);
        y.map(|c| c / r)
    }

    /// ∇ν of the ray-constant normal extension.
    fn normal_jacobian(&self, x: V3) -> [[f64; 3]; 3] {
        let mut j = [[0.0; 3]; 3];
        let h = H_SPACE * norm(x);
        for (i, row) in j.iter_mut().enumerate() {
            *row = gradient(&|y| self.normal(y)[i], x, h);
        }
        j
    }

    /// Mean curvature at the projection of `y` onto Γ(t).
    fn mean_curvature(&self, y: V3, t: f64) -> f64 {
        let j = self.normal_jacobian(self.project(y, t));
        j[0][0] + j[1][1] + j[2][2]
    }

    /// Trajectory through x ∈ Γ(t) of the exact flow.
    fn trajectory(&self, x: V3, t: f64, s: f64) -> V3 {
        let p = x.map(|c| c * self.exact.initial_radius() / self.radius(t));
        self.exact.flow_map(p, s)
    }

    fn velocity(&self, x: V3, t: f64) -> V3 {
        [0, 1, 2].map(|i| d1(|s| self.trajectory(x, t, t + s)[i], H_TIME))
    }

    fn material<F: Fn(V3, f64) -> f64>(&self, f: F, x: V3, t: f64) -> f64 {
        d1(|s| f(self.trajectory(x, t, t + s), t + s), H_TIME)
    }

    fn residuals(&self, x: V3, t: f64) -> OracleResiduals {
        let p = self.problem;
        let eps = p.epsilon;
        let hs = H_SPACE * self.radius(t);
        let ho = H_OUTER * self.radius(t);
        let nu = self.normal(x);
        let ja = self.normal_jacobian(x);
        let h = ja[0][0] + ja[1][1] + ja[2][2];
        let a2: f64 = ja.iter().flatten().map(|v| v * v).sum();

        let u = self.u(x, t);
        let grad_u = gradient(&|y| self.u(y, t), x, hs);
        let lap_u = laplacian(&|y| self.u(y, t), x, ho);
        let dot_u = self.material(|y, s| self.u(y, s), x, t);
        let g = self.g(x, t);
        let grad_g = gradient(&|y| self.g(y, t), x, hs);
        let lap_g = laplacian(&|y| self.g(y, t), x, ho);

        let v = self.velocity(x, t);
        // surface divergence tr(P ∇v) of the ray-constant extension
        let jv: Vec<V3> = (0..3)
            .map(|i| gradient(&|y| self.velocity(self.project(y, t), t)[i], x, hs))
            .collect();
        let mut div_v = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                let pik = if i == k { 1.0 } else { 0.0 } - nu[i] * nu[k];
                div_v += pik * jv[k][i];
            }
        }

        let mut f = [0.0];
        p.kinetics.eval(&[u], &[grad_u], &mut f);
        let d = p.diffusivity[0];
        let normal_velocity = -eps * h + g;
        let rho1 = dot_u + u * div_v - d * lap_u - f[0];
        let rho1_coupled = dot_u + u * normal_velocity * h - d * lap_u - f[0];
        let rho2 = [0, 1, 2].map(|i| v[i] - normal_velocity * nu[i]);
        let rho3 = [0, 1, 2].map(|i| {
            let dot_nu = self.material(|y, _| self.normal(y)[i], x, t);
            let lap_nu = laplacian(&|y| self.normal(self.project(y, t))[i], x, ho);
            dot_nu - eps * lap_nu - eps * a2 * nu[i] + grad_g[i]
        });
        let dot_h = self.material(|y, s| self.mean_curvature(y, s), x, t);
        let lap_h = laplacian(&|y| self.mean_curvature(y, t), x, ho);
        let rho4 = dot_h - eps * lap_h - eps * a2 * h + lap_g + a2 * g;
        OracleResiduals {
            rho1,
            rho1_coupled,
            rho2,
            rho3,
            rho4,
        }
    }
}

/// Residuals at x ∈ Γ(t) of `problem`'s exact solution.
pub fn fd_residuals(problem: &ProblemDefinition, x: V3, t: f64) -> OracleResiduals {
    let exact = problem.exact.expect("problem with an exact solution");
    Oracle { exact, problem }.residuals(x, t)
}

/// Largest deviation between the oracle and the closed forms over
/// `samples` seeded random points in space-time with t in `[t0, t1]`.
pub fn max_residual_mismatch(problem: &ProblemDefinition, samples: usize, t0: f64, t1: f64, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let exact = problem.exact.expect("problem with an exact solution");
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = rng.gen_range(t0..t1);
        // uniform direction by rejection from the cube
        let dir = loop {
            let d: V3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = norm(d);
            if n > 0.1 && n <= 1.0 {
                break d.map(|c| c / n);
            }
        };
        let x = dir.map(|c| c * exact.radius(t));
        let oracle = fd_residuals(problem, x, t);
        let closed = problem.inhomogeneities(x, t).expect("point on the exact surface");
        let scale = |v: f64| v.abs().max(1.0);
        let mut check = |a: f64, b: f64| worst = worst.max((a - b).abs() / scale(b));
        check(oracle.rho1, closed.rho1);
        check(oracle.rho1_coupled, closed.rho1_coupled);
        check(oracle.rho4, closed.rho4);
        for i in 0..3 {
            check(oracle.rho2[i], closed.rho2[i]);
            check(oracle.rho3[i], closed.rho3[i]);
        }
    }
    worst
}
