//! Linearly implicit BDF time stepping of the coupled flow.
//!
//! Both schemes assemble everything on the extrapolated surface Γ_h[x̃ⁿ]:
//!
//! ```text
//! K(x̃ⁿ) vⁿ = g(x̃ⁿ, w̃ⁿ)
//! (δ0/τ M + s A)(x̃ⁿ) wⁿ = −(1/τ) M(x̃ⁿ) Σ_{j≥1} δ_j w^{n−j} + f(x̃ⁿ, w̃ⁿ)
//! xⁿ = (τ vⁿ − Σ_{j≥1} δ_j x^{n−j}) / δ0
//! ```
//!
//! with `s = ε` for the geometric blocks and the diffusivity for each u
//! component. The conservative variant replaces the u-block history by the
//! stored products `M(x̃^{n−j}) u^{n−j}` and uses the reaction load instead of
//! the coupled one.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::assembly::{k_matrix, FeSpace, GradientMode, KineticsPart, H_BLOCK, U_BLOCK};
use crate::bdf::{self, BdfScheme};
use crate::error::{Error, Result};
use crate::field::{NodalField, PositionVector};
use crate::problems::{ExactSolution, ProblemDefinition};
use crate::sparse::{LinearSolveReport, PcgSolver, SparseSymmetricMatrix};
use crate::surface_mesh::DEFAULT_DEGENERACY_TOLERANCE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeVariant {
    /// u-equation in the form with V H u on the right-hand side.
    Coupled,
    /// u-equation in the conservative form d/dt(M u).
    Conservative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub t_end: f64,
    pub q: usize,
    pub scheme: SchemeVariant,
    pub tol: f64,
    pub max_iter: usize,
    pub degeneracy_tolerance: f64,
    /// Keep every n-th step in the trajectory; 0 keeps only the final state.
    pub output_every: usize,
    pub gradient_mode: GradientMode,
    /// Take the starting values from the exact solution instead of the cascade.
    pub exact_start: bool,
    /// Fine substeps per coarse step in the startup cascade; `None` picks
    /// 2^(q+2).
    pub startup_substeps: Option<usize>,
    pub allow_order_six: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 1e-2,
            t_end: 1.0,
            q: 2,
            scheme: SchemeVariant::Coupled,
            tol: 1e-10,
            max_iter: 5000,
            degeneracy_tolerance: DEFAULT_DEGENERACY_TOLERANCE,
            output_every: 1,
            gradient_mode: GradientMode::InterpolateFirst,
            exact_start: false,
            startup_substeps: None,
            allow_order_six: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        BdfScheme::with_override(self.q, self.tau, self.allow_order_six)?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!("solver tolerance {} must lie in (0, 1)", self.tol)));
        }
        if self.startup_substeps == Some(0) {
            return Err(Error::InvalidConfig("startup_substeps must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.degeneracy_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("degeneracy tolerance must be non-negative".into()));
        }
        Ok(())
    }

    /// Number of steps from `t0` to `t_end`; the interval must be a whole
    /// number of steps.
    pub fn step_count(&self, t0: f64) -> Result<usize> {
        let span = self.t_end - t0;
        let n = (span / self.tau).round();
        if n < 1.0 || (n * self.tau - span).abs() > 1e-9 * span.abs().max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "interval [{t0}, {}] is not a positive multiple of tau = {}",
                self.t_end, self.tau
            )));
        }
        Ok(n as usize)
    }

    pub fn substeps(&self) -> usize {
        self.startup_substeps.unwrap_or(1 << (self.q + 2))
    }
}

/// One time level of the discrete solution.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: PositionVector,
    pub v: PositionVector,
    /// Blocks (ν, H, u).
    pub w: NodalField,
}

impl FlowState {
    pub fn nu(&self) -> NodalField {
        self.w.slice_components(0..3)
    }

    pub fn h(&self) -> &[f64] {
        self.w.component(H_BLOCK)
    }

    pub fn u(&self) -> NodalField {
        self.w.slice_components(U_BLOCK..self.w.dim())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

/// Past states, most recent first, and for the conservative scheme the
/// matching products `M(x̃^{n−j}) u^{n−j}`.
#[derive(Clone, Debug, Default)]
pub struct History {
    states: VecDeque<FlowState>,
    mass_u: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, state: FlowState, mass_u: Vec<f64>, capacity: usize) {
        self.states.push_front(state);
        self.mass_u.push_front(mass_u);
        self.states.truncate(capacity);
        self.mass_u.truncate(capacity);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn latest(&self) -> Option<&FlowState> {
        self.states.front()
    }

    /// `j = 0` is the most recent state.
    pub fn state(&self, j: usize) -> &FlowState {
        &self.states[j]
    }

    pub fn mass_u(&self, j: usize) -> &[f64] {
        &self.mass_u[j]
    }
}

/// Linear solver statistics of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub max_residual: f64,
    pub max_ritz_ratio: f64,
    /// Minimum Gram determinant on the extrapolated surface.
    pub min_gram_det: f64,
}

impl Default for StepReport {
    fn default() -> Self {
        Self {
            iterations: 0,
            max_residual: 0.0,
            max_ritz_ratio: 1.0,
            min_gram_det: f64::INFINITY,
        }
    }
}

impl StepReport {
    fn add_solve(&mut self, r: &LinearSolveReport) {
        self.iterations += r.iterations;
        self.max_residual = self.max_residual.max(r.relative_residual);
        self.max_ritz_ratio = self.max_ritz_ratio.max(r.ritz_ratio);
    }

    fn merge(&mut self, other: &StepReport) {
        self.iterations += other.iterations;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_ritz_ratio = self.max_ritz_ratio.max(other.max_ritz_ratio);
        self.min_gram_det = self.min_gram_det.min(other.min_gram_det);
    }
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: FlowState,
    /// `M(x̃ⁿ) uⁿ`
    pub mass_u: Vec<f64>,
    pub report: StepReport,
}

/// `(δ0/τ − L) M + s A`
fn block_matrix(
    mass: &SparseSymmetricMatrix,
    stiffness: &SparseSymmetricMatrix,
    delta0: f64,
    tau: f64,
    linear: f64,
    diffusion: f64,
) -> SparseSymmetricMatrix {
    mass.linear_combination(delta0 / tau - linear, stiffness, diffusion)
}

/// One step of either scheme from a history of at least `scheme.q` states.
pub fn step(
    space: &FeSpace,
    problem: &ProblemDefinition,
    scheme: &BdfScheme,
    history: &History,
    variant: SchemeVariant,
    config: &SolverConfig,
) -> Result<StepOutput> {
    let q = scheme.q;
    if history.len() < q {
        return Err(Error::InsufficientHistory {
            needed: q,
            got: history.len(),
        });
    }
    let n = space.n_nodes();
    let m = problem.components;
    let tau = scheme.tau;
    let past: Vec<&FlowState> = (0..q).map(|j| history.state(j)).collect();
    let t = past[0].t + tau;

    let xs: Vec<&[f64]> = past.iter().map(|s| s.x.as_slice()).collect();
    let ws: Vec<&[f64]> = past.iter().map(|s| s.w.as_slice()).collect();
    let vs: Vec<&[f64]> = past.iter().map(|s| s.v.as_slice()).collect();
    let x_tilde = PositionVector::from_vec(n, 3, bdf::extrapolate(&xs, &scheme.gamma)?)?;
    let w_tilde = NodalField::from_vec(n, U_BLOCK + m, bdf::extrapolate(&ws, &scheme.gamma)?)?;
    let v_guess = bdf::extrapolate(&vs, &scheme.gamma)?;

    let geo = space.geometry_with_tolerance(&x_tilde, config.degeneracy_tolerance)?;
    let mass = geo.mass_matrix();
    let stiffness = geo.stiffness_matrix();
    let mut report = StepReport {
        min_gram_det: geo.min_gram_det(),
        ..StepReport::default()
    };

    // velocity: three solves sharing one matrix and preconditioner
    let k = k_matrix(&mass, &stiffness);
    let g = geo.vec_g(problem, &w_tilde, t, config.gradient_mode)?;
    let k_solver = PcgSolver::new(&k, config.tol, config.max_iter)?;
    let v_parts = (0..3)
        .into_par_iter()
        .map(|c| k_solver.solve(&g[c * n..(c + 1) * n], Some(&v_guess[c * n..(c + 1) * n])))
        .collect::<Result<Vec<_>>>()?;
    let mut v = Vec::with_capacity(3 * n);
    for (part, r) in &v_parts {
        v.extend_from_slice(part);
        report.add_solve(r);
    }

    // right-hand sides of the (ν, H, u) blocks
    let f = geo.vec_f(problem, &w_tilde, t, KineticsPart::Explicit)?;
    let w_hist = scheme.history_sum(&ws)?;
    let mut rhs: Vec<f64> = mass
        .mul_lifted(&w_hist)
        .iter()
        .zip(&f)
        .map(|(mh, f)| -mh / tau + f)
        .collect();
    if variant == SchemeVariant::Conservative {
        let mus: Vec<&[f64]> = (0..q).map(|j| history.mass_u(j)).collect();
        let mu_hist = scheme.history_sum(&mus)?;
        let u_tilde = w_tilde.slice_components(U_BLOCK..U_BLOCK + m);
        let reaction = geo.vec_reaction(problem, &u_tilde, t, KineticsPart::Explicit)?;
        for (i, r) in rhs[U_BLOCK * n..].iter_mut().enumerate() {
            *r = -mu_hist[i] / tau + reaction[i];
        }
    }

    let delta0 = scheme.delta0();
    let linear = problem.kinetics.implicit_linear(m);
    let mut matrices = vec![block_matrix(&mass, &stiffness, delta0, tau, 0.0, problem.epsilon)];
    for i in 0..m {
        matrices.push(block_matrix(&mass, &stiffness, delta0, tau, linear[i], problem.diffusivity[i]));
    }
    let solvers = matrices
        .iter()
        .map(|mat| PcgSolver::new(mat, config.tol, config.max_iter))
        .collect::<Result<Vec<_>>>()?;
    let block_solver = |b: usize| if b < U_BLOCK { 0 } else { 1 + b - U_BLOCK };
    let w_parts = (0..U_BLOCK + m)
        .into_par_iter()
        .map(|b| {
            let range = b * n..(b + 1) * n;
            solvers[block_solver(b)].solve(&rhs[range.clone()], Some(&w_tilde.as_slice()[range]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = Vec::with_capacity((U_BLOCK + m) * n);
    for (part, r) in &w_parts {
        w.extend_from_slice(part);
        report.add_solve(r);
    }

    let x_hist = scheme.history_sum(&xs)?;
    let x: Vec<f64> = v.iter().zip(&x_hist).map(|(v, h)| (tau * v - h) / delta0).collect();

    let state = FlowState {
        t,
        x: PositionVector::from_vec(n, 3, x)?,
        v: PositionVector::from_vec(n, 3, v)?,
        w: NodalField::from_vec(n, U_BLOCK + m, w)?,
    };
    if !state.is_finite() {
        return Err(Error::NonFinite("flow state"));
    }
    let mass_u = mass.mul_lifted(&state.w.as_slice()[U_BLOCK * n..]);
    Ok(StepOutput { state, mass_u, report })
}

pub fn step_coupled(
    space: &FeSpace,
    problem: &ProblemDefinition,
    scheme: &BdfScheme,
    history: &History,
    config: &SolverConfig,
) -> Result<StepOutput> {
    step(space, problem, scheme, history, SchemeVariant::Coupled, config)
}

pub fn step_conservative(
    space: &FeSpace,
    problem: &ProblemDefinition,
    scheme: &BdfScheme,
    history: &History,
    config: &SolverConfig,
) -> Result<StepOutput> {
    step(space, problem, scheme, history, SchemeVariant::Conservative, config)
}

/// `M(x) u` for the u-blocks of a state.
pub fn mass_times_u(space: &FeSpace, state: &FlowState) -> Result<Vec<f64>> {
    let geo = space.geometry(&state.x)?;
    Ok(geo.mass_matrix().mul_lifted(&state.w.as_slice()[U_BLOCK * space.n_nodes()..]))
}

/// Nodes of the exact surface at time `t`, moved along the exact flow from
/// their positions `x0` at time `t0`.
pub fn exact_positions(exact: &ExactSolution, x0: &PositionVector, t0: f64, t: f64) -> PositionVector {
    let s = exact.radius(t) / exact.radius(t0);
    PositionVector::from_vec(x0.n_nodes(), 3, x0.as_slice().iter().map(|c| s * c).collect())
        .expect("same length")
}

/// Nodal interpolation of the exact solution at the nodes `x` of Γ(t).
pub fn exact_state(problem: &ProblemDefinition, x: &PositionVector, t: f64) -> Result<FlowState> {
    let exact = problem.exact.ok_or(Error::NoExactSolution)?;
    let n = x.n_nodes();
    let mut w = NodalField::zeros(n, U_BLOCK + problem.components);
    let mut v = PositionVector::zeros(n, 3);
    for j in 0..n {
        let f = exact.fields(x.node3(j), t)?;
        for l in 0..3 {
            w.component_mut(l)[j] = f.nu[l];
        }
        w.component_mut(H_BLOCK)[j] = f.h;
        w.component_mut(U_BLOCK)[j] = f.u;
        v.set_node3(j, f.v);
    }
    Ok(FlowState {
        t,
        x: x.clone(),
        v,
        w,
    })
}

/// Initial state on Γ_h[x0]: ν, H and u interpolated from the exact solution
/// when one is attached; otherwise `x0` must be a sphere about the origin,
/// ν = x/|x|, H = 2/|x|, and `u0` supplies u. The velocity solves
/// K(x0) v = g(x0, w0).
pub fn initial_state(
    space: &FeSpace,
    problem: &ProblemDefinition,
    x0: &PositionVector,
    t0: f64,
    u0: Option<&NodalField>,
    config: &SolverConfig,
) -> Result<FlowState> {
    let n = space.n_nodes();
    let m = problem.components;
    let mut state = match (problem.exact, u0) {
        (Some(_), None) => exact_state(problem, x0, t0)?,
        (_, Some(u0)) => {
            if u0.n_nodes() != n || u0.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: n * m,
                    got: u0.as_slice().len(),
                });
            }
            let w = NodalField::from_fn(n, U_BLOCK + m, |j| {
                let p = x0.node3(j);
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let mut row = vec![p[0] / r, p[1] / r, p[2] / r, 2.0 / r];
                row.extend((0..m).map(|i| u0.component(i)[j]));
                row
            });
            FlowState {
                t: t0,
                x: x0.clone(),
                v: PositionVector::zeros(n, 3),
                w,
            }
        }
        (None, None) => {
            return Err(Error::InvalidConfig(format!(
                "problem '{}' has no exact solution, initial u is required",
                problem.name
            )))
        }
    };
    let geo = space.geometry_with_tolerance(x0, config.degeneracy_tolerance)?;
    let k = k_matrix(&geo.mass_matrix(), &geo.stiffness_matrix());
    let g = geo.vec_g(problem, &state.w, t0, config.gradient_mode)?;
    let solver = PcgSolver::new(&k, config.tol, config.max_iter)?;
    let mut v = Vec::with_capacity(3 * n);
    for c in 0..3 {
        v.extend(solver.solve(&g[c * n..(c + 1) * n], Some(&state.v.as_slice()[c * n..(c + 1) * n]))?.0);
    }
    state.v = PositionVector::from_vec(n, 3, v)?;
    Ok(state)
}

/// Starting values at t0, t0 + τ, …, t0 + (q−1)τ, most recent first.
///
/// Without exact injection the interval [t0, t0 + (q−1)τ] is covered with
/// substeps τ/s (s from [`SolverConfig::substeps`]), raising the BDF order
/// by one per substep up to q. The first substeps are low order, so s must
/// be large enough for their error to stay below the coarse O(τ^q) error.
/// The stored mass products of starting states use x̃ⁱ := xⁱ.
pub fn startup_cascade(
    space: &FeSpace,
    problem: &ProblemDefinition,
    initial: &FlowState,
    config: &SolverConfig,
) -> Result<(History, Vec<StepReport>)> {
    let q = config.q;
    let tau = config.tau;
    let mut coarse = History::new();
    coarse.push(initial.clone(), mass_times_u(space, initial)?, q);
    let mut reports = Vec::new();
    if q == 1 {
        return Ok((coarse, reports));
    }
    if config.exact_start {
        let exact = problem.exact.ok_or(Error::NoExactSolution)?;
        for i in 1..q {
            let t = initial.t + i as f64 * tau;
            let x = exact_positions(&exact, &initial.x, initial.t, t);
            let state = exact_state(problem, &x, t)?;
            let mu = mass_times_u(space, &state)?;
            coarse.push(state, mu, q);
            reports.push(StepReport::default());
        }
        return Ok((coarse, reports));
    }
    let sub = config.substeps();
    let tau_f = tau / sub as f64;
    let mut fine = History::new();
    fine.push(initial.clone(), coarse.mass_u(0).to_vec(), q);
    let mut acc = StepReport::default();
    for s in 1..=(q - 1) * sub {
        let order = fine.len().min(q);
        let scheme = BdfScheme::with_override(order, tau_f, config.allow_order_six)?;
        let out = step(space, problem, &scheme, &fine, config.scheme, config)?;
        acc.merge(&out.report);
        if s % sub == 0 {
            let mu = mass_times_u(space, &out.state)?;
            coarse.push(out.state.clone(), mu, q);
            reports.push(acc);
            acc = StepReport::default();
        }
        fine.push(out.state, out.mass_u, q);
    }
    Ok((coarse, reports))
}

/// Per-step monitoring data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub iterations: usize,
    pub max_residual: f64,
    pub ritz_ratio: f64,
    /// Minimum Gram determinant on Γ_h[xⁿ].
    pub min_gram_det: f64,
    pub area: f64,
    pub max_abs_h: f64,
    pub max_abs_u: f64,
    /// max |(1/τ) Σ δ_j x^{n−j} − vⁿ|, zero while starting values are used.
    pub velocity_defect: f64,
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,t,iterations,max_residual,ritz_ratio,min_gram_det,area,max_abs_h,max_abs_u,velocity_defect";

impl StepDiagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{:e},{},{},{},{:e}",
            self.step,
            self.t,
            self.iterations,
            self.max_residual,
            self.ritz_ratio,
            self.min_gram_det,
            self.area,
            self.max_abs_h,
            self.max_abs_u,
            self.velocity_defect
        )
    }
}

pub fn write_diagnostics_csv(path: &Path, rows: &[StepDiagnostics]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn diagnose(
    space: &FeSpace,
    state: &FlowState,
    step: usize,
    report: &StepReport,
    velocity_defect: f64,
    config: &SolverConfig,
) -> Result<StepDiagnostics> {
    let geo = space.geometry_with_tolerance(&state.x, config.degeneracy_tolerance)?;
    let max_abs = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(StepDiagnostics {
        step,
        t: state.t,
        iterations: report.iterations,
        max_residual: report.max_residual,
        ritz_ratio: report.max_ritz_ratio,
        min_gram_det: geo.min_gram_det(),
        area: geo.area(),
        max_abs_h: max_abs(state.h()),
        max_abs_u: max_abs(&state.w.as_slice()[U_BLOCK * space.n_nodes()..]),
        velocity_defect,
    })
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// States at the output cadence; the final state is always included.
    pub outputs: Vec<FlowState>,
    /// One row per step, starting with the initial state.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn final_state(&self) -> &FlowState {
        self.outputs.last().expect("at least one output")
    }
}

pub fn run(
    space: &FeSpace,
    problem: &ProblemDefinition,
    initial: FlowState,
    config: &SolverConfig,
) -> Result<Trajectory> {
    run_observed(space, problem, initial, config, |_, _| Ok(()))
}

/// Runs from `initial` to `config.t_end`, calling `observer` on every state
/// (including the initial one). Failures after the initial state are wrapped
/// in [`Error::Aborted`] carrying the last good state.
pub fn run_observed<O>(
    space: &FeSpace,
    problem: &ProblemDefinition,
    initial: FlowState,
    config: &SolverConfig,
    mut observer: O,
) -> Result<Trajectory>
where
    O: FnMut(&FlowState, &StepDiagnostics) -> Result<()>,
{
    config.validate()?;
    let n_steps = config.step_count(initial.t)?;
    let q = config.q;
    let scheme = BdfScheme::with_override(q, config.tau, config.allow_order_six)?;

    let d0 = diagnose(space, &initial, 0, &StepReport::default(), 0.0, config)?;
    observer(&initial, &d0)?;
    let mut diagnostics = vec![d0];
    let mut outputs = Vec::new();
    let keep = |n: usize| n == n_steps || (config.output_every > 0 && n % config.output_every == 0);

    let abort = |t: f64, last: &FlowState, e: Error| Error::Aborted {
        t,
        last_good: Box::new(last.clone()),
        source: Box::new(e),
    };

    let (mut history, reports) = startup_cascade(space, problem, &initial, config)
        .map_err(|e| abort(initial.t + config.tau, &initial, e))?;
    // history holds states q−1, …, 0; report them in time order
    for i in 1..history.len() {
        if i > n_steps {
            break;
        }
        let state = history.state(history.len() - 1 - i);
        let d = diagnose(space, state, i, &reports[i - 1], 0.0, config)
            .map_err(|e| abort(state.t, history.state(history.len() - i), e))?;
        observer(state, &d)?;
        diagnostics.push(d);
        if keep(i) {
            outputs.push(state.clone());
        }
    }

    for n in q..=n_steps {
        let last = history.latest().expect("non-empty history");
        let t = last.t + config.tau;
        let out = step(space, problem, &scheme, &history, config.scheme, config).map_err(|e| abort(t, last, e))?;
        let xs: Vec<&[f64]> = std::iter::once(out.state.x.as_slice())
            .chain((0..q).map(|j| history.state(j).x.as_slice()))
            .collect();
        let dx = bdf::discrete_derivative(&xs, &scheme.delta, config.tau)?;
        let defect = dx.iter().zip(out.state.v.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let d = diagnose(space, &out.state, n, &out.report, defect, config).map_err(|e| abort(t, last, e))?;
        observer(&out.state, &d)?;
        diagnostics.push(d);
        if keep(n) {
            outputs.push(out.state.clone());
        }
        history.push(out.state, out.mass_u, q);
    }
    Ok(Trajectory { outputs, diagnostics })
}

/// Integrates the reaction–diffusion part alone on the fixed surface `x`
/// with the conservative u-scheme, ramping the BDF order from 1 to `q`.
pub fn integrate_fixed_surface(
    space: &FeSpace,
    problem: &ProblemDefinition,
    x: &PositionVector,
    u0: &NodalField,
    t0: f64,
    t1: f64,
    q: usize,
    config: &SolverConfig,
) -> Result<NodalField> {
    let n = space.n_nodes();
    let m = problem.components;
    let steps_config = SolverConfig {
        t_end: t1,
        ..config.clone()
    };
    let n_steps = steps_config.step_count(t0)?;
    let tau = config.tau;
    let geo = space.geometry(x)?;
    let mass = geo.mass_matrix();
    let stiffness = geo.stiffness_matrix();
    let linear = problem.kinetics.implicit_linear(m);

    let mut schemes = Vec::new();
    let mut matrices: Vec<Vec<SparseSymmetricMatrix>> = Vec::new();
    for order in 1..=q {
        let s = BdfScheme::with_override(order, tau, config.allow_order_six)?;
        matrices.push(
            (0..m)
                .map(|i| block_matrix(&mass, &stiffness, s.delta0(), tau, linear[i], problem.diffusivity[i]))
                .collect(),
        );
        schemes.push(s);
    }

    let mut past: VecDeque<Vec<f64>> = VecDeque::from([u0.as_slice().to_vec()]);
    let mut t = t0;
    for _ in 0..n_steps {
        let order = past.len().min(q);
        let scheme = &schemes[order - 1];
        t += tau;
        let refs: Vec<&[f64]> = past.iter().take(order).map(|u| u.as_slice()).collect();
        let u_tilde = NodalField::from_vec(n, m, bdf::extrapolate(&refs, &scheme.gamma)?)?;
        let reaction = geo.vec_reaction(problem, &u_tilde, t, KineticsPart::Explicit)?;
        let hist = mass.mul_lifted(&scheme.history_sum(&refs)?);
        let parts = (0..m)
            .into_par_iter()
            .map(|i| {
                let range = i * n..(i + 1) * n;
                let rhs: Vec<f64> = hist[range.clone()]
                    .iter()
                    .zip(&reaction[range.clone()])
                    .map(|(h, r)| -h / tau + r)
                    .collect();
                let solver = PcgSolver::new(&matrices[order - 1][i], config.tol, config.max_iter)?;
                Ok(solver.solve(&rhs, Some(&u_tilde.as_slice()[range]))?.0)
            })
            .collect::<Result<Vec<_>>>()?;
        let u: Vec<f64> = parts.concat();
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("fixed-surface reaction-diffusion"));
        }
        past.push_front(u);
        past.truncate(q);
    }
    NodalField::from_vec(n, m, past.pop_front().expect("non-empty"))
}
