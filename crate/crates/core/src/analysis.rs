//! Errors against exact solutions, experimental orders of convergence and
//! the convergence-study driver.
//!
//! Two error measures are available. The lifted measure integrates the
//! difference to the exact fields, composed with the radial projection onto
//! the exact sphere, over the computed surface. The interpolated measure
//! compares nodal values on Γ_h[x*], where `x*` are the mesh nodes moved by
//! the exact flow: `sqrt(eᵀ(M(x*) + A(x*))e)`. On spheres the interpolated
//! measure superconverges and hides the O(h²) interpolation error of u.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{k_matrix, FeSpace, H_BLOCK, U_BLOCK};
use crate::error::{Error, Result};
use crate::field::{NodalField, PositionVector};
use crate::flow_solver::{exact_positions, exact_state, initial_state, run_observed, FlowState, SolverConfig};
use crate::problems::{ExactSolution, ProblemDefinition};
use crate::sparse::SparseSymmetricMatrix;
use crate::surface_mesh::{icosphere, mesh_width};

/// Variables reported by the error measures, in this order.
pub const VARIABLES: [&str; 5] = ["x", "v", "nu", "H", "u"];

/// `sqrt(Σ_c e_cᵀ K e_c)` over the `len / n` stacked components.
fn k_norm(k: &SparseSymmetricMatrix, e: &[f64]) -> f64 {
    let n = k.n();
    e.chunks_exact(n).map(|c| k.quadratic_form(c)).sum::<f64>().max(0.0).sqrt()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// H¹ norm on Γ_h[x*] of the difference of two nodal vectors with any
/// number of stacked components.
pub fn h1_error(space: &FeSpace, field_h: &[f64], exact: &[f64], x_star: &PositionVector) -> Result<f64> {
    check_len(field_h.len(), exact.len())?;
    if field_h.len() % space.n_nodes() != 0 {
        return Err(Error::DimensionMismatch {
            expected: space.n_nodes(),
            got: field_h.len(),
        });
    }
    let geo = space.geometry(x_star)?;
    let k = k_matrix(&geo.mass_matrix(), &geo.stiffness_matrix());
    let e: Vec<f64> = field_h.iter().zip(exact).map(|(a, b)| a - b).collect();
    Ok(k_norm(&k, &e))
}

pub fn position_error(space: &FeSpace, x: &PositionVector, x_star: &PositionVector) -> Result<f64> {
    check_len(x_star.as_slice().len(), x.as_slice().len())?;
    h1_error(space, x.as_slice(), x_star.as_slice(), x_star)
}

/// Errors of one state in the order of [`VARIABLES`]; `x0` are the node
/// positions at time `t0` from which the exact flow is followed.
pub fn state_errors(
    space: &FeSpace,
    problem: &ProblemDefinition,
    state: &FlowState,
    x0: &PositionVector,
    t0: f64,
) -> Result<[f64; 5]> {
    let exact = problem.exact.ok_or(Error::NoExactSolution)?;
    let x_star = exact_positions(&exact, x0, t0, state.t);
    let reference = exact_state(problem, &x_star, state.t)?;
    let geo = space.geometry(&x_star)?;
    let k = k_matrix(&geo.mass_matrix(), &geo.stiffness_matrix());
    let n = space.n_nodes();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a - b).collect() };
    let w = state.w.as_slice();
    let we = reference.w.as_slice();
    Ok([
        k_norm(&k, &diff(state.x.as_slice(), x_star.as_slice())),
        k_norm(&k, &diff(state.v.as_slice(), reference.v.as_slice())),
        k_norm(&k, &diff(&w[..3 * n], &we[..3 * n])),
        k_norm(&k, &diff(&w[H_BLOCK * n..U_BLOCK * n], &we[H_BLOCK * n..U_BLOCK * n])),
        k_norm(&k, &diff(&w[U_BLOCK * n..], &we[U_BLOCK * n..])),
    ])
}

fn project_tangent(p: [f64; 3], n: [f64; 3]) -> [f64; 3] {
    let d = p[0] * n[0] + p[1] * n[1] + p[2] * n[2];
    [p[0] - d * n[0], p[1] - d * n[1], p[2] - d * n[2]]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / l, v[1] / l, v[2] / l]
}

/// Errors against the exact fields composed with the radial projection π
/// onto the exact sphere, integrated over the computed surface Γ_h[x].
///
/// On Γ_h the gradient of f∘π is `P_h (R/|y|) P_ŷ ∇_Γ f(π(y))`.
pub fn lifted_errors(space: &FeSpace, problem: &ProblemDefinition, state: &FlowState) -> Result<[f64; 5]> {
    let exact = problem.exact.ok_or(Error::NoExactSolution)?;
    let geo = space.geometry(&state.x)?;
    let t = state.t;
    let r = exact.radius(t);
    let rate = exact.radius_rate(t);
    let n = space.n_nodes();
    let ne = space.mesh().n_elements();
    let nq = space.rule().len();
    let per_element: Vec<[f64; 5]> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let frame = geo.frame(e);
            let mut acc = [0.0; 5];
            for q in 0..nq {
                let wq = geo.weight(e, q);
                let y = frame.points[q];
                let nh = unit(frame.normal(q));
                let yhat = unit(y);
                let ylen = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                let lift_grad = |g: [f64; 3]| {
                    let s = r / ylen;
                    let t1 = project_tangent(g, yhat);
                    project_tangent([s * t1[0], s * t1[1], s * t1[2]], nh)
                };
                let f = exact.fields_extended(y, t);
                let py = exact.project(y, t);
                let grad_u = exact.u_gradient(y, t);
                let add = |acc: &mut f64, vh: f64, gh: [f64; 3], ve: f64, ge: [f64; 3]| {
                    let d = [gh[0] - ge[0], gh[1] - ge[1], gh[2] - ge[2]];
                    *acc += wq * ((vh - ve).powi(2) + d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
                };
                for l in 0..3 {
                    let mut el = [0.0; 3];
                    el[l] = 1.0;
                    // the identity on Γ_h has tangential gradient P_h e_ℓ
                    let (xh, gx) = geo.eval(e, q, &state.x.as_slice()[l * n..(l + 1) * n]);
                    add(&mut acc[0], xh, gx, py[l], lift_grad(el));
                    let (vh, gv) = geo.eval(e, q, &state.v.as_slice()[l * n..(l + 1) * n]);
                    let ge = lift_grad([rate / r * el[0], rate / r * el[1], rate / r * el[2]]);
                    add(&mut acc[1], vh, gv, f.v[l], ge);
                    let (nuh, gnu) = geo.eval(e, q, state.w.component(l));
                    let ge = lift_grad([el[0] / r, el[1] / r, el[2] / r]);
                    add(&mut acc[2], nuh, gnu, f.nu[l], ge);
                }
                let (hh, gh) = geo.eval(e, q, state.w.component(H_BLOCK));
                add(&mut acc[3], hh, gh, f.h, [0.0; 3]);
                let (uh, gu) = geo.eval(e, q, state.w.component(U_BLOCK));
                add(&mut acc[4], uh, gu, f.u, lift_grad(grad_u));
            }
            acc
        })
        .collect();
    let mut total = [0.0; 5];
    for a in &per_element {
        for i in 0..5 {
            total[i] += a[i];
        }
    }
    Ok(total.map(f64::sqrt))
}

/// Experimental order between two consecutive parameter values.
pub fn eoc(e_prev: f64, e_cur: f64, p_prev: f64, p_cur: f64) -> f64 {
    (e_prev / e_cur).ln() / (p_prev / p_cur).ln()
}

/// Which error measure a convergence study tracks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorMeasure {
    /// Nodal differences on Γ_h[x*]; superconvergent on spheres.
    Interpolated,
    /// Exact fields lifted to the computed surface, see [`lifted_errors`].
    #[default]
    Lifted,
}

impl ErrorMeasure {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMeasure::Interpolated => "interpolated",
            ErrorMeasure::Lifted => "lifted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interpolated" => Some(ErrorMeasure::Interpolated),
            "lifted" => Some(ErrorMeasure::Lifted),
            _ => None,
        }
    }
}

/// Outcome of one (h, τ) run.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub frequency: usize,
    pub h: f64,
    pub tau: f64,
    /// max over all steps of the errors, in the order of [`VARIABLES`].
    pub max_errors: Option<[f64; 5]>,
    pub final_errors: Option<[f64; 5]>,
    pub failure: Option<String>,
    pub seconds: f64,
}

/// One manufactured run on the icosphere of the given frequency, with
/// errors tracked at every step.
pub fn run_cell(
    problem: &ProblemDefinition,
    frequency: usize,
    degree: usize,
    tau: f64,
    template: &SolverConfig,
    measure: ErrorMeasure,
) -> CellResult {
    let start = Instant::now();
    let mut result = CellResult {
        frequency,
        h: f64::NAN,
        tau,
        max_errors: None,
        final_errors: None,
        failure: None,
        seconds: 0.0,
    };
    let outcome = (|| -> Result<([f64; 5], [f64; 5], f64)> {
        let exact: ExactSolution = problem.exact.ok_or(Error::NoExactSolution)?;
        let (mesh, x0) = icosphere(frequency, exact.radius(0.0), degree)?;
        let h = mesh_width(&mesh, &x0);
        let mut space = FeSpace::new(mesh)?;
        space.set_degeneracy_tolerance(template.degeneracy_tolerance);
        let config = SolverConfig {
            tau,
            output_every: 0,
            ..template.clone()
        };
        let init = initial_state(&space, problem, &x0, 0.0, None, &config)?;
        let mut max = [0.0f64; 5];
        let mut last = [0.0; 5];
        run_observed(&space, problem, init, &config, |state, _| {
            last = match measure {
                ErrorMeasure::Interpolated => state_errors(&space, problem, state, &x0, 0.0)?,
                ErrorMeasure::Lifted => lifted_errors(&space, problem, state)?,
            };
            for i in 0..5 {
                max[i] = max[i].max(last[i]);
            }
            Ok(())
        })?;
        Ok((max, last, h))
    })();
    match outcome {
        Ok((max, last, h)) => {
            result.max_errors = Some(max);
            result.final_errors = Some(last);
            result.h = h;
        }
        Err(e) => result.failure = Some(e.to_string()),
    }
    result.seconds = start.elapsed().as_secs_f64();
    result
}

/// Runs every (frequency, τ) pair of the grid. Cells run concurrently; the
/// result order is frequency-major and independent of scheduling.
pub fn convergence_study(
    problem: &ProblemDefinition,
    frequencies: &[usize],
    taus: &[f64],
    degree: usize,
    template: &SolverConfig,
    measure: ErrorMeasure,
) -> Vec<CellResult> {
    let cells: Vec<(usize, f64)> = frequencies
        .iter()
        .flat_map(|&f| taus.iter().map(move |&t| (f, t)))
        .collect();
    run_cells(problem, &cells, degree, template, measure)
}

pub fn run_cells(
    problem: &ProblemDefinition,
    cells: &[(usize, f64)],
    degree: usize,
    template: &SolverConfig,
    measure: ErrorMeasure,
) -> Vec<CellResult> {
    cells
        .par_iter()
        .map(|&(f, t)| run_cell(problem, f, degree, t, template, measure))
        .collect()
}

/// A temporal sweep over `taus` on the finest frequency plus a spatial
/// sweep over `frequencies` at `spatial_tau`. The cell (finest, spatial_tau)
/// is shared and doubles as the spatial error floor of the temporal sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub frequencies: Vec<usize>,
    pub taus: Vec<f64>,
    pub spatial_tau: f64,
}

/// A pair is counted as pre-flattening while its finer error is at least
/// this multiple of the error floor set by the other parameter.
pub const FLATTENING_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SlopePair {
    pub coarse: f64,
    pub fine: f64,
    pub eoc: f64,
    pub pre_flattening: bool,
}

/// EOCs of both sweeps per variable, in the order of [`VARIABLES`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSlopes {
    pub temporal: Vec<Vec<SlopePair>>,
    pub spatial: Vec<Vec<SlopePair>>,
    pub temporal_floor: [f64; 5],
    pub spatial_floor: [f64; 5],
}

impl SweepSlopes {
    /// Whether every pre-flattening pair lies in `[lo, hi]`; false when no
    /// pair is pre-flattening.
    pub fn within(pairs: &[SlopePair], lo: f64, hi: f64) -> bool {
        let mut any = false;
        for p in pairs.iter().filter(|p| p.pre_flattening) {
            any = true;
            if !(p.eoc >= lo && p.eoc <= hi) {
                return false;
            }
        }
        any
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,variable,coarse,fine,eoc,pre_flattening\n");
        for (name, sweep) in [("tau", &self.temporal), ("h", &self.spatial)] {
            for (i, pairs) in sweep.iter().enumerate() {
                for p in pairs {
                    s.push_str(&format!(
                        "{name},{},{:e},{:e},{:.6},{}\n",
                        VARIABLES[i], p.coarse, p.fine, p.eoc, p.pre_flattening
                    ));
                }
            }
        }
        s
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() || self.taus.is_empty() {
            return Err(Error::InvalidConfig("a sweep needs at least one frequency and one tau".into()));
        }
        if self.frequencies.contains(&0) || !self.taus.iter().chain([&self.spatial_tau]).all(|t| *t > 0.0) {
            return Err(Error::InvalidConfig("sweep frequencies and step sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn finest_frequency(&self) -> usize {
        self.frequencies.iter().copied().max().unwrap_or(0)
    }

    /// Distinct cells, temporal sweep first.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        let fine = self.finest_frequency();
        let mut cells: Vec<(usize, f64)> = self.taus.iter().map(|&t| (fine, t)).collect();
        for &f in &self.frequencies {
            if !cells.contains(&(f, self.spatial_tau)) {
                cells.push((f, self.spatial_tau));
            }
        }
        cells
    }

    pub fn run(
        &self,
        problem: &ProblemDefinition,
        degree: usize,
        template: &SolverConfig,
        measure: ErrorMeasure,
    ) -> Result<Vec<CellResult>> {
        self.validate()?;
        Ok(run_cells(problem, &self.cells(), degree, template, measure))
    }

    /// Slopes of both sweeps from L∞-in-time errors. The temporal floor at
    /// `spatial_tau` is extrapolated from the smallest sweep τ with order
    /// `q`; it still contains the spatial error of the finest mesh, so it
    /// errs on the side of marking pairs as flattened.
    pub fn slopes(&self, cells: &[CellResult], q: usize) -> Result<SweepSlopes> {
        let find = |f: usize, t: f64| -> Result<&CellResult> {
            let c = cells
                .iter()
                .find(|c| c.frequency == f && c.tau == t)
                .ok_or_else(|| Error::InvalidConfig(format!("missing cell frequency={f} tau={t}")))?;
            if let Some(msg) = &c.failure {
                return Err(Error::InvalidConfig(format!("cell frequency={f} tau={t} failed: {msg}")));
            }
            Ok(c)
        };
        let fine = self.finest_frequency();
        let spatial_floor = find(fine, self.spatial_tau)?.max_errors.unwrap_or([f64::NAN; 5]);
        let tau_min = self.taus.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = (self.spatial_tau / tau_min).powi(q as i32);
        let temporal_floor = find(fine, tau_min)?.max_errors.unwrap_or([f64::NAN; 5]).map(|e| e * scale);

        let mut taus = self.taus.clone();
        taus.sort_by(|a, b| b.total_cmp(a));
        let mut freqs = self.frequencies.clone();
        freqs.sort_unstable();
        freqs.dedup();
        let temporal_cells = taus.iter().map(|&t| find(fine, t)).collect::<Result<Vec<_>>>()?;
        let spatial_cells = freqs.iter().map(|&f| find(f, self.spatial_tau)).collect::<Result<Vec<_>>>()?;

        let pairs = |cs: &[&CellResult], param: &dyn Fn(&CellResult) -> f64, floor: &[f64; 5]| {
            (0..5)
                .map(|i| {
                    cs.windows(2)
                        .map(|w| {
                            let (a, b) = (w[0].max_errors.unwrap()[i], w[1].max_errors.unwrap()[i]);
                            SlopePair {
                                coarse: param(w[0]),
                                fine: param(w[1]),
                                eoc: eoc(a, b, param(w[0]), param(w[1])),
                                pre_flattening: b >= FLATTENING_FACTOR * floor[i],
                            }
                        })
                        .collect()
                })
                .collect()
        };
        Ok(SweepSlopes {
            temporal: pairs(&temporal_cells, &|c| c.tau, &spatial_floor),
            spatial: pairs(&spatial_cells, &|c| c.h, &temporal_floor),
            temporal_floor,
            spatial_floor,
        })
    }
}

/// Per-cell summary without timings, so that repeated studies compare
/// byte for byte.
pub fn cells_to_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("frequency,h,tau");
    for v in VARIABLES {
        s.push_str(&format!(",max_{v}"));
    }
    for v in VARIABLES {
        s.push_str(&format!(",final_{v}"));
    }
    s.push_str(",failure\n");
    for c in cells {
        s.push_str(&format!("{},{:.6e},{:e}", c.frequency, c.h, c.tau));
        for e in [c.max_errors, c.final_errors] {
            for i in 0..5 {
                match e {
                    Some(e) => s.push_str(&format!(",{:.6e}", e[i])),
                    None => s.push(','),
                }
            }
        }
        let msg = c.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        s.push_str(&format!(",{msg}\n"));
    }
    s
}

/// One row of the long-format table.
#[derive(Clone, Debug, PartialEq)]
pub struct EocRow {
    pub h: f64,
    pub tau: f64,
    pub variable: &'static str,
    pub error: f64,
    /// Against the next larger τ at the same h.
    pub eoc_tau: Option<f64>,
    /// Against the next larger h at the same τ.
    pub eoc_h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
    /// Cells that failed, as (frequency, τ, message).
    pub failures: Vec<(usize, f64, String)>,
}

impl EocTable {
    /// Builds the table from L∞-in-time errors of a study.
    pub fn from_cells(cells: &[CellResult]) -> Self {
        let mut table = EocTable::default();
        let ok: Vec<&CellResult> = cells.iter().filter(|c| c.max_errors.is_some()).collect();
        for c in cells.iter().filter(|c| c.failure.is_some()) {
            table.failures.push((c.frequency, c.tau, c.failure.clone().unwrap_or_default()));
        }
        for c in &ok {
            let errors = c.max_errors.unwrap();
            // nearest coarser neighbours in each direction
            let coarser_tau = ok
                .iter()
                .filter(|o| o.frequency == c.frequency && o.tau > c.tau)
                .min_by(|a, b| a.tau.total_cmp(&b.tau));
            let coarser_h = ok
                .iter()
                .filter(|o| o.tau == c.tau && o.frequency < c.frequency)
                .max_by_key(|o| o.frequency);
            for (i, variable) in VARIABLES.iter().enumerate() {
                table.rows.push(EocRow {
                    h: c.h,
                    tau: c.tau,
                    variable,
                    error: errors[i],
                    eoc_tau: coarser_tau.map(|o| eoc(o.max_errors.unwrap()[i], errors[i], o.tau, c.tau)),
                    eoc_h: coarser_h.map(|o| eoc(o.max_errors.unwrap()[i], errors[i], o.h, c.h)),
                });
            }
        }
        table
    }

    /// EOCs along τ at the given h, in order of decreasing τ.
    pub fn temporal_eocs(&self, h: f64, variable: &str) -> Vec<f64> {
        let mut rows: Vec<&EocRow> = self.rows.iter().filter(|r| r.h == h && r.variable == variable).collect();
        rows.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        rows.iter().filter_map(|r| r.eoc_tau).collect()
    }

    /// EOCs along h at the given τ, in order of decreasing h.
    pub fn spatial_eocs(&self, tau: f64, variable: &str) -> Vec<f64> {
        let mut rows: Vec<&EocRow> = self.rows.iter().filter(|r| r.tau == tau && r.variable == variable).collect();
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        rows.iter().filter_map(|r| r.eoc_h).collect()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from("h,tau,variable,error,eoc_tau,eoc_h\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6e},{:e},{},{:.6e},{},{}\n",
                r.h,
                r.tau,
                r.variable,
                r.error,
                opt(r.eoc_tau),
                opt(r.eoc_h)
            ));
        }
        for (f, tau, msg) in &self.failures {
            s.push_str(&format!("# failed cell frequency={f} tau={tau:e}: {msg}\n"));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(self.to_csv().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

/// Mean distance of the nodes from the origin.
pub fn mean_radius(x: &PositionVector) -> f64 {
    let n = x.n_nodes();
    (0..n)
        .map(|j| {
            let p = x.node3(j);
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
        })
        .sum::<f64>()
        / n as f64
}

/// Nodal field of the errors of `state`, for visual inspection.
pub fn nodal_u_error(problem: &ProblemDefinition, state: &FlowState, x_star: &PositionVector) -> Result<NodalField> {
    let reference = exact_state(problem, x_star, state.t)?;
    let n = state.x.n_nodes();
    let u = state.w.component(U_BLOCK);
    let ue = reference.w.component(U_BLOCK);
    NodalField::from_vec(n, 1, u.iter().zip(ue).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::VelocityForcing;
    use crate::surface_mesh::SurfaceMesh;

    fn manufactured() -> ProblemDefinition {
        ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::Linear(vec![1.0]))
    }

    #[test]
    fn interpolant_has_zero_error() {
        let p = manufactured();
        let (mesh, x0) = icosphere(3, 1.0, 2).unwrap();
        let space = FeSpace::new(mesh).unwrap();
        let ex = p.exact.unwrap();
        let x = exact_positions(&ex, &x0, 0.0, 0.4);
        let s = exact_state(&p, &x, 0.4).unwrap();
        let e = state_errors(&space, &p, &s, &x0, 0.0).unwrap();
        assert!(e.iter().all(|v| *v < 1e-13), "{e:?}");
    }

    #[test]
    fn constant_offset_norm() {
        // two copies of a unit right triangle glued into a closed pillow of area 1
        let mesh = SurfaceMesh::new(3, 1, vec![0, 1, 2, 0, 2, 1]).unwrap();
        let x = PositionVector::from_fn(3, 3, |j| match j {
            0 => vec![0.0, 0.0, 0.0],
            1 => vec![1.0, 0.0, 0.0],
            _ => vec![0.0, 1.0, 0.0],
        });
        let space = FeSpace::new(mesh).unwrap();
        let c = 0.3;
        let e = h1_error(&space, &[c; 3], &[0.0; 3], &x).unwrap();
        assert!((e - c).abs() < 1e-14);
        let shifted = PositionVector::from_fn(3, 3, |j| {
            let p = x.node3(j);
            vec![p[0] + c, p[1], p[2]]
        });
        let e = position_error(&space, &shifted, &x).unwrap();
        assert!((e - c).abs() < 1e-14);
        assert_eq!(position_error(&space, &x, &x).unwrap(), 0.0);
        assert!(h1_error(&space, &[0.0; 2], &[0.0; 3], &x).is_err());
    }

    #[test]
    fn norm_is_rotation_invariant() {
        let (mesh, x) = icosphere(3, 1.0, 2).unwrap();
        let space = FeSpace::new(mesh).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let rot = |p: [f64; 3]| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
        let xr = PositionVector::from_fn(x.n_nodes(), 3, |j| rot(x.node3(j)).to_vec());
        let f = |p: [f64; 3]| p[0] * p[2] + 0.2 * p[1];
        let fh: Vec<f64> = (0..x.n_nodes()).map(|j| f(x.node3(j))).collect();
        let zero = vec![0.0; x.n_nodes()];
        // the rotated field is f ∘ R⁻¹ at the rotated nodes: same nodal values
        let a = h1_error(&space, &fh, &zero, &x).unwrap();
        let b = h1_error(&space, &fh, &zero, &xr).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn eoc_on_synthetic_table() {
        assert!((eoc(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-15);
        let mk = |f: usize, h: f64, tau: f64, e: f64| CellResult {
            frequency: f,
            h,
            tau,
            max_errors: Some([e; 5]),
            final_errors: Some([e; 5]),
            failure: None,
            seconds: 0.0,
        };
        // e = h² + τ² with h-ratio 1/√2
        let h = [0.5, 0.5 / 2f64.sqrt()];
        let taus = [0.2, 0.1, 0.05];
        let mut cells = Vec::new();
        for (i, &hh) in h.iter().enumerate() {
            for &t in &taus {
                cells.push(mk(i + 2, hh, t, hh * hh + t * t));
            }
        }
        let table = EocTable::from_cells(&cells);
        let et = table.temporal_eocs(h[0], "u");
        let expect = |a: f64, b: f64, pa: f64, pb: f64| (a / b).ln() / (pa / pb).ln();
        let e = |hh: f64, t: f64| hh * hh + t * t;
        assert!((et[0] - expect(e(h[0], 0.2), e(h[0], 0.1), 0.2, 0.1)).abs() < 1e-12);
        assert!((et[1] - expect(e(h[0], 0.1), e(h[0], 0.05), 0.1, 0.05)).abs() < 1e-12);
        let es = table.spatial_eocs(0.05, "x");
        assert_eq!(es.len(), 1);
        assert!((es[0] - expect(e(h[0], 0.05), e(h[1], 0.05), h[0], h[1])).abs() < 1e-12);
        let csv = table.to_csv();
        assert!(csv.starts_with("h,tau,variable,error,eoc_tau,eoc_h\n"));
        assert_eq!(csv.lines().count(), 1 + 6 * 5);
    }

    #[test]
    fn sweep_slopes_mark_flattening() {
        let plan = SweepPlan {
            frequencies: vec![2, 4, 8],
            taus: vec![0.2, 0.1, 0.05, 0.025, 0.005],
            spatial_tau: 0.001,
        };
        let cells = plan.cells();
        assert_eq!(cells.len(), 5 + 3);
        assert_eq!(cells[0], (8, 0.2));
        let results: Vec<CellResult> = cells
            .iter()
            .map(|&(f, tau)| {
                let h = 0.1 / f as f64;
                let e = h * h + tau * tau;
                CellResult {
                    frequency: f,
                    h,
                    tau,
                    max_errors: Some([e; 5]),
                    final_errors: Some([e; 5]),
                    failure: None,
                    seconds: 0.0,
                }
            })
            .collect();
        let slopes = plan.slopes(&results, 2).unwrap();
        let flags: Vec<bool> = slopes.temporal[0].iter().map(|p| p.pre_flattening).collect();
        assert_eq!(flags, [true, true, true, false]);
        assert!(slopes.temporal[4][..3].iter().all(|p| (p.eoc - 2.0).abs() < 0.5));
        assert!(slopes.spatial[1].iter().all(|p| p.pre_flattening && (p.eoc - 2.0).abs() < 0.05));
        assert!(SweepSlopes::within(&slopes.spatial[2], 1.9, 2.1));
        assert!(!SweepSlopes::within(&slopes.temporal[2], 1.9, 2.1));
        assert_eq!(slopes.to_csv().lines().count(), 1 + 5 * (4 + 2));

        let mut broken = results.clone();
        broken[1].failure = Some("diverged".into());
        assert!(plan.slopes(&broken, 2).is_err());
        assert!(!cells_to_csv(&results).contains("seconds"));
    }

    #[test]
    fn failures_are_listed() {
        let cells = vec![CellResult {
            frequency: 2,
            h: f64::NAN,
            tau: 0.2,
            max_errors: None,
            final_errors: None,
            failure: Some("boom".into()),
            seconds: 0.0,
        }];
        let t = EocTable::from_cells(&cells);
        assert!(t.rows.is_empty());
        assert!(t.to_csv().contains("# failed cell frequency=2"));
    }

    #[test]
    fn lifted_errors_of_interpolant_are_small() {
        let p = manufactured();
        let ex = p.exact.unwrap();
        let mut prev = [f64::INFINITY; 5];
        for freq in [4, 8] {
            let (mesh, x0) = icosphere(freq, 1.0, 2).unwrap();
            let space = FeSpace::new(mesh).unwrap();
            let x = exact_positions(&ex, &x0, 0.0, 0.3);
            let s = exact_state(&p, &x, 0.3).unwrap();
            let e = lifted_errors(&space, &p, &s).unwrap();
            // H is constant on the sphere and only carries rounding error
            assert!(e[3] < 1e-12);
            for i in [0, 1, 2, 4] {
                assert!(e[i] < prev[i], "{i}: {e:?}");
            }
            prev = e;
        }
        assert!(prev.iter().all(|v| *v < 1e-2), "{prev:?}");
    }
}
