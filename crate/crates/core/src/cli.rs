//! Command-line front end: `key = value` configuration files, the four
//! subcommands and their artifacts.
//!
//! A configuration is the concatenation of an optional file and `--set`
//! overrides, later entries winning. Defaults depend on `problem`, which is
//! resolved first. Every command writes the fully resolved configuration to
//! `config.cfg` in the output directory; feeding that file back reproduces
//! the run.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use crate::analysis::{cells_to_csv, lifted_errors, mean_radius, EocTable, ErrorMeasure, SweepPlan, VARIABLES};
use crate::assembly::{FeSpace, GradientMode, U_BLOCK};
use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::flow_solver::{
    initial_state, run_observed, FlowState, SchemeVariant, SolverConfig, StepDiagnostics, DIAGNOSTICS_HEADER,
};
use crate::problems::{
    tumour_initial_data, tumour_problem, ProblemDefinition, TumourParams, VelocityForcing, PRE_INTEGRATION_END,
};
use crate::surface_mesh::{icosphere, quality_report, write_mesh, write_vtk, SurfaceMesh, VtkField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Run,
    Converge,
    Tumour,
    Mesh,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Run => "run",
            Subcommand::Converge => "converge",
            Subcommand::Tumour => "tumour",
            Subcommand::Mesh => "mesh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    ManufacturedSphere,
    PureMcfSphere,
    Tumour,
}

impl ProblemKind {
    fn name(self) -> &'static str {
        match self {
            ProblemKind::ManufacturedSphere => "manufactured_sphere",
            ProblemKind::PureMcfSphere => "pure_mcf_sphere",
            ProblemKind::Tumour => "tumour",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [ProblemKind::ManufacturedSphere, ProblemKind::PureMcfSphere, ProblemKind::Tumour]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

/// Velocity forcing of the manufactured problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcingKind {
    Linear,
    HalfSquare,
}

/// Fully resolved configuration of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub problem: ProblemKind,
    pub scheme: SchemeVariant,
    pub q: usize,
    pub tau: f64,
    pub t_end: f64,
    /// Icosphere frequency; `level = ℓ` in a file is shorthand for 2^ℓ.
    pub frequency: usize,
    pub degree: usize,
    pub seed: u64,
    /// VTK output of `run` every n-th step; 0 writes the final state only.
    pub output_every: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub degeneracy_tolerance: f64,
    pub exact_start: bool,
    pub startup_substeps: Option<usize>,
    pub gradient_mode: GradientMode,
    pub r0: f64,
    pub r1: f64,
    pub forcing: ForcingKind,
    pub epsilon: f64,
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub gamma: f64,
    pub amplitude: f64,
    pub snapshots: Vec<f64>,
    pub frequencies: Vec<usize>,
    pub taus: Vec<f64>,
    pub spatial_tau: f64,
    pub measure: ErrorMeasure,
}

/// Keys accepted in configuration files, in provenance order.
pub const KEYS: &[&str] = &[
    "problem",
    "scheme",
    "q",
    "tau",
    "t_end",
    "frequency",
    "level",
    "degree",
    "seed",
    "output_every",
    "tol",
    "max_iter",
    "degeneracy_tolerance",
    "exact_start",
    "startup_substeps",
    "gradient_mode",
    "r0",
    "r1",
    "forcing",
    "epsilon",
    "d",
    "a",
    "b",
    "delta",
    "gamma",
    "amplitude",
    "snapshots",
    "frequencies",
    "taus",
    "spatial_tau",
    "measure",
];

/// A `key = value` pair with the place it came from.
#[derive(Clone, Debug)]
struct Entry {
    key: String,
    value: String,
    path: PathBuf,
    line: usize,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("malformed value '{}' for {}", self.value, self.key)))
    }

    fn list<T: std::str::FromStr>(&self) -> Result<Vec<T>> {
        if self.value.trim().is_empty() {
            return Ok(Vec::new());
        }
        self.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.error(format!("malformed list item '{}' for {}", s.trim(), self.key)))
            })
            .collect()
    }

    fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.error(format!("expected true or false for {}, got '{}'", self.key, self.value))),
        }
    }
}

fn split_line(raw: &str, path: &Path, line: usize) -> Result<Option<Entry>> {
    let text = raw.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (key, value) = text.split_once('=').ok_or_else(|| Error::Config {
        path: path.to_path_buf(),
        line,
        message: format!("expected key = value, got '{text}'"),
    })?;
    let entry = Entry {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        path: path.to_path_buf(),
        line,
    };
    if !KEYS.contains(&entry.key.as_str()) {
        return Err(entry.error(format!("unknown key '{}'", entry.key)));
    }
    if entry.value.is_empty() {
        return Err(entry.error(format!("missing value for {}", entry.key)));
    }
    Ok(Some(entry))
}

impl RunConfig {
    /// Defaults of `problem` before any file entries are applied.
    pub fn defaults(subcommand: Subcommand, problem: ProblemKind) -> Self {
        let base = RunConfig {
            subcommand,
            problem,
            scheme: SchemeVariant::Coupled,
            q: 2,
            tau: 0.0125,
            t_end: 1.0,
            frequency: 8,
            degree: 2,
            seed: 0,
            output_every: 10,
            tol: 1e-10,
            max_iter: 5000,
            degeneracy_tolerance: crate::surface_mesh::DEFAULT_DEGENERACY_TOLERANCE,
            exact_start: false,
            startup_substeps: None,
            gradient_mode: GradientMode::InterpolateFirst,
            r0: 1.0,
            r1: 2.0,
            forcing: ForcingKind::Linear,
            epsilon: 1.0,
            d: 10.0,
            a: 0.1,
            b: 0.9,
            delta: 0.1,
            gamma: 30.0,
            amplitude: 1e-2,
            snapshots: vec![5.0, 6.0, 7.0, 8.0],
            frequencies: vec![4, 6, 8, 11],
            taus: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            spatial_tau: 0.0015625,
            measure: ErrorMeasure::Lifted,
        };
        match problem {
            ProblemKind::ManufacturedSphere => base,
            ProblemKind::PureMcfSphere => RunConfig {
                tau: 1e-3,
                t_end: 0.1,
                r1: 1.0,
                ..base
            },
            ProblemKind::Tumour => {
                let p = TumourParams::with_gamma(30.0);
                RunConfig {
                    scheme: SchemeVariant::Conservative,
                    tau: 0.0015625,
                    t_end: 8.0,
                    frequency: 10,
                    epsilon: p.epsilon,
                    output_every: 64,
                    ..base
                }
            }
        }
    }

    /// Reads `file` (if any) and applies `overrides` (`key=value` strings,
    /// reported as lines of `<--set>`).
    pub fn load(subcommand: Subcommand, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut entries = Vec::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                path: path.to_path_buf(),
                line: 0,
                message: format!("cannot read configuration: {e}"),
            })?;
            for (i, raw) in text.lines().enumerate() {
                entries.extend(split_line(raw, path, i + 1)?);
            }
        }
        let flag = PathBuf::from("<--set>");
        for (i, raw) in overrides.iter().enumerate() {
            match split_line(raw, &flag, i + 1)? {
                Some(e) => entries.push(e),
                None => {
                    return Err(Error::Config {
                        path: flag,
                        line: i + 1,
                        message: format!("empty override '{raw}'"),
                    })
                }
            }
        }
        Self::from_entries(subcommand, &entries)
    }

    /// Parses a configuration held in memory, as if read from `name`.
    pub fn from_str_named(subcommand: Subcommand, text: &str, name: &str) -> Result<Self> {
        let path = PathBuf::from(name);
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            entries.extend(split_line(raw, &path, i + 1)?);
        }
        Self::from_entries(subcommand, &entries)
    }

    fn from_entries(subcommand: Subcommand, entries: &[Entry]) -> Result<Self> {
        let mut problem = ProblemKind::ManufacturedSphere;
        if subcommand == Subcommand::Tumour {
            problem = ProblemKind::Tumour;
        }
        for e in entries.iter().filter(|e| e.key == "problem") {
            problem = ProblemKind::parse(&e.value).ok_or_else(|| e.error(format!("unknown problem '{}'", e.value)))?;
        }
        if subcommand == Subcommand::Tumour && problem != ProblemKind::Tumour {
            let e = entries.iter().rev().find(|e| e.key == "problem").expect("problem was set");
            return Err(e.error("the tumour subcommand needs problem = tumour"));
        }
        let mut c = Self::defaults(subcommand, problem);
        let mut frequency_from: Option<&Entry> = None;
        for e in entries {
            match e.key.as_str() {
                "problem" => {}
                "scheme" => {
                    c.scheme = match e.value.as_str() {
                        "coupled" => SchemeVariant::Coupled,
                        "conservative" => SchemeVariant::Conservative,
                        v => return Err(e.error(format!("unknown scheme '{v}' (coupled or conservative)"))),
                    }
                }
                "q" => c.q = e.parse()?,
                "tau" => c.tau = e.parse()?,
                "t_end" => c.t_end = e.parse()?,
                "frequency" | "level" => {
                    if let Some(prev) = frequency_from.filter(|p| p.key != e.key) {
                        return Err(e.error(format!(
                            "both frequency and level given (other at {}:{})",
                            prev.path.display(),
                            prev.line
                        )));
                    }
                    frequency_from = Some(e);
                    c.frequency = if e.key == "level" {
                        let level: u32 = e.parse()?;
                        if level > 10 {
                            return Err(e.error(format!("refinement level {level} is too large")));
                        }
                        1 << level
                    } else {
                        e.parse()?
                    };
                }
                "degree" => c.degree = e.parse()?,
                "seed" => c.seed = e.parse()?,
                "output_every" => c.output_every = e.parse()?,
                "tol" => c.tol = e.parse()?,
                "max_iter" => c.max_iter = e.parse()?,
                "degeneracy_tolerance" => c.degeneracy_tolerance = e.parse()?,
                "exact_start" => c.exact_start = e.bool()?,
                "startup_substeps" => {
                    c.startup_substeps = if e.value == "auto" { None } else { Some(e.parse()?) }
                }
                "gradient_mode" => {
                    c.gradient_mode = match e.value.as_str() {
                        "interpolate_first" => GradientMode::InterpolateFirst,
                        "product_rule" => GradientMode::ProductRule,
                        v => {
                            return Err(e.error(format!(
                                "unknown gradient_mode '{v}' (interpolate_first or product_rule)"
                            )))
                        }
                    }
                }
                "r0" => c.r0 = e.parse()?,
                "r1" => c.r1 = e.parse()?,
                "forcing" => {
                    c.forcing = match e.value.as_str() {
                        "linear" => ForcingKind::Linear,
                        "half_square" => ForcingKind::HalfSquare,
                        v => return Err(e.error(format!("unknown forcing '{v}' (linear or half_square)"))),
                    }
                }
                "epsilon" => c.epsilon = e.parse()?,
                "d" => c.d = e.parse()?,
                "a" => c.a = e.parse()?,
                "b" => c.b = e.parse()?,
                "delta" => c.delta = e.parse()?,
                "gamma" => c.gamma = e.parse()?,
                "amplitude" => c.amplitude = e.parse()?,
                "snapshots" => c.snapshots = e.list()?,
                "frequencies" => c.frequencies = e.list()?,
                "taus" => c.taus = e.list()?,
                "spatial_tau" => c.spatial_tau = e.parse()?,
                "measure" => {
                    c.measure = ErrorMeasure::parse(&e.value)
                        .ok_or_else(|| e.error(format!("unknown measure '{}' (lifted or interpolated)", e.value)))?
                }
                k => unreachable!("key {k} passed validation"),
            }
        }
        c.validate().map_err(|err| {
            // invariants span several keys; point at the end of the input
            match entries.last() {
                Some(last) => Error::Config {
                    path: last.path.clone(),
                    line: last.line,
                    message: format!("configuration up to here is invalid: {err}"),
                },
                None => err,
            }
        })?;
        Ok(c)
    }

    /// Start time of the flow: 0, or the end of the tumour pre-integration.
    pub fn t_start(&self) -> f64 {
        match self.problem {
            ProblemKind::Tumour => PRE_INTEGRATION_END,
            _ => 0.0,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            t_end: self.t_end,
            q: self.q,
            scheme: self.scheme,
            tol: self.tol,
            max_iter: self.max_iter,
            degeneracy_tolerance: self.degeneracy_tolerance,
            output_every: 0,
            gradient_mode: self.gradient_mode,
            exact_start: self.exact_start,
            startup_substeps: self.startup_substeps,
            allow_order_six: false,
        }
    }

    pub fn tumour_params(&self) -> TumourParams {
        TumourParams {
            d: self.d,
            a: self.a,
            b: self.b,
            delta: self.delta,
            epsilon: self.epsilon,
            gamma: self.gamma,
            amplitude: self.amplitude,
            seed: self.seed,
        }
    }

    pub fn problem_definition(&self) -> ProblemDefinition {
        match self.problem {
            ProblemKind::ManufacturedSphere => {
                let forcing = match self.forcing {
                    ForcingKind::Linear => VelocityForcing::Linear(vec![1.0]),
                    ForcingKind::HalfSquare => VelocityForcing::HalfSquare,
                };
                let mut p = ProblemDefinition::manufactured_sphere(self.r0, self.r1, forcing);
                p.epsilon = self.epsilon;
                p
            }
            ProblemKind::PureMcfSphere => ProblemDefinition::pure_mcf_sphere(self.r0, self.epsilon),
            ProblemKind::Tumour => tumour_problem(&self.tumour_params()),
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            frequencies: self.frequencies.clone(),
            taus: self.taus.clone(),
            spatial_tau: self.spatial_tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=2).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        if self.frequency == 0 {
            return bad("frequency must be positive".into());
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad(format!("r0 = {} must be positive", self.r0));
        }
        let solver = self.solver_config();
        solver.validate()?;
        if self.subcommand == Subcommand::Mesh {
            return Ok(());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        match self.problem {
            ProblemKind::ManufacturedSphere if !(self.r1 >= self.r0) => {
                return bad(format!("r1 = {} must be at least r0 = {}", self.r1, self.r0));
            }
            ProblemKind::Tumour => {
                self.tumour_params().validate()?;
                if self.r0 != 1.0 {
                    return bad("the tumour model starts from the unit sphere (r0 = 1)".into());
                }
                SolverConfig {
                    t_end: PRE_INTEGRATION_END,
                    ..solver.clone()
                }
                .step_count(0.0)?;
            }
            _ => {}
        }
        match self.subcommand {
            Subcommand::Converge => {
                if self.problem == ProblemKind::Tumour {
                    return bad("convergence studies need a problem with an exact solution".into());
                }
                self.sweep_plan().validate()?;
                for &tau in self.taus.iter().chain([&self.spatial_tau]) {
                    SolverConfig { tau, ..solver.clone() }.step_count(0.0)?;
                }
            }
            Subcommand::Run | Subcommand::Tumour => {
                solver.step_count(self.t_start())?;
            }
            Subcommand::Mesh => {}
        }
        if self.subcommand == Subcommand::Tumour {
            for &s in &self.snapshots {
                let k = (s - self.t_start()) / self.tau;
                if s < self.t_start() || s > self.t_end + 1e-9 || (k - k.round()).abs() > 1e-6 {
                    return bad(format!(
                        "snapshot time {s} is not a step time in [{}, {}]",
                        self.t_start(),
                        self.t_end
                    ));
                }
            }
        }
        Ok(())
    }

    /// Effective configuration as a file that `load` accepts.
    pub fn provenance(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "# effective configuration of `forcedflow {}`", self.subcommand.name());
        let _ = writeln!(s, "# forcedflow {}", env!("CARGO_PKG_VERSION"));
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.name().into());
        kv(
            "scheme",
            match self.scheme {
                SchemeVariant::Coupled => "coupled",
                SchemeVariant::Conservative => "conservative",
            }
            .into(),
        );
        kv("q", self.q.to_string());
        kv("tau", self.tau.to_string());
        kv("t_end", self.t_end.to_string());
        kv("frequency", self.frequency.to_string());
        kv("degree", self.degree.to_string());
        kv("seed", self.seed.to_string());
        kv("output_every", self.output_every.to_string());
        kv("tol", self.tol.to_string());
        kv("max_iter", self.max_iter.to_string());
        kv("degeneracy_tolerance", self.degeneracy_tolerance.to_string());
        kv("exact_start", self.exact_start.to_string());
        kv(
            "startup_substeps",
            self.startup_substeps.map_or_else(|| "auto".to_string(), |n| n.to_string()),
        );
        kv(
            "gradient_mode",
            match self.gradient_mode {
                GradientMode::InterpolateFirst => "interpolate_first",
                GradientMode::ProductRule => "product_rule",
            }
            .into(),
        );
        kv("r0", self.r0.to_string());
        kv("r1", self.r1.to_string());
        kv(
            "forcing",
            match self.forcing {
                ForcingKind::Linear => "linear",
                ForcingKind::HalfSquare => "half_square",
            }
            .into(),
        );
        kv("epsilon", self.epsilon.to_string());
        kv("d", self.d.to_string());
        kv("a", self.a.to_string());
        kv("b", self.b.to_string());
        kv("delta", self.delta.to_string());
        kv("gamma", self.gamma.to_string());
        kv("amplitude", self.amplitude.to_string());
        kv("snapshots", list(&self.snapshots));
        kv(
            "frequencies",
            self.frequencies.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("taus", list(&self.taus));
        kv("spatial_tau", self.spatial_tau.to_string());
        kv("measure", self.measure.name().into());
        s
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "forcedflow",
    version,
    about = "Forced mean curvature flow coupled to surface reaction-diffusion, solved with evolving surface finite elements and linearly implicit BDF"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ClapSubcommand, Debug)]
pub enum Command {
    /// Integrate one problem and write VTK states and per-step diagnostics.
    Run(CommonArgs),
    /// Temporal and spatial sweeps against the exact solution; writes EOC tables.
    Converge(CommonArgs),
    /// Pre-integrate tumour initial data on the unit sphere, then run the flow
    /// and write snapshots.
    Tumour(CommonArgs),
    /// Write an icosphere mesh and its quality report.
    Mesh(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Configuration file of `key = value` lines ('#' starts a comment).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Override one configuration key, e.g. `--set tau=0.01`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Command {
    pub fn split(&self) -> (Subcommand, &CommonArgs) {
        match self {
            Command::Run(a) => (Subcommand::Run, a),
            Command::Converge(a) => (Subcommand::Converge, a),
            Command::Tumour(a) => (Subcommand::Tumour, a),
            Command::Mesh(a) => (Subcommand::Mesh, a),
        }
    }
}

/// Parses the configuration, writes the provenance file and runs the
/// subcommand. Messages go to `log`.
pub fn execute(command: &Command, log: &mut dyn Write) -> Result<()> {
    let (sub, args) = command.split();
    let config = RunConfig::load(sub, args.config.as_deref(), &args.set)?;
    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("config.cfg"), &config.provenance())?;
    match sub {
        Subcommand::Run => run_command(&config, &args.out, log),
        Subcommand::Converge => converge_command(&config, &args.out, log),
        Subcommand::Tumour => tumour_command(&config, &args.out, log),
        Subcommand::Mesh => mesh_command(&config, &args.out, log),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Mesh, initial positions and initial state of a flow run.
struct Prepared {
    mesh: SurfaceMesh,
    space: FeSpace,
    problem: ProblemDefinition,
    initial: FlowState,
}

fn prepare(config: &RunConfig, log: &mut dyn Write) -> Result<Prepared> {
    let (mesh, x0) = icosphere(config.frequency, config.r0, config.degree)?;
    let mut space = FeSpace::new(mesh.clone())?;
    space.set_degeneracy_tolerance(config.degeneracy_tolerance);
    let problem = config.problem_definition();
    let solver = config.solver_config();
    let u0 = match config.problem {
        ProblemKind::Tumour => {
            writeln!(log, "pre-integrating tumour data on the unit sphere over [0, {PRE_INTEGRATION_END}]")?;
            Some(tumour_initial_data(&space, &x0, &config.tumour_params(), &solver)?)
        }
        ProblemKind::PureMcfSphere => Some(NodalField::zeros(x0.n_nodes(), 1)),
        ProblemKind::ManufacturedSphere => None,
    };
    let initial = initial_state(&space, &problem, &x0, config.t_start(), u0.as_ref(), &solver)?;
    Ok(Prepared {
        mesh,
        space,
        problem,
        initial,
    })
}

fn write_state_vtk(path: &Path, mesh: &SurfaceMesh, state: &FlowState, components: usize) -> Result<()> {
    let n = state.x.n_nodes();
    let nu = state.nu();
    let h = NodalField::from_vec(n, 1, state.h().to_vec())?;
    let v = NodalField::from_vec(n, 3, state.v.as_slice().to_vec())?;
    let us: Vec<NodalField> = (0..components)
        .map(|i| NodalField::from_vec(n, 1, state.w.component(U_BLOCK + i).to_vec()))
        .collect::<Result<_>>()?;
    let names: Vec<String> = if components == 1 {
        vec!["u".into()]
    } else {
        (1..=components).map(|i| format!("u{i}")).collect()
    };
    let mut fields: Vec<VtkField<'_>> = names
        .iter()
        .zip(&us)
        .map(|(name, field)| VtkField { name, field })
        .collect();
    fields.push(VtkField { name: "H", field: &h });
    fields.push(VtkField { name: "nu", field: &nu });
    fields.push(VtkField { name: "v", field: &v });
    write_vtk(path, mesh, &state.x, &fields)
}

/// Per-step errors and radii of runs with an exact solution.
const ERRORS_HEADER: &str = "step,t,err_x,err_v,err_nu,err_H,err_u,mean_radius,exact_radius";

/// Shared stepping loop of `run` and `tumour`: `vtk_at` decides which
/// steps are written. Diagnostics are written even when the run aborts.
fn flow(
    config: &RunConfig,
    out: &Path,
    log: &mut dyn Write,
    vtk_dir: &Path,
    mut vtk_at: impl FnMut(usize, f64) -> Option<String>,
) -> Result<()> {
    let prep = prepare(config, log)?;
    let solver = config.solver_config();
    let n_steps = solver.step_count(config.t_start())?;
    fs::create_dir_all(vtk_dir)?;
    let mut diagnostics: Vec<StepDiagnostics> = Vec::new();
    let mut errors = String::from(ERRORS_HEADER);
    errors.push('\n');
    let exact = prep.problem.exact;
    let m = prep.problem.components;
    writeln!(
        log,
        "{} nodes, {} elements, {} steps of tau = {}",
        prep.mesh.n_nodes(),
        prep.mesh.n_elements(),
        n_steps,
        config.tau
    )?;
    let result = run_observed(&prep.space, &prep.problem, prep.initial.clone(), &solver, |state, d| {
        diagnostics.push(*d);
        if let Some(exact) = exact {
            let e = lifted_errors(&prep.space, &prep.problem, state)?;
            let _ = write!(errors, "{},{}", d.step, state.t);
            for v in e {
                let _ = write!(errors, ",{v:e}");
            }
            let _ = writeln!(errors, ",{},{}", mean_radius(&state.x), exact.radius(state.t));
        }
        if let Some(name) = vtk_at(d.step, state.t) {
            write_state_vtk(&vtk_dir.join(name), &prep.mesh, state, m)?;
        }
        Ok(())
    });
    let mut csv = String::from(DIAGNOSTICS_HEADER);
    csv.push('\n');
    for d in &diagnostics {
        csv.push_str(&d.csv_row());
        csv.push('\n');
    }
    write_text(&out.join("diagnostics.csv"), &csv)?;
    if exact.is_some() {
        write_text(&out.join("errors.csv"), &errors)?;
    }
    let trajectory = result?;
    if let Some(last) = trajectory.diagnostics.last() {
        writeln!(
            log,
            "reached t = {} after {} steps; min Gram determinant {:e}, area {}",
            last.t, last.step, last.min_gram_det, last.area
        )?;
    }
    Ok(())
}

fn run_command(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<()> {
    let n_steps = config.solver_config().step_count(config.t_start())?;
    let every = config.output_every;
    flow(config, out, log, &out.join("vtk"), |step, _| {
        let keep = step == n_steps || (every > 0 && step % every == 0);
        keep.then(|| format!("state_{step:06}.vtk"))
    })
}

fn tumour_command(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<()> {
    let t0 = config.t_start();
    let snapshot_steps: Vec<(usize, f64)> = config
        .snapshots
        .iter()
        .map(|&s| (((s - t0) / config.tau).round() as usize, s))
        .collect();
    flow(config, out, log, &out.join("snapshots"), |step, _| {
        snapshot_steps
            .iter()
            .find(|(k, _)| *k == step)
            .map(|(_, s)| format!("tumour_t{s}.vtk"))
    })?;
    writeln!(log, "wrote {} snapshots", snapshot_steps.len())?;
    Ok(())
}

fn converge_command(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<()> {
    let problem = config.problem_definition();
    let plan = config.sweep_plan();
    writeln!(
        log,
        "{} cells: taus {:?} at frequency {}, frequencies {:?} at tau {}",
        plan.cells().len(),
        plan.taus,
        plan.finest_frequency(),
        plan.frequencies,
        plan.spatial_tau
    )?;
    let cells = plan.run(&problem, config.degree, &config.solver_config(), config.measure)?;
    write_text(&out.join("cells.csv"), &cells_to_csv(&cells))?;
    let table = EocTable::from_cells(&cells);
    table.write_csv(&out.join("eoc.csv"))?;
    for c in &cells {
        writeln!(
            log,
            "frequency {:>3} tau {:<10} {:>7.1} s {}",
            c.frequency,
            c.tau,
            c.seconds,
            c.failure.as_deref().unwrap_or("ok")
        )?;
    }
    if let Some((f, tau, msg)) = table.failures.first() {
        return Err(Error::InvalidConfig(format!(
            "{} cell(s) failed, first at frequency {f}, tau {tau}: {msg}",
            table.failures.len()
        )));
    }
    let slopes = plan.slopes(&cells, config.q)?;
    write_text(&out.join("slopes.csv"), &slopes.to_csv())?;
    for (i, v) in VARIABLES.iter().enumerate() {
        let fmt = |pairs: &[crate::analysis::SlopePair]| {
            pairs
                .iter()
                .map(|p| format!("{:.2}{}", p.eoc, if p.pre_flattening { "" } else { "*" }))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(log, "{v:>2}: tau EOC {} | h EOC {}", fmt(&slopes.temporal[i]), fmt(&slopes.spatial[i]))?;
    }
    writeln!(log, "(* marks pairs in the flattened regime)")?;
    Ok(())
}

fn mesh_command(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<()> {
    let (mesh, x) = icosphere(config.frequency, config.r0, config.degree)?;
    write_mesh(&out.join("mesh.txt"), &mesh, &x)?;
    write_vtk(&out.join("mesh.vtk"), &mesh, &x, &[])?;
    let q = quality_report(&mesh, &x);
    let report = format!(
        "frequency = {}\nradius = {}\ndegree = {}\nnodes = {}\nvertices = {}\nedges = {}\nelements = {}\n\
         euler_characteristic = {}\nboundary_edges = {}\nh_max = {}\nh_min = {}\nmin_angle_deg = {}\nmax_aspect = {}\n",
        config.frequency,
        config.r0,
        q.degree,
        q.n_nodes,
        mesh.vertex_count(),
        mesh.edge_count(),
        q.n_elements,
        q.euler_characteristic,
        q.boundary_edges,
        q.h_max,
        q.h_min,
        q.min_angle,
        q.max_aspect
    );
    write_text(&out.join("quality.txt"), &report)?;
    write!(log, "{report}")?;
    Ok(())
}

/// Process entry point; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout();
    match execute(&cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!("\n  caused by: {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_str_named(Subcommand::Run, text, "test.cfg")
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, RunConfig::defaults(Subcommand::Run, ProblemKind::ManufacturedSphere));
    }

    #[test]
    fn comments_and_whitespace() {
        let c = parse("# header\n  tau = 0.025   # trailing\n\nq=3\n").unwrap();
        assert_eq!(c.tau, 0.025);
        assert_eq!(c.q, 3);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse("tau = 0.1\n\nbogus = 1\n").unwrap_err();
        match err {
            Error::Config { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn malformed_value_reports_line() {
        let err = parse("q = two\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }), "{err}");
        let err = parse("tau 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }), "{err}");
    }

    #[test]
    fn order_seven_is_rejected() {
        let err = parse("q = 7\n").unwrap_err();
        assert!(err.to_string().contains("order 7"), "{err}");
        assert!(parse("q = 5\n").is_ok());
    }

    #[test]
    fn level_is_frequency_shorthand() {
        assert_eq!(parse("level = 3\n").unwrap().frequency, 8);
        assert!(parse("level = 3\nfrequency = 8\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cfg");
        fs::write(&path, "tau = 0.1\nq = 3\n").unwrap();
        let c = RunConfig::load(Subcommand::Run, Some(&path), &["tau=0.05".into()]).unwrap();
        assert_eq!((c.tau, c.q), (0.05, 3));
        let err = RunConfig::load(Subcommand::Run, Some(&path), &["nope=1".into()]).unwrap_err();
        assert!(err.to_string().starts_with("<--set>:1:"), "{err}");
    }

    #[test]
    fn problem_defaults_follow_problem_key() {
        let c = RunConfig::from_str_named(Subcommand::Tumour, "", "t.cfg").unwrap();
        assert_eq!(c.problem, ProblemKind::Tumour);
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.scheme, SchemeVariant::Conservative);
        // tau given before problem still applies
        let c = parse("tau = 0.002\nproblem = pure_mcf_sphere\n").unwrap();
        assert_eq!((c.tau, c.t_end), (0.002, 0.1));
        assert!(RunConfig::from_str_named(Subcommand::Tumour, "problem = pure_mcf_sphere", "t.cfg").is_err());
    }

    #[test]
    fn invariants_are_checked() {
        assert!(parse("tau = -1\n").is_err());
        assert!(parse("tau = 0.3\n").is_err()); // 1 is not a multiple of 0.3
        assert!(parse("degree = 3\n").is_err());
        assert!(parse("r1 = 0.5\n").is_err());
        let err = RunConfig::from_str_named(Subcommand::Tumour, "snapshots = 5,6.0001", "t.cfg").unwrap_err();
        assert!(err.to_string().contains("snapshot"), "{err}");
    }

    #[test]
    fn provenance_round_trips() {
        let c = parse("problem = pure_mcf_sphere\ntau = 0.0001\nseed = 17\nstartup_substeps = 4\nsnapshots = 5.5\n")
            .unwrap();
        let again = parse(&c.provenance()).unwrap();
        assert_eq!(c, again);
        let t = RunConfig::from_str_named(Subcommand::Tumour, "gamma = 300\nseed = 3", "t.cfg").unwrap();
        let again = RunConfig::from_str_named(Subcommand::Tumour, &t.provenance(), "p.cfg").unwrap();
        assert_eq!(t, again);
    }
}
