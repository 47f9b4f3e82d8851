//! Scenario runner behind the `nhdirac` binary.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error or
//! unknown model, 3 integration failure (partial output is still written).

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dynamics::{
    AdvectionMode, DynamicsError, IntegrationError, IntegratorConfig, ReducedState, ReducedSystem, Trajectory,
};
use crate::linalg::{Matrix, Vector};
use crate::models::{
    describe, ChaplyginBallParams, EulerDiskParams, HeavyTopParams, ModelError, ModelParams, SuslovParams,
    MODEL_NAMES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;

/// Points used by the randomized derivative check run before each scenario.
const DERIVATIVE_POINTS: usize = 100;
const DERIVATIVE_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "nhdirac", version, about = "Integrate and certify reduced nonholonomic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file, overriding the scenario's `output.path` (single scenario only)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output format, overriding the scenario's `output.format`
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for the randomized derivative check
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more scenario files
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Number of scenarios run concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in models
    ListModels,
    /// Describe a built-in model
    Describe { model: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Implicit midpoint on the Lagrangian side.
    #[default]
    Midpoint,
    /// Implicit midpoint on the Hamiltonian side.
    LpsMidpoint,
    /// Explicit RK4 reference integrator.
    Rk4Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvectionSetting {
    #[default]
    Ode,
    Exact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub advection_mode: AdvectionSetting,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            method: Method::Midpoint,
            dt: 1e-3,
            t_final: 1.0,
            newton_tol: 1e-12,
            max_iter: 50,
            advection_mode: AdvectionSetting::Ode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub sample_every: usize,
    pub format: Option<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: None, sample_every: 1, format: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub dirac_tol: f64,
    pub energy_tol: f64,
    pub constraint_tol: f64,
    pub advection_tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { dirac_tol: 1e-8, energy_tol: 1e-8, constraint_tol: 1e-10, advection_tol: 1e-10 }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("invalid scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum InertiaSpec {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl InertiaSpec {
    fn matrix(&self) -> Matrix<f64> {
        match self {
            InertiaSpec::Diagonal(d) => Matrix::from_diagonal(d),
            InertiaSpec::Full(rows) => Matrix::from_fn(3, 3, |i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    inertia: Option<InertiaSpec>,
    mass: Option<f64>,
    gravity: Option<f64>,
    length: Option<f64>,
    radius: Option<f64>,
    offset: Option<f64>,
    chi: Option<[f64; 3]>,
    gamma0: Option<[f64; 3]>,
    omega0: Option<[f64; 3]>,
    normal: Option<[f64; 3]>,
    e3: Option<[f64; 3]>,
}

fn allowed_keys(model: &str) -> &'static [&'static str] {
    match model {
        "heavy_top" => &["inertia", "mass", "gravity", "length", "chi", "gamma0", "omega0"],
        "suslov_top" => &["inertia", "normal", "omega0"],
        "chaplygin_ball" => &["inertia", "mass", "gravity", "radius", "offset", "chi", "gamma0", "omega0"],
        "chaplygin_sphere" => &["inertia", "mass", "gravity", "radius", "chi", "gamma0", "omega0"],
        "euler_disk" => &["inertia", "mass", "gravity", "radius", "e3", "gamma0", "omega0"],
        _ => &[],
    }
}

fn v3(x: Option<[f64; 3]>, default: &Vector<f64>) -> Vector<f64> {
    x.map(|a| Vector::from_f64(&a)).unwrap_or_else(|| default.clone())
}

/// Builds model parameters from the `[model.params]` table over the model defaults.
pub fn model_params(name: &str, table: &toml::Table) -> Result<ModelParams<f64>, CliError> {
    let defaults = ModelParams::<f64>::default_for(name)?;
    let allowed = allowed_keys(name);
    if let Some(bad) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::Invalid(format!("unknown parameter `{bad}` for model {name} (allowed: {})", allowed.join(", "))));
    }
    let raw: RawParams = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Invalid(format!("model parameters: {}", e.message())))?;
    let inertia = raw.inertia.as_ref().map(InertiaSpec::matrix);
    Ok(match defaults {
        ModelParams::HeavyTop(d) => ModelParams::HeavyTop(HeavyTopParams {
            inertia: inertia.unwrap_or(d.inertia),
            mass: raw.mass.unwrap_or(d.mass),
            gravity: raw.gravity.unwrap_or(d.gravity),
            length: raw.length.unwrap_or(d.length),
            chi: v3(raw.chi, &d.chi),
            gamma0: v3(raw.gamma0, &d.gamma0),
            omega0: v3(raw.omega0, &d.omega0),
        }),
        ModelParams::SuslovTop(d) => ModelParams::SuslovTop(SuslovParams {
            inertia: inertia.unwrap_or(d.inertia),
            normal: v3(raw.normal, &d.normal),
            omega0: v3(raw.omega0, &d.omega0),
        }),
        ModelParams::ChaplyginBall(d) | ModelParams::ChaplyginSphere(d) => {
            let p = ChaplyginBallParams {
                inertia: inertia.unwrap_or(d.inertia),
                mass: raw.mass.unwrap_or(d.mass),
                gravity: raw.gravity.unwrap_or(d.gravity),
                radius: raw.radius.unwrap_or(d.radius),
                offset: raw.offset.unwrap_or(d.offset),
                chi: v3(raw.chi, &d.chi),
                gamma0: v3(raw.gamma0, &d.gamma0),
                omega0: v3(raw.omega0, &d.omega0),
            };
            if name == "chaplygin_sphere" {
                ModelParams::ChaplyginSphere(p)
            } else {
                ModelParams::ChaplyginBall(p)
            }
        }
        ModelParams::EulerDisk(d) => ModelParams::EulerDisk(EulerDiskParams {
            inertia: inertia.or(d.inertia),
            mass: raw.mass.unwrap_or(d.mass),
            gravity: raw.gravity.unwrap_or(d.gravity),
            radius: raw.radius.unwrap_or(d.radius),
            e3: v3(raw.e3, &d.e3),
            gamma0: v3(raw.gamma0, &d.gamma0),
            omega0: v3(raw.omega0, &d.omega0),
        }),
    })
}

fn mat_json(m: &Matrix<f64>) -> Value {
    Value::Array((0..m.rows()).map(|i| json!(m.row(i).as_slice())).collect())
}

/// Effective parameters (defaults filled in) as a JSON object.
pub fn params_json(p: &ModelParams<f64>) -> Value {
    let mut m = Map::new();
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    match p {
        ModelParams::HeavyTop(p) => {
            put("inertia", mat_json(&p.inertia));
            put("mass", json!(p.mass));
            put("gravity", json!(p.gravity));
            put("length", json!(p.length));
            put("chi", json!(p.chi.as_slice()));
            put("gamma0", json!(p.gamma0.as_slice()));
            put("omega0", json!(p.omega0.as_slice()));
        }
        ModelParams::SuslovTop(p) => {
            put("inertia", mat_json(&p.inertia));
            put("normal", json!(p.normal.as_slice()));
            put("omega0", json!(p.omega0.as_slice()));
        }
        ModelParams::ChaplyginBall(p) | ModelParams::ChaplyginSphere(p) => {
            put("inertia", mat_json(&p.inertia));
            put("mass", json!(p.mass));
            put("gravity", json!(p.gravity));
            put("radius", json!(p.radius));
            put("offset", json!(p.offset));
            put("chi", json!(p.chi.as_slice()));
            put("gamma0", json!(p.gamma0.as_slice()));
            put("omega0", json!(p.omega0.as_slice()));
        }
        ModelParams::EulerDisk(p) => {
            put("inertia", mat_json(&p.inertia()));
            put("mass", json!(p.mass));
            put("gravity", json!(p.gravity));
            put("radius", json!(p.radius));
            put("e3", json!(p.e3.as_slice()));
            put("gamma0", json!(p.gamma0.as_slice()));
            put("omega0", json!(p.omega0.as_slice()));
        }
    }
    Value::Object(m)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text).map_err(|message| CliError::Parse { path: path.to_path_buf(), message })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, String> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let i = &cfg.integrator;
    if !(i.dt > 0.0 && i.dt.is_finite()) {
        return Err(format!("integrator.dt must be positive, got {}", i.dt));
    }
    if !(i.t_final >= 0.0 && i.t_final.is_finite()) {
        return Err(format!("integrator.t_final must be non-negative, got {}", i.t_final));
    }
    if !(i.newton_tol > 0.0) || i.max_iter == 0 {
        return Err("integrator.newton_tol and integrator.max_iter must be positive".into());
    }
    if cfg.output.sample_every == 0 {
        return Err("output.sample_every must be at least 1".into());
    }
    let v = &cfg.verify;
    if [v.dirac_tol, v.energy_tol, v.constraint_tol, v.advection_tol].iter().any(|t| !(*t >= 0.0)) {
        return Err("verify tolerances must be non-negative".into());
    }
    if !MODEL_NAMES.contains(&cfg.model.name.as_str()) {
        return Err(format!("unknown model `{}` (known: {})", cfg.model.name, MODEL_NAMES.join(", ")));
    }
    Ok(cfg)
}

/// Column names of the trajectory table.
pub fn column_names(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("xi_{i}")));
    cols.extend((0..n).map(|i| format!("mu_{i}")));
    cols.extend((0..m).map(|i| format!("a_{i}")));
    cols.extend(["energy", "res_constraint", "res_dirac", "res_advection"].map(String::from));
    cols
}

fn rows(traj: &Trajectory<f64>, sample_every: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    traj.states.iter().zip(&traj.diagnostics).enumerate().filter(move |(i, _)| i % sample_every == 0).map(
        |(_, (s, d))| {
            let mut r = vec![s.t];
            r.extend(s.xi.iter().chain(s.mu.iter()).chain(s.a.iter()).copied());
            r.extend([d.energy, d.res_constraint, d.res_dirac, d.res_advection]);
            r
        },
    )
}

/// CSV with 17 significant digits per field.
pub fn write_csv(out: &mut impl Write, n: usize, m: usize, traj: &Trajectory<f64>, sample_every: usize) -> io::Result<()> {
    let mut buf = column_names(n, m).join(",");
    buf.push('\n');
    for r in rows(traj, sample_every) {
        for (i, x) in r.iter().enumerate() {
            if i > 0 {
                buf.push(',');
            }
            let _ = write!(buf, "{x:.16e}");
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
}

pub fn write_json(
    out: &mut impl Write,
    n: usize,
    m: usize,
    traj: &Trajectory<f64>,
    sample_every: usize,
    metadata: Value,
) -> io::Result<()> {
    let names = column_names(n, m);
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for r in rows(traj, sample_every) {
        for (c, x) in cols.iter_mut().zip(r) {
            c.push(x);
        }
    }
    let mut columns = Map::new();
    for (name, c) in names.into_iter().zip(cols) {
        columns.insert(name, json!(c));
    }
    let doc = json!({ "metadata": metadata, "columns": Value::Object(columns) });
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    out.write_all(b"\n")
}

/// Verification summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub model: String,
    pub samples: usize,
    pub energy_drift: f64,
    pub constraint: f64,
    pub dirac: f64,
    pub advection: f64,
    pub derivative: f64,
    pub wall_seconds: f64,
    pub failure: Option<String>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn render(&self, label: &str, v: &VerifySection) -> String {
        let mark = |x: f64, tol: f64| if x <= tol { "ok" } else { "FAIL" };
        let mut s = String::new();
        let _ = writeln!(s, "scenario {label} ({})", self.model);
        let _ = writeln!(s, "  samples                 {}", self.samples);
        let _ = writeln!(s, "  derivative check        {:.3e}  [{}]", self.derivative, mark(self.derivative, DERIVATIVE_TOL));
        let _ = writeln!(s, "  max |energy drift|      {:.3e}  [{}]", self.energy_drift, mark(self.energy_drift, v.energy_tol));
        let _ = writeln!(s, "  max constraint residual {:.3e}  [{}]", self.constraint, mark(self.constraint, v.constraint_tol));
        let _ = writeln!(s, "  max Dirac residual      {:.3e}  [{}]", self.dirac, mark(self.dirac, v.dirac_tol));
        let _ = writeln!(s, "  max advection residual  {:.3e}  [{}]", self.advection, mark(self.advection, v.advection_tol));
        let _ = writeln!(s, "  wall time               {:.3} s", self.wall_seconds);
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "  integration failed: {f}");
        }
        let _ = writeln!(s, "  exit code               {}", self.exit_code);
        s
    }
}

fn integrate(sys: &ReducedSystem<f64>, s0: &ReducedState<f64>, cfg: &ScenarioConfig) -> Result<Trajectory<f64>, IntegrationError<f64>> {
    let i = &cfg.integrator;
    let icfg = IntegratorConfig {
        dt: i.dt,
        newton_tol: i.newton_tol,
        max_iter: i.max_iter,
        advection: match i.advection_mode {
            AdvectionSetting::Ode => AdvectionMode::Ode,
            AdvectionSetting::Exact => AdvectionMode::Exact,
        },
        dirac_tol: cfg.verify.dirac_tol,
    };
    match i.method {
        Method::Midpoint => sys.integrate(s0, i.t_final, &icfg),
        Method::LpsMidpoint => match sys.hamiltonian() {
            Ok(h) => h.lps_integrate(s0, i.t_final, &icfg),
            Err(cause) => Err(IntegrationError { cause, partial: Trajectory::empty(i.dt) }),
        },
        Method::Rk4Oracle => sys.oracle_rk4(s0, i.t_final, i.dt, 1),
    }
}

/// Outcome of one scenario: the report text and an exit code.
pub struct ScenarioOutcome {
    pub exit_code: i32,
    pub text: String,
}

/// Resolved output location and format for a scenario.
fn output_target(config_path: &Path, cfg: &ScenarioConfig, cli_out: Option<&Path>, cli_fmt: Option<Format>) -> (PathBuf, Format) {
    let fmt = cli_fmt.or(cfg.output.format).unwrap_or_default();
    let ext = match fmt {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = match (cli_out, &cfg.output.path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) if p.is_absolute() => p.clone(),
        (None, Some(p)) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        (None, None) => config_path.with_extension(ext),
    };
    (path, fmt)
}

/// Runs one scenario file end to end.
pub fn run_scenario(config_path: &Path, cli_out: Option<&Path>, cli_fmt: Option<Format>, seed: u64) -> ScenarioOutcome {
    let label = config_path.display().to_string();
    let config_error = |e: CliError| ScenarioOutcome { exit_code: EXIT_CONFIG, text: format!("error: {e}\n") };
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let params = match model_params(&cfg.model.name, &cfg.model.params) {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    let sys = match params.system() {
        Ok(s) => s,
        Err(e) => return config_error(e.into()),
    };
    let (path, fmt) = output_target(config_path, &cfg, cli_out, cli_fmt);
    let started = Instant::now();
    let derivative = sys.lagrangian.derivative_check(DERIVATIVE_POINTS, seed).max();
    let (traj, failure) = match params.initial_state(&sys) {
        Ok(s0) => match integrate(&sys, &s0, &cfg) {
            Ok(t) => (t, None),
            Err(e) => (e.partial, Some(e.cause)),
        },
        Err(ModelError::Dynamics(cause)) => (Trajectory::empty(cfg.integrator.dt), Some(cause)),
        Err(e) => return config_error(e.into()),
    };
    let wall_seconds = started.elapsed().as_secs_f64();

    let metadata = json!({
        "model": params.name(),
        "params": params_json(&params),
        "integrator": {
            "method": cfg.integrator.method,
            "dt": cfg.integrator.dt,
            "t_final": cfg.integrator.t_final,
            "newton_tol": cfg.integrator.newton_tol,
            "max_iter": cfg.integrator.max_iter,
            "advection_mode": cfg.integrator.advection_mode,
        },
        "tolerances": {
            "dirac_tol": cfg.verify.dirac_tol,
            "energy_tol": cfg.verify.energy_tol,
            "constraint_tol": cfg.verify.constraint_tol,
            "advection_tol": cfg.verify.advection_tol,
        },
        "seed": seed,
        "status": failure.as_ref().map(|f: &DynamicsError| f.to_string()).unwrap_or_else(|| "ok".into()),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let written = fs::File::create(&path).and_then(|f| {
        let mut w = io::BufWriter::new(f);
        match fmt {
            Format::Csv => write_csv(&mut w, sys.xi_dim(), sys.a_dim(), &traj, cfg.output.sample_every)?,
            Format::Json => write_json(&mut w, sys.xi_dim(), sys.a_dim(), &traj, cfg.output.sample_every, metadata)?,
        }
        w.flush()
    });
    if let Err(source) = written {
        return config_error(CliError::Write { path, source });
    }

    let v = cfg.verify;
    let mut report = RunReport {
        model: params.name().to_string(),
        samples: traj.len(),
        energy_drift: traj.max_energy_drift(),
        constraint: traj.max_constraint_residual(),
        dirac: traj.max_dirac_residual(),
        advection: traj.max_advection_residual(),
        derivative,
        wall_seconds,
        failure: failure.as_ref().map(|f| f.to_string()),
        exit_code: EXIT_OK,
    };
    let within = |x: f64, tol: f64| x <= tol;
    report.exit_code = if failure.is_some() {
        EXIT_INTEGRATION
    } else if within(report.energy_drift, v.energy_tol)
        && within(report.constraint, v.constraint_tol)
        && within(report.dirac, v.dirac_tol)
        && within(report.advection, v.advection_tol)
        && within(report.derivative, DERIVATIVE_TOL)
    {
        EXIT_OK
    } else {
        EXIT_VERIFY
    };
    let mut text = report.render(&label, &v);
    let _ = writeln!(text, "  output                  {}", path.display());
    ScenarioOutcome { exit_code: report.exit_code, text }
}

fn list_models() -> String {
    let mut s = String::new();
    for name in MODEL_NAMES {
        let summary = describe(name).and_then(|d| d.lines().next()).unwrap_or(name);
        let _ = writeln!(s, "{summary}");
        let _ = writeln!(s, "    params: {}", allowed_keys(name).join(", "));
    }
    s
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::ListModels => {
            print!("{}", list_models());
            EXIT_OK
        }
        Command::Describe { model } => match describe(&model) {
            Some(text) => {
                print!("{text}");
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown model `{model}` (known: {})", MODEL_NAMES.join(", "));
                EXIT_CONFIG
            }
        },
        Command::Run { configs, jobs } => {
            if cli.output.is_some() && configs.len() > 1 {
                eprintln!("error: --output needs exactly one scenario");
                return EXIT_CONFIG;
            }
            let seed = cli.seed.unwrap_or(0);
            let outcomes = run_many(&configs, jobs, cli.output.as_deref(), cli.format, seed);
            let mut code = EXIT_OK;
            for o in &outcomes {
                print!("{}", o.text);
                code = code.max(o.exit_code);
            }
            code
        }
    }
}

/// Runs independent scenarios on up to `jobs` threads; results keep input order.
pub fn run_many(configs: &[PathBuf], jobs: usize, out: Option<&Path>, fmt: Option<Format>, seed: u64) -> Vec<ScenarioOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<ScenarioOutcome>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let workers = jobs.clamp(1, configs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let o = run_scenario(&configs[i], out, fmt, seed);
                *slots[i].lock().expect("slot lock") = Some(o);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every scenario ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_and_reject_bad_configs() {
        let cfg = parse_config("[model]\nname = \"heavy_top\"\n").unwrap();
        assert_eq!(cfg.integrator.dt, 1e-3);
        assert!(parse_config("[model]\nname = \"nope\"\n").is_err());
        assert!(parse_config("[model]\nname = \"heavy_top\"\n[integrator]\ndt = 0.0\n").is_err());
        assert!(parse_config("[model]\nname = \"heavy_top\"\n[integrator]\nstep = 1.0\n").is_err());
        assert!(parse_config("[model]\nname = \"heavy_top\"\n[output]\nsample_every = 0\n").is_err());
    }

    #[test]
    fn params_override_defaults() {
        let t: toml::Table = toml::from_str("inertia = [1.0, 1.0, 2.0]\nmass = 3.0\ngamma0 = [0.0, 0.0, 1.0]").unwrap();
        let ModelParams::HeavyTop(p) = model_params("heavy_top", &t).unwrap() else { panic!() };
        assert_eq!(p.mass, 3.0);
        assert_eq!(p.inertia, Matrix::from_diagonal(&[1.0, 1.0, 2.0]));
        let t: toml::Table = toml::from_str("offset = 0.3").unwrap();
        assert!(model_params("chaplygin_sphere", &t).is_err());
        let t: toml::Table = toml::from_str("inertia = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]").unwrap();
        assert!(model_params("euler_disk", &t).is_ok());
    }

    #[test]
    fn csv_header_layout() {
        assert_eq!(
            column_names(3, 3).join(","),
            "t,xi_0,xi_1,xi_2,mu_0,mu_1,mu_2,a_0,a_1,a_2,energy,res_constraint,res_dirac,res_advection"
        );
        let mut out = Vec::new();
        write_csv(&mut out, 3, 0, &Trajectory::empty(0.1), 1).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,xi_0,xi_1,xi_2,mu_0,mu_1,mu_2,energy,res_constraint,res_dirac,res_advection\n");
    }
}
