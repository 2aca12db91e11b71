//! Configured experiments and their artifacts.
//!
//! A config is a TOML document:
//!
//! ```toml
//! experiment = "viscosity-sweep"
//! seed = 7
//!
//! [scenario]
//! preset = "figure1"
//!
//! [grid]
//! xmax = 10.0
//! nx = 400
//! t_end = 1.0
//! nt = 20
//!
//! [params]
//! eps = [0.4, 0.2, 0.1, 0.05]
//! window = [0.0, 10.0]
//! ```
//!
//! Every run writes its CSV files, `summary.json` with one entry per check,
//! and `run.log`. Nothing time- or host-dependent goes into the outputs, so
//! a rerun with the same config and seed reproduces them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{backward_value_dp, boundary_discrepancy_table, default_table_points, identify_with_limit};
use crate::costcome::{cost_to_come_dp_field, cost_to_come_hjb, mortensen_trace, ControlGrid};
use crate::error::{Error, Result};
use crate::filtering::{
    hopf_cole, inverse_hopf_cole, particle_filter_oracle, robust_transform, simulate_reflected_sde, small_noise_check,
    solve_zakai, Direction, FilterDomain, Gauge, ParticleOptions,
};
use crate::hjb::{bound_stability, check_bounds, eps_gate, solve_inviscid, solve_viscous, vanishing_viscosity_sweep, HamiltonianKind, SolverOptions};
use crate::io::{export_csv, write_field_binary, Columns};
use crate::scenario::{builtin_scenario, GridSpec, PenaltySpec, ProblemSpec};
use crate::skorokhod::{penalization_gap, solve_explicit, solve_vi, ControlSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SkorokhodDemo,
    PenalizationSweep,
    Mortensen,
    ViscositySweep,
    Filtering,
    Identification,
    BoundaryTable,
}

impl ExperimentKind {
    pub fn is_stochastic(self) -> bool {
        matches!(self, ExperimentKind::Filtering)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SkorokhodDemo => "skorokhod-demo",
            ExperimentKind::PenalizationSweep => "penalization-sweep",
            ExperimentKind::Mortensen => "mortensen",
            ExperimentKind::ViscositySweep => "viscosity-sweep",
            ExperimentKind::Filtering => "filtering",
            ExperimentKind::Identification => "identification",
            ExperimentKind::BoundaryTable => "boundary-table",
        }
    }

    fn default_scenario(self) -> &'static str {
        match self {
            ExperimentKind::SkorokhodDemo | ExperimentKind::PenalizationSweep | ExperimentKind::ViscositySweep | ExperimentKind::Identification => "figure1",
            ExperimentKind::Mortensen => "quadratic",
            ExperimentKind::Filtering => "constant-obs",
            ExperimentKind::BoundaryTable => "boundary-probe",
        }
    }
}

/// Either a preset name or a full inline scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Option<String>,
    pub inline: Option<ProblemSpec>,
}

/// Numerical knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Viscosity ladder, strictly decreasing.
    pub eps: Option<Vec<f64>>,
    /// Penalty ladder, strictly increasing.
    pub kappa: Option<Vec<f64>>,
    pub window: Option<[f64; 2]>,
    /// Control quantization step.
    pub control_step: Option<f64>,
    /// Joint refinement steps `Δx = Δt = Δω`, strictly decreasing.
    pub levels: Option<Vec<f64>>,
    pub particles: Option<usize>,
    /// Radius of the bound checks.
    pub radius: Option<f64>,
    /// Ladder for the small-noise check of the filtering experiment.
    pub small_noise_eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub params: Params,
    pub seed: Option<u64>,
    /// Output directory; the command line may override it.
    pub output: Option<PathBuf>,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if !table.contains_key("experiment") {
            return Err(Error::Config("missing field: experiment".into()));
        }
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if let Some(e) = &p.eps {
            if e.is_empty() || !strictly_decreasing(e) || e.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("params.eps must be positive and strictly decreasing".into()));
            }
        }
        if let Some(e) = &p.small_noise_eps {
            if e.is_empty() || !strictly_decreasing(e) || e.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("params.small_noise_eps must be positive and strictly decreasing".into()));
            }
        }
        if let Some(k) = &p.kappa {
            if k.is_empty() || k.windows(2).any(|w| w[1] <= w[0]) || k.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("params.kappa must be positive and strictly increasing".into()));
            }
        }
        if let Some(l) = &p.levels {
            if l.is_empty() || !strictly_decreasing(l) || l.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("params.levels must be positive and strictly decreasing".into()));
            }
        }
        if let Some([a, b]) = p.window {
            if !(b > a) {
                return Err(Error::Config("params.window must satisfy a < b".into()));
            }
        }
        if matches!(p.control_step, Some(s) if !(s > 0.0)) {
            return Err(Error::Config("params.control_step must be positive".into()));
        }
        if matches!(p.particles, Some(n) if n < 100) {
            return Err(Error::Config("params.particles must be at least 100".into()));
        }
        if self.scenario.preset.is_some() && self.scenario.inline.is_some() {
            return Err(Error::Config("scenario: give either preset or inline, not both".into()));
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| Error::Config(format!("grid: {e}")))?;
        }
        Ok(())
    }

    /// The scenario with the config grid applied.
    pub fn resolve_scenario(&self) -> Result<ProblemSpec> {
        let mut spec = match (&self.scenario.preset, &self.scenario.inline) {
            (_, Some(s)) => s.clone().validated()?,
            (Some(name), None) => builtin_scenario(name)?,
            (None, None) => builtin_scenario(self.experiment.default_scenario())?,
        };
        if let Some(g) = self.grid {
            spec.grid = g;
            spec = spec.validated()?;
        }
        Ok(spec)
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub limit: Option<f64>,
}

/// Machine-readable summary written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub scenario: String,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    /// Named scalar or vector results, in insertion order.
    pub metrics: Vec<(String, serde_json::Value)>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

struct Run<'a> {
    out: &'a Path,
    summary: RunSummary,
    log: String,
}

impl Run<'_> {
    fn check(&mut self, name: &str, passed: bool, value: Option<f64>, limit: Option<f64>) {
        let _ = writeln!(
            self.log,
            "check {name}: {} (value {}, limit {})",
            if passed { "pass" } else { "FAIL" },
            value.map_or("-".into(), |v| format!("{v:.6e}")),
            limit.map_or("-".into(), |v| format!("{v:.6e}"))
        );
        self.summary.checks.push(Check { name: name.into(), passed, value, limit });
    }

    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.check(name, value <= limit, Some(value), Some(limit));
    }

    fn metric(&mut self, name: &str, v: impl Serialize) {
        let value = serde_json::to_value(v).unwrap_or(serde_json::Value::Null);
        let _ = writeln!(self.log, "{name} = {value}");
        self.summary.metrics.push((name.into(), value));
    }

    fn note(&mut self, line: &str) {
        let _ = writeln!(self.log, "{line}");
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.summary.files.push(name.into());
        self.out.join(name)
    }
}

/// Runs `cfg`, writing artifacts under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let spec = cfg.resolve_scenario()?;
    if cfg.experiment.is_stochastic() && cfg.seed.is_none() {
        return Err(Error::Config("seed is required for stochastic experiments".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut r = Run {
        out,
        summary: RunSummary {
            experiment: cfg.experiment,
            scenario: spec.name.clone(),
            seed: cfg.seed,
            checks: vec![],
            metrics: vec![],
            files: vec![],
        },
        log: String::new(),
    };
    r.note(&format!("experiment {:?} on scenario {}", cfg.experiment, spec.name));
    r.note(&format!("grid xmax {} nx {} t_end {} nt {}", spec.grid.xmax, spec.grid.nx, spec.grid.t_end, spec.grid.nt));
    match cfg.experiment {
        ExperimentKind::SkorokhodDemo => skorokhod_demo(&mut r, &spec)?,
        ExperimentKind::PenalizationSweep => penalization_sweep(&mut r, &spec, &cfg.params)?,
        ExperimentKind::Mortensen => mortensen(&mut r, &spec, &cfg.params)?,
        ExperimentKind::ViscositySweep => viscosity_sweep(&mut r, &spec, &cfg.params)?,
        ExperimentKind::Filtering => filtering(&mut r, &spec, &cfg.params, cfg.seed.unwrap())?,
        ExperimentKind::Identification => identification(&mut r, &spec, &cfg.params)?,
        ExperimentKind::BoundaryTable => boundary_table(&mut r, &spec, &cfg.params)?,
    }
    let summary_path = r.path("summary.json");
    let log_path = r.path("run.log");
    let passed = r.summary.passed();
    r.note(&format!("overall: {}", if passed { "pass" } else { "FAIL" }));
    let json = serde_json::to_string_pretty(&r.summary).map_err(|e| Error::Invariant(format!("summary encoding: {e}")))?;
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    fs::write(&log_path, &r.log).map_err(|e| Error::io(&log_path, e))?;
    Ok(r.summary)
}

/// Contact-detection tolerance for path experiments.
const CONTACT_TOL: f64 = 1e-9;

fn skorokhod_demo(r: &mut Run, spec: &ProblemSpec) -> Result<()> {
    let omega = ControlSignal::from_func(&spec.omega, &spec.grid);
    let path = if spec.f.is_zero() { solve_explicit(spec.x0, &omega)? } else { solve_vi(spec.x0, &omega, spec)? };
    let inv = path.check_invariants(CONTACT_TOL);
    r.check("skorokhod invariants", inv.is_ok(), None, None);
    r.at_most("decomposition error", path.decomposition_error(), 1e-9);
    let (comp, tv) = path.complementarity();
    r.at_most("complementarity", comp, CONTACT_TOL * (1.0 + tv));
    r.metric("contact_windows", path.contact_windows(CONTACT_TOL));
    r.metric("plateaus", path.plateaus(CONTACT_TOL));
    export_csv(&path, &r.path("path.csv"))
}

fn penalization_sweep(r: &mut Run, spec: &ProblemSpec, p: &Params) -> Result<()> {
    let kappas = p.kappa.clone().unwrap_or_else(|| vec![10.0, 40.0, 160.0]);
    let gaps = penalization_gap(&kappas, spec, &spec.grid)?;
    let decreasing = strictly_decreasing(&gaps);
    r.check("gaps strictly decreasing", decreasing, None, None);
    if gaps.len() > 1 {
        let ratio = gaps[gaps.len() - 1] / gaps[0];
        r.at_most("last gap over first gap", ratio, 1.0 / 3.0);
    }
    r.metric("kappa", &kappas);
    r.metric("gaps", &gaps);
    export_csv(&Columns::new(vec!["kappa", "gap"], vec![kappas, gaps])?, &r.path("gaps.csv"))
}

fn mortensen(r: &mut Run, spec: &ProblemSpec, p: &Params) -> Result<()> {
    let kappa = p.kappa.as_ref().map_or(10.0, |k| *k.last().unwrap());
    let pen = PenaltySpec::new(kappa)?;
    let grid = &spec.grid;
    let cost = cost_to_come_hjb(spec, &pen, grid, &SolverOptions::default())?;
    let trace = mortensen_trace(&cost)?;
    if !cost.field.is_finite() {
        return Err(Error::Invariant("cost-to-come field is not finite".into()));
    }
    let first_ok = cost.field.xs.iter().enumerate().all(|(i, &x)| (cost.field.at(0, i) - spec.psi.eval(x)).abs() <= 1e-12 * (1.0 + spec.psi.eval(x).abs()));
    r.check("initial slice equals psi", first_ok, None, None);
    r.metric("kappa", kappa);
    r.metric("multiple_minima_steps", trace.multiple.iter().filter(|&&m| m).count());
    if let Some(step) = p.control_step {
        let controls = ControlGrid::for_problem(spec, grid, step)?;
        let dp = cost_to_come_dp_field(spec, &pen, grid, &controls)?;
        let window = p.window.unwrap_or([0.0, grid.xmax]);
        let d = cost.field.sup_diff_window(&dp.field, window[0], window[1])?;
        r.at_most("hjb vs dp oracle", d, 5.0 * (grid.dx() + grid.dt() + step));
        export_csv(&dp.field, &r.path("cost_dp.csv"))?;
    }
    export_csv(&cost.field, &r.path("cost.csv"))?;
    export_csv(&trace, &r.path("trace.csv"))
}

fn viscosity_sweep(r: &mut Run, spec: &ProblemSpec, p: &Params) -> Result<()> {
    let ladder = p.eps.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    let window = p.window.unwrap_or([0.0, spec.grid.xmax]);
    let opts = SolverOptions::default();
    let kind = HamiltonianKind::WEps { eps: ladder[0] };
    let rep = vanishing_viscosity_sweep(&kind, spec, &ladder, &spec.grid, (window[0], window[1]), &opts)?;
    r.check("gaps monotone", rep.monotone, None, None);
    r.at_most("inviscid gap over two-grid estimate", rep.inviscid_gap, 3.0 * rep.two_grid_estimate);
    r.metric("eps", &ladder);
    r.metric("gaps", &rep.gaps);
    let to_limit = rep
        .fields
        .iter()
        .map(|f| f.sup_diff_interp(&rep.inviscid, window[0], window[1]))
        .collect::<Result<Vec<_>>>()?;
    r.check("gaps to the inviscid limit strictly decreasing", strictly_decreasing(&to_limit), None, None);
    r.metric("gaps_to_limit", &to_limit);
    r.metric("inviscid_gap", rep.inviscid_gap);
    r.metric("two_grid_estimate", rep.two_grid_estimate);
    let radius = p.radius.unwrap_or(1.0).min(spec.grid.xmax);
    let gate = eps_gate(radius);
    let (mut lips, mut hols) = (vec![], vec![]);
    for (eps, field) in rep.eps.iter().zip(&rep.fields) {
        if *eps > gate {
            continue;
        }
        let b = check_bounds(field, spec, *eps, radius)?;
        r.at_most(&format!("sup bound at eps {eps}"), b.sup, b.rhs);
        lips.push(b.lipschitz);
        hols.push(b.holder);
    }
    if lips.len() >= 2 {
        r.at_most("lipschitz quotient spread", bound_stability(&lips), 0.2);
        r.at_most("holder quotient spread", bound_stability(&hols), 0.2);
    }
    let from: Vec<f64> = ladder.iter().take(ladder.len().saturating_sub(1)).cloned().collect();
    let to: Vec<f64> = ladder.iter().skip(1).cloned().collect();
    export_csv(&Columns::new(vec!["eps_from", "eps_to", "gap"], vec![from, to, rep.gaps.clone()])?, &r.path("gaps.csv"))?;
    export_csv(&rep.inviscid, &r.path("w_inviscid.csv"))?;
    write_field_binary(rep.fields.last().unwrap(), &r.path("w_last.bin"))
}

fn filtering(r: &mut Run, spec: &ProblemSpec, p: &Params, seed: u64) -> Result<()> {
    let eps = p.eps.as_ref().map_or(0.1, |e| e[0]);
    let n = p.particles.unwrap_or(10_000);
    let grid = &spec.grid;
    r.metric("eps", eps);
    r.metric("particles", n);

    let path = simulate_reflected_sde(spec, eps, spec.x0, grid, seed)?;
    r.check("filter path invariants", path.check_invariants(1e-9).is_ok(), None, None);
    export_csv(&path, &r.path("path.csv"))?;

    let q = solve_zakai(spec, eps, grid, FilterDomain::Reflected)?;
    r.check("zakai density nonnegative", q.min_value() >= 0.0, Some(q.min_value()), Some(0.0));
    if spec.h.is_zero() {
        let drift = (1..q.field.n_t()).map(|k| (q.log_mass(k) - q.log_mass(k - 1)).abs()).fold(0.0, f64::max);
        r.at_most("mass conservation per step", drift, 1e-8);
    }
    let pq = robust_transform(&q, spec, eps, Direction::QToP)?;
    let back = robust_transform(&pq, spec, eps, Direction::PToQ)?;
    let rt = q.field.values.iter().zip(&back.field.values).map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    r.at_most("robust transform round trip", rt, 1e-12);
    let s = hopf_cole(&pq, eps)?;
    let p2 = hopf_cole(&inverse_hopf_cole(&s.field, eps, Gauge::P)?, eps)?;
    let hc = s.field.values.iter().zip(&p2.field.values).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
    r.at_most("hopf-cole round trip", hc, 1e-12);
    r.metric("floored_nodes", s.flagged.len());

    let ens = particle_filter_oracle(spec, eps, grid, &ParticleOptions::new(n, seed))?;
    let mut worst: f64 = 0.0;
    let mut zmean = Vec::with_capacity(q.field.n_t());
    let mut zvar = Vec::with_capacity(q.field.n_t());
    for k in 0..q.field.n_t() {
        let (m, v) = q.moments(k);
        zmean.push(m);
        zvar.push(v);
        worst = worst.max((ens.mean[k] - m).abs() / ens.std_error(k));
    }
    r.at_most("particle vs zakai mean (standard errors)", worst, 3.0);
    export_csv(&ens, &r.path("ensemble.csv"))?;
    export_csv(&Columns::new(vec!["t", "mean", "var"], vec![q.field.times.clone(), zmean, zvar])?, &r.path("zakai_moments.csv"))?;
    write_field_binary(&s.field, &r.path("entropy.bin"))?;

    if let Some(ladder) = &p.small_noise_eps {
        let kappa = p.kappa.as_ref().map_or(10.0, |k| *k.last().unwrap());
        let window = p.window.unwrap_or([0.0, 0.75 * grid.xmax]);
        let sn = small_noise_check(spec, &PenaltySpec::new(kappa)?, ladder, grid, (window[0], window[1]))?;
        r.check("small-noise gaps strictly decreasing", sn.decreasing, None, None);
        r.metric("small_noise_gaps", &sn.gaps);
    }
    Ok(())
}

fn level_grid(spec: &ProblemSpec, h: f64) -> Result<GridSpec> {
    let nx = (spec.grid.xmax / h).round() as usize;
    let nt = (spec.grid.t_end / h).round().max(1.0) as usize;
    GridSpec::new(spec.grid.xmax, nx, spec.grid.t_end, nt)
}

fn identification(r: &mut Run, spec: &ProblemSpec, p: &Params) -> Result<()> {
    let levels = p.levels.clone().unwrap_or_else(|| vec![0.1, 0.05]);
    let window = p.window.unwrap_or([0.0, spec.grid.xmax]);
    let mut gaps = Vec::new();
    let mut tols = Vec::new();
    for &h in &levels {
        let g = level_grid(spec, h)?;
        let controls = ControlGrid::for_problem(spec, &g, h)?;
        let w_dp = backward_value_dp(spec, &g, &controls)?;
        let w = solve_inviscid(&HamiltonianKind::WLimit, spec, &g, &SolverOptions::default())?;
        let gap = identify_with_limit(&w_dp, &w, (window[0], window[1]))?;
        r.note(&format!("level {h}: ‖W - w‖ = {gap:.6e}"));
        gaps.push(gap);
        tols.push(5.0 * (g.dx() + g.dt() + h));
    }
    r.check("gap decreases under refinement", strictly_decreasing(&gaps), None, None);
    r.at_most("finest gap", *gaps.last().unwrap(), *tols.last().unwrap());
    r.metric("levels", &levels);
    r.metric("gaps", &gaps);
    export_csv(&Columns::new(vec!["h", "gap", "tolerance"], vec![levels, gaps, tols])?, &r.path("identification.csv"))
}

fn boundary_table(r: &mut Run, spec: &ProblemSpec, p: &Params) -> Result<()> {
    let h = p.control_step.unwrap_or(0.05);
    let kappa = p.kappa.as_ref().map_or(100.0, |k| *k.last().unwrap());
    let g = level_grid(spec, h)?;
    let controls = ControlGrid::for_problem(spec, &g, h)?;
    let rows = boundary_discrepancy_table(spec, &PenaltySpec::new(kappa)?, &g, &controls, &default_table_points(&g))?;
    let tol = 5.0 * (g.dx() + g.dt() + h);
    let interior: Vec<_> = rows.iter().filter(|row| row.reflection_free).collect();
    let worst = interior.iter().map(|row| row.gap).fold(0.0, f64::max);
    r.at_most("interior rows |V - W|", worst, tol);
    r.metric("interior_rows", interior.len());
    r.metric("boundary_rows", rows.len() - interior.len());
    for row in &rows {
        r.note(&format!(
            "row x {:.4} t {:.4}: V {:.6} W {:.6} V_pen {:.6} gap {:.3e}{}",
            row.x,
            row.t,
            row.v_constrained,
            row.w,
            row.v_penalized,
            row.gap,
            if row.reflection_free { "" } else { " (touches 0)" }
        ));
    }
    export_csv(rows.as_slice(), &r.path("table.csv"))
}

/// Viscous solve used by the book; kept here so the guide and the runner
/// agree on defaults.
pub fn default_viscous(spec: &ProblemSpec, eps: f64) -> Result<crate::field::ScalarField> {
    solve_viscous(&HamiltonianKind::WEps { eps }, spec, &spec.grid, &SolverOptions::default())
}
