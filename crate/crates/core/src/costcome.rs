//! Cost-to-come of the penalized and of the constrained dynamics, and the
//! minimum-energy (Mortensen) estimate.
//!
//! The penalized cost-to-come `V^κ` is computed two ways: by the HJB solver
//! and by a semi-Lagrangian dynamic-programming oracle built on the reversed
//! penalized flow. The constrained cost `V` is computed by a grid dynamic
//! program over forward constrained steps, then confirmed by forward
//! shooting through the projected Euler scheme.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{interp_uniform, ScalarField};
use crate::hjb::{solve_inviscid, HamiltonianKind, SolverOptions};
use crate::scenario::{GridSpec, PenaltySpec, ProblemSpec};
use crate::skorokhod::{solve_vi, ControlSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Hjb,
    DpOracle,
    ForwardShooting,
}

/// A cost field on `[0, xmax]` tagged with how it was computed.
#[derive(Debug, Clone)]
pub struct CostField {
    pub field: ScalarField,
    pub provenance: Provenance,
}

/// Quantized control values, symmetric around 0 and containing 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub values: Vec<f64>,
    pub step: f64,
}

impl ControlGrid {
    /// `{k·step : |k·step| <= bound}` enlarged to cover `bound`.
    pub fn uniform(bound: f64, step: f64) -> Result<ControlGrid> {
        if !(step > 0.0) || !(bound >= 0.0) {
            return Err(Error::Input(format!("control grid needs step > 0 and bound >= 0, got {step}, {bound}")));
        }
        let k = (bound / step - 1e-9).ceil().max(0.0) as i64;
        Ok(ControlGrid { values: (-k..=k).map(|i| i as f64 * step).collect(), step })
    }

    /// Bound `2 (‖f‖ + xmax/T + ‖ẏ - h‖∞)`: any larger control costs more
    /// than the zero-control incumbent.
    pub fn default_bound(spec: &ProblemSpec, grid: &GridSpec) -> f64 {
        2.0 * (spec.f_sup() + grid.xmax / grid.t_end + spec.innovation_sup(grid))
    }

    pub fn for_problem(spec: &ProblemSpec, grid: &GridSpec, step: f64) -> Result<ControlGrid> {
        ControlGrid::uniform(ControlGrid::default_bound(spec, grid), step)
    }

    fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Input("control grid is empty".into()));
        }
        Ok(())
    }
}

/// Running cost `½ω² + ½(ẏ(t) - h(x))²`.
#[inline]
pub fn running_cost(spec: &ProblemSpec, omega: f64, x: f64, t: f64) -> f64 {
    let r = spec.ydot.eval(t) - spec.h.eval(x);
    0.5 * omega * omega + 0.5 * r * r
}

/// `V^κ` from the inviscid HJB on the symmetric window, restricted to
/// `[0, xmax]`.
pub fn cost_to_come_hjb(spec: &ProblemSpec, pen: &PenaltySpec, grid: &GridSpec, opts: &SolverOptions) -> Result<CostField> {
    let field = solve_inviscid(&HamiltonianKind::PenalizedCostToCome { pen: *pen }, spec, grid, opts)?;
    Ok(CostField { field, provenance: Provenance::Hjb })
}

fn reverse_foot(spec: &ProblemSpec, pen: &PenaltySpec, x: f64, omega: f64, dt: f64, substeps: usize) -> f64 {
    let h = dt / substeps as f64;
    let mut z = x;
    for _ in 0..substeps {
        z -= h * (spec.penalized_drift(pen, z) + omega);
    }
    z
}

/// Semi-Lagrangian dynamic program for `V^κ` on the symmetric window:
/// `V(x, t+Δt) = min_ω V(x_rev, t) + Δt ℓ(ω, x, t+Δt)`, where `x_rev` is
/// one step of the reversed penalized flow from `x` under `ω`. Returned on
/// `[0, xmax]`.
pub fn cost_to_come_dp_field(spec: &ProblemSpec, pen: &PenaltySpec, grid: &GridSpec, controls: &ControlGrid) -> Result<CostField> {
    controls.check()?;
    let xs = grid.xs_symmetric();
    let times = grid.times();
    let dt = grid.dt();
    let dx = grid.dx();
    let lip = spec.f_lipschitz();
    let substeps = ((dt * (2.0 * pen.kappa + lip)) / 0.5).ceil().max(1.0) as usize;
    let mut v: Vec<f64> = xs.iter().map(|&x| spec.psi.eval(x)).collect();
    let mut values = Vec::with_capacity(xs.len() * times.len());
    values.extend_from_slice(&v);
    for n in 0..grid.nt {
        let t1 = times[n + 1];
        let next: Vec<f64> = xs
            .par_iter()
            .map(|&x| {
                controls
                    .values
                    .iter()
                    .map(|&w| {
                        let z = reverse_foot(spec, pen, x, w, dt, substeps);
                        interp_uniform(xs[0], dx, &v, z) + dt * running_cost(spec, w, x, t1)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        v = next;
        values.extend_from_slice(&v);
    }
    let full = ScalarField::new(times, xs, values)?;
    Ok(CostField { field: full.restrict(0.0, grid.xmax), provenance: Provenance::DpOracle })
}

fn time_index(grid: &GridSpec, t: f64) -> Result<usize> {
    let s = t / grid.dt();
    let n = s.round();
    if (s - n).abs() > 1e-9 || n < 0.0 || n as usize > grid.nt {
        return Err(Error::Input(format!("t = {t} is not a node of the time grid")));
    }
    Ok(n as usize)
}

/// Pointwise oracle value `V^κ(x, t)`; `t` must be a time node of `grid`.
pub fn cost_to_come_dp_oracle(spec: &ProblemSpec, pen: &PenaltySpec, x: f64, t: f64, controls: &ControlGrid, grid: &GridSpec) -> Result<f64> {
    let n = time_index(grid, t)?;
    let sub = GridSpec { t_end: n.max(1) as f64 * grid.dt(), nt: n.max(1), ..*grid };
    let f = cost_to_come_dp_field(spec, pen, &sub, controls)?;
    Ok(f.field.interp(if n == 0 { 0 } else { sub.nt }, x))
}

/// Per-time argmin of a cost field.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorTrace {
    pub times: Vec<f64>,
    pub xhat: Vec<f64>,
    pub value: Vec<f64>,
    /// Another local minimum matches the minimum within grid tolerance.
    pub multiple: Vec<bool>,
}

const TIE_TOL: f64 = 1e-9;

/// Argmin per time slice with parabolic sub-grid refinement. Ties go to
/// the smallest x and are flagged.
pub fn mortensen_trace(cost: &CostField) -> Result<EstimatorTrace> {
    let f = &cost.field;
    let dx = f.dx();
    let nx = f.n_x();
    let mut out = EstimatorTrace { times: f.times.clone(), xhat: vec![], value: vec![], multiple: vec![] };
    for n in 0..f.n_t() {
        let s = f.slice(n);
        let mut best = None;
        for (i, &v) in s.iter().enumerate() {
            if v.is_finite() && best.map_or(true, |b: usize| v < s[b]) {
                best = Some(i);
            }
        }
        let i = best.ok_or_else(|| Error::Invariant(format!("cost slice {n} has no finite value")))?;
        let vmin = s[i];
        let tol = TIE_TOL * (1.0 + vmin.abs());
        let multiple = (0..nx).any(|j| {
            j.abs_diff(i) > 1
                && s[j] <= vmin + tol
                && (j == 0 || s[j - 1] >= s[j])
                && (j + 1 == nx || s[j + 1] >= s[j])
        });
        let (mut x, mut v) = (f.xs[i], vmin);
        if i > 0 && i + 1 < nx {
            let (a, b, c) = (s[i - 1], s[i], s[i + 1]);
            let curv = a - 2.0 * b + c;
            if curv > 0.0 {
                let off = (0.5 * (a - c) / curv).clamp(-0.5, 0.5);
                x += off * dx;
                v = b - 0.125 * (a - c) * (a - c) / curv;
            }
        }
        out.xhat.push(x);
        out.value.push(v);
        out.multiple.push(multiple);
    }
    Ok(out)
}

/// Constrained cost-to-come `V` on `[0, xmax]` by dynamic programming over
/// forward projected steps `z ↦ max(0, z + Δt (f(z) + ω))`.
///
/// A node `x > 0` is reached from `z = x - Δt (f(x) + ω)` when `z ≥ 0`. The
/// origin is reached from every `z` in `[0, -Δt ω]` (the push absorbs the
/// overshoot), so the boundary backup minimizes over that whole interval.
pub fn constrained_cost_field(spec: &ProblemSpec, grid: &GridSpec, controls: &ControlGrid) -> Result<CostField> {
    controls.check()?;
    let xs = grid.xs();
    let times = grid.times();
    let mut v: Vec<f64> = xs.iter().map(|&x| spec.psi.eval(x)).collect();
    let mut values = Vec::with_capacity(xs.len() * times.len());
    values.extend_from_slice(&v);
    for n in 0..grid.nt {
        let t1 = times[n + 1];
        let prev = &v;
        let next: Vec<f64> = xs
            .par_iter()
            .map(|&x| constrained_backup(spec, grid, controls, prev, x, t1).0)
            .collect();
        v = next;
        values.extend_from_slice(&v);
    }
    Ok(CostField { field: ScalarField::new(times, xs, values)?, provenance: Provenance::ForwardShooting })
}

/// Minimum over controls of the constrained backup at an arbitrary point
/// `x ≥ 0`. Returns `(value, control, foot)`.
fn constrained_backup(spec: &ProblemSpec, grid: &GridSpec, controls: &ControlGrid, prev: &[f64], x: f64, t1: f64) -> (f64, f64, f64) {
    let dt = grid.dt();
    let dx = grid.dx();
    let mut best = (f64::INFINITY, 0.0, x);
    let at_origin = x <= 1e-12 * dx;
    for &w in &controls.values {
        let cost = dt * running_cost(spec, w, x, t1);
        if at_origin {
            if w > 0.0 {
                continue;
            }
            let (m, z) = min_on_interval(prev, dx, -dt * w);
            if m + cost < best.0 {
                best = (m + cost, w, z);
            }
        } else {
            let z = x - dt * (spec.f.eval(x) + w);
            if z < 0.0 {
                continue;
            }
            let m = interp_uniform(0.0, dx, prev, z);
            if m + cost < best.0 {
                best = (m + cost, w, z);
            }
        }
    }
    best
}

/// Min of the piecewise-linear interpolant of `v` on `[0, b]` and its
/// location.
fn min_on_interval(v: &[f64], dx: f64, b: f64) -> (f64, f64) {
    let mut best = (v[0], 0.0);
    let last = (b / dx).floor() as usize;
    for (i, &vi) in v.iter().enumerate().take(last.min(v.len() - 1) + 1).skip(1) {
        if vi < best.0 {
            best = (vi, i as f64 * dx);
        }
    }
    let vb = interp_uniform(0.0, dx, v, b);
    if vb < best.0 {
        best = (vb, b);
    }
    best
}

/// Outcome of forward shooting toward `(x, t)`.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// `J` evaluated along the simulated forward constrained path.
    pub cost: f64,
    /// Dynamic-programming value at the target.
    pub dp_value: f64,
    pub x0: f64,
    pub landing: f64,
    pub control: ControlSignal,
    /// The simulated path reached the origin at some step.
    pub touched_boundary: bool,
    /// The landing needed the widened two-cell window.
    pub widened: bool,
}

/// Forward shooting for the constrained cost-to-come with a given DP field.
///
/// The DP policy is traced back from the target to an initial state, then
/// the control sequence is replayed through the projected Euler scheme and
/// the cost is re-evaluated along that forward path. The landing must fall
/// within one cell of `x`; the window is widened once to two cells before
/// giving up.
pub fn shoot_constrained(spec: &ProblemSpec, grid: &GridSpec, controls: &ControlGrid, dp: &CostField, x: f64, t: f64) -> Result<ShootingResult> {
    if x < 0.0 {
        return Err(Error::Domain(format!("target must be nonnegative, got {x}")));
    }
    let n_end = time_index(grid, t)?;
    let dx = grid.dx();
    let f = &dp.field;
    let mut omega = vec![0.0; n_end];
    let mut z = x;
    for n in (0..n_end).rev() {
        let (_, w, foot) = constrained_backup(spec, grid, controls, f.slice(n), z, f.times[n + 1]);
        omega[n] = w;
        z = foot.max(0.0);
    }
    let x0 = z;
    let dp_value = f.interp(n_end, x);
    if n_end == 0 {
        return Ok(ShootingResult {
            cost: spec.psi.eval(x),
            dp_value,
            x0: x,
            landing: x,
            control: ControlSignal { times: vec![0.0], omega: vec![] },
            touched_boundary: x == 0.0,
            widened: false,
        });
    }
    let times: Vec<f64> = f.times[..=n_end].to_vec();
    let control = ControlSignal::new(times.clone(), omega)?;
    let path = solve_vi(x0, &control, spec)?;
    let mut cost = spec.psi.eval(x0);
    for n in 0..n_end {
        cost += control.dt(n) * running_cost(spec, control.omega[n], path.x[n + 1], times[n + 1]);
    }
    let landing = path.x[n_end];
    let miss = (landing - x).abs();
    let widened = miss > dx * (1.0 + 1e-9);
    if widened && miss > 2.0 * dx * (1.0 + 1e-9) {
        return Err(Error::NoLanding { x, t, tol: 2.0 * dx });
    }
    let touched_boundary = path.x.iter().any(|&p| p <= 1e-12);
    Ok(ShootingResult { cost, dp_value, x0, landing, control, touched_boundary, widened })
}

/// `V(x, t)` by forward shooting (builds the DP field on `grid` first).
pub fn constrained_cost_forward_shooting(spec: &ProblemSpec, x: f64, t: f64, controls: &ControlGrid, grid: &GridSpec) -> Result<f64> {
    let dp = constrained_cost_field(spec, grid, controls)?;
    Ok(shoot_constrained(spec, grid, controls, &dp, x, t)?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, Func};

    #[test]
    fn control_grid_contains_zero_and_bound() {
        let c = ControlGrid::uniform(1.0, 0.3).unwrap();
        assert!(c.values.contains(&0.0));
        assert!(*c.values.last().unwrap() >= 1.0);
        assert!(ControlGrid::uniform(1.0, 0.0).is_err());
        let s = builtin_scenario("quadratic").unwrap();
        assert_eq!(ControlGrid::default_bound(&s, &s.grid), 8.0);
    }

    #[test]
    fn zero_problem_costs_nothing() {
        let s = builtin_scenario("zero").unwrap();
        let pen = PenaltySpec::new(10.0).unwrap();
        let c = ControlGrid::uniform(2.0, 0.5).unwrap();
        let g = GridSpec::new(4.0, 16, 1.0, 4).unwrap();
        let v = cost_to_come_dp_field(&s, &pen, &g, &c).unwrap();
        assert!(v.field.values.iter().all(|&x| x == 0.0));
        assert_eq!(cost_to_come_dp_oracle(&s, &pen, 1.5, 0.5, &c, &g).unwrap(), 0.0);
        assert_eq!(constrained_cost_forward_shooting(&s, 2.0, 1.0, &c, &g).unwrap(), 0.0);
        let h = cost_to_come_hjb(&s, &pen, &g, &SolverOptions::default()).unwrap();
        assert!(h.field.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oracle_at_time_zero_is_psi() {
        let s = builtin_scenario("quadratic").unwrap();
        let pen = PenaltySpec::new(10.0).unwrap();
        let c = ControlGrid::uniform(8.0, 0.5).unwrap();
        let g = s.grid;
        assert_eq!(cost_to_come_dp_oracle(&s, &pen, 2.0, 0.0, &c, &g).unwrap(), 0.5);
        assert!(cost_to_come_dp_oracle(&s, &pen, 2.0, 0.05, &c, &g).is_err());
        let empty = ControlGrid { values: vec![], step: 1.0 };
        assert!(cost_to_come_dp_field(&s, &pen, &g, &empty).is_err());
    }

    #[test]
    fn quadratic_closed_form() {
        let s = builtin_scenario("quadratic").unwrap();
        let pen = PenaltySpec::new(10.0).unwrap();
        let g = GridSpec::new(4.0, 80, 1.0, 20).unwrap();
        let v = cost_to_come_hjb(&s, &pen, &g, &SolverOptions::default()).unwrap();
        let exact = |x: f64, t: f64| (x - 1.0).powi(2) / (2.0 * (1.0 + t));
        let oracle = ScalarField::from_fn(&v.field.times, &v.field.xs, exact);
        assert!(v.field.sup_diff_window(&oracle, 0.0, 3.0).unwrap() < 0.1);
        let tr = mortensen_trace(&v).unwrap();
        assert!(tr.xhat.iter().all(|&x| (x - 1.0).abs() <= g.dx()));
        assert!(tr.multiple.iter().all(|&m| !m));
    }

    #[test]
    fn shifting_psi_shifts_cost() {
        let s = builtin_scenario("boundary-probe").unwrap();
        let mut t = s.clone();
        t.psi = Func::sum(vec![s.psi.clone(), Func::constant(0.75)]);
        let pen = PenaltySpec::new(10.0).unwrap();
        let c = ControlGrid::uniform(4.0, 0.25).unwrap();
        let a = cost_to_come_dp_field(&s, &pen, &s.grid, &c).unwrap();
        let b = cost_to_come_dp_field(&t, &pen, &s.grid, &c).unwrap();
        for (p, q) in a.field.values.iter().zip(&b.field.values) {
            assert!((q - p - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn two_wells_flag_multiplicity() {
        let mut s = builtin_scenario("zero").unwrap();
        // wells at 1 and 3, symmetric about the node x = 2
        s.psi = Func::product(vec![Func::poly(&[-1.0, 1.0]), Func::poly(&[-1.0, 1.0]), Func::poly(&[-3.0, 1.0]), Func::poly(&[-3.0, 1.0])]);
        let g = GridSpec::new(4.0, 40, 1.0, 1).unwrap();
        let field = ScalarField::from_fn(&g.times(), &g.xs(), |x, _| s.psi.eval(x));
        let tr = mortensen_trace(&CostField { field, provenance: Provenance::Hjb }).unwrap();
        assert!(tr.multiple[0]);
        assert!((tr.xhat[0] - 1.0).abs() < 0.01, "{:?}", tr.xhat);
    }

    #[test]
    fn trace_rejects_infinite_slice() {
        let field = ScalarField::from_fn(&[0.0], &[0.0, 1.0, 2.0], |_, _| f64::INFINITY);
        assert!(mortensen_trace(&CostField { field, provenance: Provenance::Hjb }).is_err());
    }

    #[test]
    fn shooting_lands_and_matches_dp_in_the_interior() {
        let s = builtin_scenario("quadratic").unwrap();
        let g = GridSpec::new(4.0, 40, 1.0, 10).unwrap();
        let c = ControlGrid::for_problem(&s, &g, 0.1).unwrap();
        let dp = constrained_cost_field(&s, &g, &c).unwrap();
        for &x in &[0.5, 1.0, 2.5] {
            let r = shoot_constrained(&s, &g, &c, &dp, x, 1.0).unwrap();
            assert!((r.landing - x).abs() < 1e-9);
            assert!(!r.widened);
            assert!((r.cost - r.dp_value).abs() < 0.02, "{} vs {}", r.cost, r.dp_value);
            let exact = (x - 1.0).powi(2) / 4.0;
            assert!((r.cost - exact).abs() < 0.05);
        }
    }

    #[test]
    fn shooting_to_origin() {
        let s = builtin_scenario("boundary-probe").unwrap();
        let c = ControlGrid::for_problem(&s, &s.grid, 0.2).unwrap();
        let dp = constrained_cost_field(&s, &s.grid, &c).unwrap();
        let r = shoot_constrained(&s, &s.grid, &c, &dp, 0.0, 1.0).unwrap();
        assert!(r.landing.abs() <= s.grid.dx());
        assert!(r.touched_boundary);
        assert!(r.cost.is_finite());
    }
}
