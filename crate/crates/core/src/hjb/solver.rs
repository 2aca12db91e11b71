//! Explicit monotone scheme: local Lax–Friedrichs for the Hamiltonian plus
//! a centered second difference for the viscosity.

use super::{drift_potential, HamiltonianKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scenario::{GridSpec, ProblemSpec};

/// Scheme controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Safety factor on the monotonicity bound.
    pub theta: f64,
    /// Enlargement of the local dissipation coefficient.
    pub alpha_margin: f64,
    /// Split each grid step into as many stable sub-steps as needed. When
    /// false a grid step above the stable bound is a CFL error.
    pub substep: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { theta: 0.9, alpha_margin: 1.1, substep: true }
    }
}

/// Treatment of the left end of the computational interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Ghost node by linear extrapolation (free boundary).
    Extrapolate,
    /// Ghost node `u_{-1} = u_1`: the even reflection at `x = 0`.
    Reflect,
}

/// Fills the potential on the nodes at time `t`.
pub(crate) type PotentialFn<'a> = Box<dyn Fn(f64, &mut [f64]) + 'a>;

/// Coefficients of `∂ₜu + ½u_x² + b u_x - V = (ε/2) u_xx` on uniform nodes.
pub(crate) struct Problem<'a> {
    pub xs: Vec<f64>,
    pub drift: Vec<f64>,
    pub potential: PotentialFn<'a>,
    pub eps: f64,
    pub left: Boundary,
}

/// One explicit stage: fills `rate` with `-Ĥ + (ε/2) Δu` and returns the
/// largest stable step.
#[allow(clippy::too_many_arguments)]
fn stage(u: &[f64], b: &[f64], v: &[f64], dx: f64, eps: f64, margin: f64, left: Boundary, theta: f64, rate: &mut [f64]) -> f64 {
    let n = u.len();
    let inv = 1.0 / dx;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let um = if i > 0 {
            u[i - 1]
        } else {
            match left {
                Boundary::Extrapolate => 2.0 * u[0] - u[1],
                Boundary::Reflect => u[1],
            }
        };
        let up = if i + 1 < n { u[i + 1] } else { 2.0 * u[n - 1] - u[n - 2] };
        let pm = (u[i] - um) * inv;
        let pp = (up - u[i]) * inv;
        let avg = 0.5 * (pm + pp);
        let alpha = margin * (pm + b[i]).abs().max((pp + b[i]).abs());
        let ham = 0.5 * avg * avg + b[i] * avg - v[i] - 0.5 * alpha * (pp - pm);
        // pair the neighbors first so mirrored nodes round identically
        let lap = ((up + um) - 2.0 * u[i]) * inv * inv;
        rate[i] = -ham + 0.5 * eps * lap;
        worst = worst.max(alpha * inv + eps * inv * inv);
    }
    if worst > 0.0 {
        theta / worst
    } else {
        f64::INFINITY
    }
}

/// Marches `u0` over `times`, returning all slices time-major.
pub(crate) fn evolve(p: &Problem<'_>, u0: Vec<f64>, times: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = u0.len();
    let dx = p.xs[1] - p.xs[0];
    let mut u = u0;
    let mut v = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut out = Vec::with_capacity(n * times.len());
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    out.extend_from_slice(&u);
    for step in 0..times.len() - 1 {
        let (t0, t1) = (times[step], times[step + 1]);
        let mut t = t0;
        loop {
            let remaining = t1 - t;
            if remaining <= 1e-14 * t1.abs().max(1.0) {
                break;
            }
            (p.potential)(t, &mut v);
            let stable = stage(&u, &p.drift, &v, dx, p.eps, opts.alpha_margin, p.left, opts.theta, &mut rate);
            if !opts.substep && (t1 - t0) > stable * (1.0 + 1e-12) {
                return Err(Error::Cfl { dt: t1 - t0, required: stable });
            }
            let h = if stable >= remaining { remaining } else { stable };
            for i in 0..n {
                u[i] += h * rate[i];
            }
            t = if h == remaining { t1 } else { t + h };
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        out.extend_from_slice(&u);
    }
    Ok(out)
}

fn problem_for<'a>(kind: HamiltonianKind, spec: &'a ProblemSpec, xs: Vec<f64>, eps: f64, left: Boundary) -> Problem<'a> {
    let drift = xs.iter().map(|&x| drift_potential(&kind, spec, x, 0.0).0).collect();
    let nodes = xs.clone();
    Problem {
        xs,
        drift,
        potential: Box::new(move |t, v: &mut [f64]| {
            for (vi, &x) in v.iter_mut().zip(&nodes) {
                *vi = drift_potential(&kind, spec, x, t).1;
            }
        }),
        eps,
        left,
    }
}

fn symmetric_w(spec: &ProblemSpec, grid: &GridSpec, eps: f64, opts: &SolverOptions) -> Result<ScalarField> {
    let xs = grid.xs_symmetric();
    let u0 = xs.iter().map(|&x| spec.w0(x.abs())).collect();
    let kind = HamiltonianKind::WEpsSymmetrized { eps };
    let times = grid.times();
    let p = problem_for(kind, spec, xs.clone(), eps, Boundary::Extrapolate);
    let values = evolve(&p, u0, &times, opts)?;
    ScalarField::new(times, xs, values)
}

fn add_yh(spec: &ProblemSpec, w: ScalarField) -> ScalarField {
    w.map(|x, t, v| v + spec.y.eval(t) * spec.h.eval(x))
}

fn half(field: ScalarField, grid: &GridSpec) -> ScalarField {
    field.restrict(0.0, grid.xmax)
}

/// Viscous solve of the w or S equation through the even extension.
///
/// The datum `w0 = ψ` is extended by `w0(|x|)` and evolved on
/// `[-xmax, xmax]` with the symmetrized Hamiltonian; the result is the
/// restriction to `[0, xmax]`. The S gauge is recovered as `w + y h`.
pub fn solve_viscous(kind: &HamiltonianKind, spec: &ProblemSpec, grid: &GridSpec, opts: &SolverOptions) -> Result<ScalarField> {
    let eps = viscous_eps(kind)?;
    let w = half(symmetric_w(spec, grid, eps, opts)?, grid);
    Ok(if kind.is_s_gauge() { add_yh(spec, w) } else { w })
}

/// The internal even field on `[-xmax, xmax]` (w gauge).
pub fn solve_viscous_extended(kind: &HamiltonianKind, spec: &ProblemSpec, grid: &GridSpec, opts: &SolverOptions) -> Result<ScalarField> {
    let eps = viscous_eps(kind)?;
    symmetric_w(spec, grid, eps, opts)
}

fn viscous_eps(kind: &HamiltonianKind) -> Result<f64> {
    match *kind {
        HamiltonianKind::WEps { eps }
        | HamiltonianKind::SEps { eps }
        | HamiltonianKind::WEpsSymmetrized { eps } => {
            if eps > 0.0 && eps.is_finite() {
                Ok(eps)
            } else {
                Err(Error::Input(format!("viscosity must be positive, got {eps}")))
            }
        }
        k => Err(Error::Input(format!("{k:?} is not a viscous Hamiltonian"))),
    }
}

/// Inviscid monotone solve.
///
/// `WLimit`/`SLimit` are solved on `[0, xmax]` with the reflected ghost node
/// at the origin (the discrete form of the viscosity Neumann condition,
/// identical to restricting the even extension). `PenalizedCostToCome` is
/// solved on `[-xmax, xmax]` with free ends and restricted to `[0, xmax]`.
pub fn solve_inviscid(kind: &HamiltonianKind, spec: &ProblemSpec, grid: &GridSpec, opts: &SolverOptions) -> Result<ScalarField> {
    let times = grid.times();
    match *kind {
        HamiltonianKind::WLimit | HamiltonianKind::SLimit => {
            let xs = grid.xs();
            let u0 = xs.iter().map(|&x| spec.w0(x)).collect();
            let p = problem_for(HamiltonianKind::WLimit, spec, xs.clone(), 0.0, Boundary::Reflect);
            let w = ScalarField::new(times.clone(), xs, evolve(&p, u0, &times, opts)?)?;
            Ok(if kind.is_s_gauge() { add_yh(spec, w) } else { w })
        }
        HamiltonianKind::PenalizedCostToCome { .. } => {
            let full = solve_cost_to_come_full(kind, spec, grid, opts)?;
            Ok(half(full, grid))
        }
        k => Err(Error::Input(format!("{k:?} is not an inviscid Hamiltonian"))),
    }
}

/// Penalized cost-to-come on the whole symmetric window.
pub(crate) fn solve_cost_to_come_full(kind: &HamiltonianKind, spec: &ProblemSpec, grid: &GridSpec, opts: &SolverOptions) -> Result<ScalarField> {
    let times = grid.times();
    let xs = grid.xs_symmetric();
    let u0 = xs.iter().map(|&x| spec.psi.eval(x)).collect();
    let p = problem_for(*kind, spec, xs.clone(), 0.0, Boundary::Extrapolate);
    ScalarField::new(times.clone(), xs, evolve(&p, u0, &times, opts)?)
}

/// Max over interior nodes in `[a, b]` and steps of the monotone-scheme
/// residual `(u^{n+1} - u^n)/Δt + Ĥ(u^{n+1})` of the inviscid w equation
/// with the reflected ghost node at `x = 0`.
pub fn scheme_residual(field: &ScalarField, spec: &ProblemSpec, a: f64, b: f64) -> f64 {
    let xs = &field.xs;
    let dx = field.dx();
    let drift: Vec<f64> = xs.iter().map(|&x| spec.f.eval(x)).collect();
    let mut v = vec![0.0; xs.len()];
    let mut rate = vec![0.0; xs.len()];
    let idx = field.window_indices(a, b);
    let mut m: f64 = 0.0;
    for n in 0..field.n_t() - 1 {
        let t1 = field.times[n + 1];
        for (vi, &x) in v.iter_mut().zip(xs) {
            *vi = drift_potential(&HamiltonianKind::WLimit, spec, x, t1).1;
        }
        stage(field.slice(n + 1), &drift, &v, dx, 0.0, 1.0, Boundary::Reflect, 1.0, &mut rate);
        let dt = t1 - field.times[n];
        for &i in &idx {
            let r = (field.at(n + 1, i) - field.at(n, i)) / dt - rate[i];
            m = m.max(r.abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, Func, PenaltySpec};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn constant_datum_is_preserved() {
        let mut s = builtin_scenario("zero").unwrap();
        s.psi = Func::constant(2.5);
        let g = s.grid;
        for eps in [0.3, 0.01] {
            let w = solve_viscous(&HamiltonianKind::WEps { eps }, &s, &g, &opts()).unwrap();
            assert!(w.values.iter().all(|&v| v == 2.5));
        }
        let w = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &opts()).unwrap();
        assert!(w.values.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn constant_observation_gives_half_t() {
        let s = builtin_scenario("constant-obs").unwrap();
        let g = s.grid;
        for kind in [HamiltonianKind::WEps { eps: 0.1 }, HamiltonianKind::WEps { eps: 0.01 }] {
            let w = solve_viscous(&kind, &s, &g, &opts()).unwrap();
            for (n, t) in w.times.iter().enumerate() {
                for &v in w.slice(n) {
                    assert!((v - 0.5 * t).abs() < 1e-10);
                }
            }
        }
        let w = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &opts()).unwrap();
        assert!((w.at(g.nt, 3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extension_is_exactly_even() {
        let s = builtin_scenario("figure1").unwrap();
        let g = GridSpec::new(10.0, 100, 1.0, 20).unwrap();
        let e = solve_viscous_extended(&HamiltonianKind::WEps { eps: 0.2 }, &s, &g, &opts()).unwrap();
        let m = g.nx;
        for n in 0..e.n_t() {
            for j in 0..=m {
                assert_eq!(e.at(n, m + j), e.at(n, m - j));
            }
        }
    }

    #[test]
    fn reflected_half_grid_equals_even_extension() {
        // with ε = 0 the half-grid reflected solve and the restriction of
        // the symmetric solve coincide
        let s = builtin_scenario("boundary-probe").unwrap();
        let g = s.grid;
        let half = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &opts()).unwrap();
        let xs = g.xs_symmetric();
        let u0 = xs.iter().map(|&x| s.w0(x.abs())).collect();
        let p = problem_for(HamiltonianKind::WEpsSymmetrized { eps: 0.0 }, &s, xs.clone(), 0.0, Boundary::Extrapolate);
        let full = ScalarField::new(g.times(), xs, evolve(&p, u0, &g.times(), &opts()).unwrap()).unwrap();
        let r = full.restrict(0.0, g.xmax);
        assert!(r.sup_diff_window(&half, 0.0, 3.5).unwrap() < 1e-12);
    }

    #[test]
    fn hopf_lax_for_free_hamiltonian() {
        let mut s = builtin_scenario("zero").unwrap();
        s.psi = Func::sum(vec![Func::constant(1.0), Func::Gauss { amp: -1.0, center: 2.0, width: 0.4 }]);
        let err = |nx: usize| {
            let g = GridSpec::new(4.0, nx, 0.5, 10).unwrap();
            let w = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &opts()).unwrap();
            let xs = g.xs();
            let mut m: f64 = 0.0;
            for (n, &t) in g.times().iter().enumerate().skip(1) {
                for (i, &x) in xs.iter().enumerate() {
                    if !(1.0..=3.0).contains(&x) {
                        continue;
                    }
                    let hl = xs
                        .iter()
                        .map(|&z| s.w0(z) + (x - z).powi(2) / (2.0 * t))
                        .fold(f64::INFINITY, f64::min);
                    m = m.max((w.at(n, i) - hl).abs());
                }
            }
            m
        };
        let (a, b) = (err(200), err(400));
        assert!(a < 0.05 && b < 0.7 * a, "{a} {b}");
    }

    #[test]
    fn monotone_scheme_comparison() {
        let s = builtin_scenario("figure1").unwrap();
        // a common fixed step: the comparison is a property of one scheme
        let g = GridSpec::new(10.0, 100, 1.0, 400).unwrap();
        let o = SolverOptions { substep: false, ..opts() };
        let mut lo = s.clone();
        lo.psi = Func::sum(vec![s.psi.clone(), Func::Gauss { amp: -0.5, center: 3.0, width: 0.3 }]);
        let a = solve_inviscid(&HamiltonianKind::WLimit, &lo, &g, &o).unwrap();
        let b = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &o).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(p, q)| p <= q));
    }

    #[test]
    fn cfl_error_names_required_step() {
        let s = builtin_scenario("constant-obs").unwrap();
        let g = GridSpec::new(4.0, 80, 1.0, 2).unwrap();
        let o = SolverOptions { substep: false, ..opts() };
        match solve_viscous(&HamiltonianKind::WEps { eps: 0.1 }, &s, &g, &o) {
            Err(Error::Cfl { dt, required }) => {
                assert_eq!(dt, 0.5);
                assert!((required - 0.9 * (0.05f64).powi(2) / 0.1).abs() < 1e-12);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn nan_is_reported_with_step() {
        let mut s = builtin_scenario("zero").unwrap();
        s.h = Func::Samples { start: 0.0, step: 1.0, values: vec![0.0, f64::NAN] };
        let g = GridSpec::new(4.0, 8, 1.0, 4).unwrap();
        let e = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &opts()).unwrap_err();
        assert!(matches!(e, Error::NonFinite { step: 1 }), "{e}");
    }

    #[test]
    fn rejects_wrong_kind() {
        let s = builtin_scenario("zero").unwrap();
        assert!(solve_viscous(&HamiltonianKind::WLimit, &s, &s.grid, &opts()).is_err());
        assert!(solve_viscous(&HamiltonianKind::WEps { eps: 0.0 }, &s, &s.grid, &opts()).is_err());
        assert!(solve_inviscid(&HamiltonianKind::WEps { eps: 0.1 }, &s, &s.grid, &opts()).is_err());
    }

    #[test]
    fn s_gauge_is_w_plus_yh() {
        let s = builtin_scenario("figure1").unwrap();
        let g = GridSpec::new(10.0, 100, 1.0, 10).unwrap();
        let w = solve_viscous(&HamiltonianKind::WEps { eps: 0.1 }, &s, &g, &opts()).unwrap();
        let sf = solve_viscous(&HamiltonianKind::SEps { eps: 0.1 }, &s, &g, &opts()).unwrap();
        for n in 0..w.n_t() {
            let y = s.y.eval(w.times[n]);
            for i in 0..w.n_x() {
                assert!((sf.at(n, i) - w.at(n, i) - y * s.h.eval(w.xs[i])).abs() < 1e-13);
            }
        }
        // the S datum is S0 and the boundary slope is y h'(0)
        for i in 0..sf.n_x() {
            assert!((sf.at(0, i) - s.s0(sf.xs[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn cost_to_come_initial_slice() {
        let s = builtin_scenario("quadratic").unwrap();
        let pen = PenaltySpec::new(10.0).unwrap();
        let v = solve_inviscid(&HamiltonianKind::PenalizedCostToCome { pen }, &s, &s.grid, &opts()).unwrap();
        for (i, &x) in v.xs.iter().enumerate() {
            assert_eq!(v.at(0, i), s.psi.eval(x));
        }
    }

    #[test]
    fn residual_vanishes_for_solver_output() {
        let s = builtin_scenario("boundary-probe").unwrap();
        let g = s.grid;
        let o = SolverOptions { substep: false, ..opts() };
        let g = GridSpec { nt: 200, ..g };
        let w = solve_inviscid(&HamiltonianKind::WLimit, &s, &g, &o).unwrap();
        // explicit output satisfies the explicit residual; the implicit-in-
        // time residual used here is O(Δt)
        assert!(scheme_residual(&w, &s, 0.0, 3.0) < 0.2);
    }
}
