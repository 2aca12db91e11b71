//! Hamilton–Jacobi–Bellman solvers.
//!
//! Every Hamiltonian handled here has the form
//! `H(x, t, λ) = ½λ² + b(x) λ - V(x, t)`, and the equations are written as
//! `∂ₜu + H(x, t, ∂ₓu) = (ε/2) ∂ₓₓu` with `u(·, 0)` given.

mod bounds;
mod solver;
mod sweep;

pub use bounds::{bound_stability, check_bounds, eps_gate, BoundReport};
pub use solver::{
    scheme_residual, solve_inviscid, solve_viscous, solve_viscous_extended, Boundary, SolverOptions,
};
pub(crate) use solver::solve_cost_to_come_full;
pub use sweep::{two_grid_estimate, vanishing_viscosity_sweep, SweepReport};

use serde::{Deserialize, Serialize};

use crate::scenario::{PenaltySpec, ProblemSpec};

/// Which Hamiltonian the solver evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HamiltonianKind {
    /// Cost-to-come of the penalized dynamics on the whole line:
    /// `½λ² + f^κ λ - ½(ẏ - h)²`.
    PenalizedCostToCome { pen: PenaltySpec },
    /// Viscous equation for `S^ε` with drift `g_S = f - y h'`.
    SEps { eps: f64 },
    /// Inviscid limit of [`HamiltonianKind::SEps`].
    SLimit,
    /// Viscous equation for `w^ε = S^ε - y h`.
    WEps { eps: f64 },
    /// `½λ² + λ f - ½h² + ẏ h`.
    WLimit,
    /// Even extension of [`HamiltonianKind::WEps`] to the whole line.
    WEpsSymmetrized { eps: f64 },
}

impl HamiltonianKind {
    pub fn eps(&self) -> f64 {
        match *self {
            HamiltonianKind::SEps { eps }
            | HamiltonianKind::WEps { eps }
            | HamiltonianKind::WEpsSymmetrized { eps } => eps,
            _ => 0.0,
        }
    }

    /// Same family with viscosity `eps`.
    pub fn with_eps(&self, eps: f64) -> HamiltonianKind {
        match self {
            HamiltonianKind::SEps { .. } | HamiltonianKind::SLimit => HamiltonianKind::SEps { eps },
            HamiltonianKind::WEpsSymmetrized { .. } => HamiltonianKind::WEpsSymmetrized { eps },
            HamiltonianKind::PenalizedCostToCome { .. } => *self,
            _ => HamiltonianKind::WEps { eps },
        }
    }

    /// The inviscid member of the family.
    pub fn limit(&self) -> HamiltonianKind {
        match self {
            HamiltonianKind::SEps { .. } | HamiltonianKind::SLimit => HamiltonianKind::SLimit,
            HamiltonianKind::PenalizedCostToCome { .. } => *self,
            _ => HamiltonianKind::WLimit,
        }
    }

    pub fn is_s_gauge(&self) -> bool {
        matches!(self, HamiltonianKind::SEps { .. } | HamiltonianKind::SLimit)
    }
}

/// Drift `b` and potential `V` of `H = ½λ² + bλ - V`.
pub fn drift_potential(kind: &HamiltonianKind, spec: &ProblemSpec, x: f64, t: f64) -> (f64, f64) {
    let yd = spec.ydot.eval(t);
    match *kind {
        HamiltonianKind::PenalizedCostToCome { pen } => {
            let r = yd - spec.h.eval(x);
            (spec.penalized_drift(&pen, x), 0.5 * r * r)
        }
        HamiltonianKind::WEps { eps } => {
            let f = spec.f.jet(x);
            let h = spec.h.eval(x);
            (f.v, 0.5 * h * h - yd * h + eps * f.d1)
        }
        HamiltonianKind::WLimit => {
            let h = spec.h.eval(x);
            (spec.f.eval(x), 0.5 * h * h - yd * h)
        }
        HamiltonianKind::WEpsSymmetrized { eps } => {
            let a = x.abs();
            let f = spec.f.jet(a);
            let h = spec.h.eval(a);
            let g = if x < 0.0 { -f.v } else { f.v };
            (g, 0.5 * h * h - yd * h + eps * f.d1)
        }
        HamiltonianKind::SEps { .. } | HamiltonianKind::SLimit => {
            let eps = kind.eps();
            let y = spec.y.eval(t);
            let f = spec.f.jet(x);
            let h = spec.h.jet(x);
            let g_s = f.v - y * h.d1;
            let v = 0.5 * h.v * h.v + y * f.v * h.d1 - 0.5 * y * y * h.d1 * h.d1
                - 0.5 * eps * y * h.d2
                + eps * f.d1;
            (g_s, v)
        }
    }
}

/// Pointwise value of the selected Hamiltonian.
pub fn eval_hamiltonian(kind: &HamiltonianKind, spec: &ProblemSpec, x: f64, t: f64, lambda: f64) -> f64 {
    let (b, v) = drift_potential(kind, spec, x, t);
    0.5 * lambda * lambda + b * lambda - v
}
