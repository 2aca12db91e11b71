//! Estimation scenarios: coefficients, initial cost, default grid and the
//! penalty construction that replaces the reflection by a restoring drift.

mod func;
mod presets;

pub use func::{Func, Jet};
pub use presets::{builtin_scenario, lq, PRESETS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space and time discretization.
///
/// `nx` counts cells on `[0, xmax]`. With `symmetric` set, solvers work on
/// the reflected extension `[-xmax, xmax]` with `2 nx` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub xmax: f64,
    pub nx: usize,
    pub t_end: f64,
    pub nt: usize,
    #[serde(default)]
    pub symmetric: bool,
}

impl GridSpec {
    pub fn new(xmax: f64, nx: usize, t_end: f64, nt: usize) -> Result<GridSpec> {
        let g = GridSpec { xmax, nx, t_end, nt, symmetric: false };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 {
            return Err(Error::Grid(format!("nx = {} but at least 8 cells are required", self.nx)));
        }
        if self.nt < 1 {
            return Err(Error::Grid("nt must be at least 1".into()));
        }
        if !(self.xmax > 0.0 && self.xmax.is_finite()) {
            return Err(Error::Grid(format!("xmax must be positive, got {}", self.xmax)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Grid(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.xmax / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    /// Time nodes `t_n = n dt`, `n = 0..=nt`.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.nt).map(|n| n as f64 * dt).collect()
    }

    /// Space nodes on `[0, xmax]`.
    pub fn xs(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..=self.nx).map(|i| i as f64 * dx).collect()
    }

    /// Space nodes on `[-xmax, xmax]`, built as `(j - nx) dx` so that
    /// mirrored nodes are exact negatives of each other.
    pub fn xs_symmetric(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..=2 * self.nx).map(|j| (j as f64 - self.nx as f64) * dx).collect()
    }

    /// Same window and horizon with `k` times as many cells and steps.
    pub fn refined(&self, k: usize) -> GridSpec {
        GridSpec { nx: self.nx * k, nt: self.nt * k, ..*self }
    }

    pub fn with_horizon(&self, t_end: f64, nt: usize) -> GridSpec {
        GridSpec { t_end, nt, ..*self }
    }

    pub fn with_space(&self, xmax: f64, nx: usize) -> GridSpec {
        GridSpec { xmax, nx, ..*self }
    }
}

/// Penalty strength for the C¹ Moreau–Yosida-type restoring drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kappa: f64,
}

impl PenaltySpec {
    pub fn new(kappa: f64) -> Result<PenaltySpec> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Input(format!("kappa must be positive, got {kappa}")));
        }
        Ok(PenaltySpec { kappa })
    }

    /// Penalty part `f^κ - f` and its x-derivative.
    ///
    /// In the variable `s = κ(-x)` the bridge on `(0, 1)` is the cubic
    /// Hermite `2s² - s³`, which matches `(0, 0)` and `(1, 1)` in value and
    /// slope, so the penalty is C¹ and its slope peaks at `4κ/3`.
    #[inline]
    pub fn penalty(&self, x: f64) -> (f64, f64) {
        if x >= 0.0 {
            return (0.0, 0.0);
        }
        let s = -self.kappa * x;
        if s >= 1.0 {
            (s, -self.kappa)
        } else {
            (s * s * (2.0 - s), -self.kappa * s * (4.0 - 3.0 * s))
        }
    }

    /// Largest slope magnitude of the penalty part.
    pub fn slope_bound(&self) -> f64 {
        self.kappa * 4.0 / 3.0
    }
}

/// Scenario tuple: drift `f`, observation map `h`, observation primitive
/// `y` with derivative `ydot`, initial cost `psi` (also the HJB datum
/// `w0`), and the driving signal used by path experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub f: Func,
    pub h: Func,
    pub y: Func,
    pub ydot: Func,
    pub psi: Func,
    /// Initial state for path experiments.
    #[serde(default)]
    pub x0: f64,
    /// Disturbance `ω(t)` for path experiments.
    #[serde(default)]
    pub omega: Func,
    /// State path that generated the observations, when synthetic.
    #[serde(default)]
    pub truth: Option<Func>,
    pub grid: GridSpec,
}

const F_ORIGIN_TOL: f64 = 1e-12;

impl ProblemSpec {
    /// Checks the structural invariants and returns the scenario.
    pub fn validated(self) -> Result<ProblemSpec> {
        self.grid.validate()?;
        let f0 = self.f.eval(0.0);
        if f0.abs() > F_ORIGIN_TOL {
            return Err(Error::Scenario(format!(
                "{}: drift must vanish at the origin, f(0) = {f0:e}",
                self.name
            )));
        }
        if self.x0 < 0.0 {
            return Err(Error::Scenario(format!("{}: x0 must be nonnegative", self.name)));
        }
        let err = self.ydot_fd_error(1e-3);
        let scale = 1.0 + self.y.sup_abs(0.0, self.grid.t_end, 64);
        if err > 1e-4 * scale {
            return Err(Error::Scenario(format!(
                "{}: ydot disagrees with centered differences of y (max gap {err:e})",
                self.name
            )));
        }
        Ok(self)
    }

    /// Max gap between `ydot` and centered differences of `y` with step
    /// `delta` over samples of `[0, T]`.
    pub fn ydot_fd_error(&self, delta: f64) -> f64 {
        let t_end = self.grid.t_end;
        (0..=64)
            .map(|k| {
                let t = t_end * k as f64 / 64.0;
                let fd = (self.y.eval(t + delta) - self.y.eval(t - delta)) / (2.0 * delta);
                (fd - self.ydot.eval(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn w0(&self, x: f64) -> f64 {
        self.psi.eval(x)
    }

    /// Initial datum of the S gauge, `w0(x) + y(0) h(x)`.
    pub fn s0(&self, x: f64) -> f64 {
        self.w0(x) + self.y.eval(0.0) * self.h.eval(x)
    }

    /// Penalized drift `f^κ(x)`.
    #[inline]
    pub fn penalized_drift(&self, pen: &PenaltySpec, x: f64) -> f64 {
        self.f.eval(x) + pen.penalty(x).0
    }

    /// Sampled Lipschitz bound of `f` over `[-L, L]` with `L = 2 xmax`.
    pub fn f_lipschitz(&self) -> f64 {
        let l = 2.0 * self.grid.xmax;
        self.f.sup_abs_d1(-l, l, 4000)
    }

    /// Sampled sup of `|f|` over the extended window.
    pub fn f_sup(&self) -> f64 {
        let l = self.grid.xmax;
        self.f.sup_abs(-l, l, 4000)
    }

    /// Sampled sup of `|ẏ(t) - h(x)|` over `[0, xmax] × [0, T]`.
    pub fn innovation_sup(&self, grid: &GridSpec) -> f64 {
        let nx = 200;
        let nt = 200;
        let mut m: f64 = 0.0;
        for k in 0..=nt {
            let yd = self.ydot.eval(grid.t_end * k as f64 / nt as f64);
            for i in 0..=nx {
                let x = grid.xmax * i as f64 / nx as f64;
                m = m.max((yd - self.h.eval(x)).abs());
            }
        }
        m
    }
}

/// `f^κ(x)`, the drift with the restoring penalty added on `x < 0`.
pub fn eval_penalized_drift(spec: &ProblemSpec, pen: &PenaltySpec, x: f64) -> f64 {
    spec.penalized_drift(pen, x)
}
