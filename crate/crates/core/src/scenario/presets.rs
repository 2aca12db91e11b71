//! Built-in scenarios.

use std::f64::consts::SQRT_2;

use super::{Func, GridSpec, ProblemSpec};
use crate::error::{Error, Result};

/// Names accepted by [`builtin_scenario`].
pub const PRESETS: [&str; 6] =
    ["zero", "figure1", "constant-obs", "linear-quadratic", "boundary-probe", "quadratic"];

/// Coefficients of the linear-quadratic preset.
pub mod lq {
    pub const A: f64 = -0.5;
    pub const C: f64 = 1.0;
    pub const M0: f64 = 3.0;
    pub const P0: f64 = 1.0;
    pub const XMAX: f64 = 8.0;
}

fn grid(xmax: f64, nx: usize, t_end: f64, nt: usize) -> GridSpec {
    GridSpec { xmax, nx, t_end, nt, symmetric: false }
}

fn base(name: &str, grid: GridSpec) -> ProblemSpec {
    ProblemSpec {
        name: name.to_string(),
        f: Func::zero(),
        h: Func::zero(),
        y: Func::zero(),
        ydot: Func::zero(),
        psi: Func::zero(),
        x0: 0.0,
        omega: Func::zero(),
        truth: None,
        grid,
    }
}

/// `Ω'(t)` for `Ω(t) = t cos(√5 t) + √2 t sin t`.
fn figure1_omega() -> Func {
    let r5 = 5f64.sqrt();
    Func::sum(vec![
        Func::Cos { amp: 1.0, freq: r5, phase: 0.0 },
        Func::product(vec![Func::poly(&[0.0, -r5]), Func::Sin { amp: 1.0, freq: r5, phase: 0.0 }]),
        Func::Sin { amp: SQRT_2, freq: 1.0, phase: 0.0 },
        Func::product(vec![Func::poly(&[0.0, SQRT_2]), Func::Cos { amp: 1.0, freq: 1.0, phase: 0.0 }]),
    ])
}

/// Returns a fully populated, validated preset.
pub fn builtin_scenario(name: &str) -> Result<ProblemSpec> {
    let spec = match name {
        "zero" => base(name, grid(4.0, 80, 1.0, 50)),
        "figure1" => {
            // Path experiments use x0 and Ω on [0, 16]. The estimation
            // coefficients below give the same scene a nontrivial HJB.
            let mut s = base(name, grid(10.0, 400, 16.0, 4000));
            s.x0 = 5.0;
            s.omega = figure1_omega();
            s.h = Func::Tanh { amp: 1.0, rate: 1.0, center: 5.0 };
            s.y = Func::Sin { amp: 0.5, freq: 1.0, phase: 0.0 };
            s.ydot = Func::Cos { amp: 0.5, freq: 1.0, phase: 0.0 };
            s.psi = Func::sum(vec![
                Func::constant(4.0),
                Func::Gauss { amp: -4.0, center: 5.0, width: 0.5f64.sqrt() },
            ]);
            s
        }
        "constant-obs" => {
            let mut s = base(name, grid(4.0, 80, 1.0, 100));
            s.h = Func::constant(1.0);
            s
        }
        "linear-quadratic" => {
            let mut s = base(name, grid(lq::XMAX, 200, 2.0, 200));
            let ramp = 2.0;
            s.f = Func::poly(&[0.0, lq::A]).truncated(-lq::XMAX, lq::XMAX, ramp);
            s.h = Func::poly(&[0.0, lq::C]).truncated(-lq::XMAX, lq::XMAX, ramp);
            // truth x(t) = 4 + sin 2t, observed through h = c x
            let truth = Func::sum(vec![
                Func::constant(4.0),
                Func::Sin { amp: 1.0, freq: 2.0, phase: 0.0 },
            ]);
            s.ydot = Func::sum(vec![
                Func::constant(4.0 * lq::C),
                Func::Sin { amp: lq::C, freq: 2.0, phase: 0.0 },
            ]);
            s.y = Func::sum(vec![
                Func::poly(&[0.5 * lq::C, 4.0 * lq::C]),
                Func::Cos { amp: -0.5 * lq::C, freq: 2.0, phase: 0.0 },
            ]);
            s.truth = Some(truth);
            s.x0 = 4.0;
            let k = 0.5 / lq::P0;
            s.psi = Func::poly(&[k * lq::M0 * lq::M0, -2.0 * k * lq::M0, k]);
            s
        }
        "boundary-probe" => {
            let mut s = base(name, grid(4.0, 40, 1.0, 20));
            s.h = Func::Tanh { amp: 1.0, rate: 2.0, center: 0.0 };
            s.psi = Func::sum(vec![
                Func::constant(2.0),
                Func::Gauss { amp: -2.0, center: 1.5, width: 1.0 },
            ]);
            s
        }
        "quadratic" => {
            let mut s = base(name, grid(4.0, 40, 1.0, 10));
            s.psi = Func::poly(&[0.5, -1.0, 0.5]);
            s
        }
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                valid: PRESETS.join(", "),
            })
        }
    };
    spec.validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESETS {
            let s = builtin_scenario(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.f.eval(0.0), 0.0);
        }
    }

    #[test]
    fn unknown_name_lists_presets() {
        let e = builtin_scenario("nope").unwrap_err().to_string();
        for name in PRESETS {
            assert!(e.contains(name), "{e}");
        }
    }

    #[test]
    fn zero_preset_is_zero() {
        let s = builtin_scenario("zero").unwrap();
        for x in [0.0, 0.5, 3.0] {
            assert_eq!(s.f.eval(x), 0.0);
            assert_eq!(s.h.eval(x), 0.0);
            assert_eq!(s.psi.eval(x), 0.0);
            assert_eq!(s.y.eval(x), 0.0);
        }
    }

    #[test]
    fn constant_obs_preset() {
        let s = builtin_scenario("constant-obs").unwrap();
        assert_eq!(s.h.eval(2.3), 1.0);
        assert_eq!(s.f.eval(2.3), 0.0);
        assert_eq!(s.y.eval(0.7), 0.0);
    }

    #[test]
    fn figure1_first_contact_time() {
        let s = builtin_scenario("figure1").unwrap();
        // Ω(t) = t cos(√5 t) + √2 t sin t, evaluated directly
        let big_omega = |t: f64| t * (5f64.sqrt() * t).cos() + SQRT_2 * t * t.sin();
        assert!((s.x0 + big_omega(3.7554)).abs() < 1e-3);
        // and ω integrates to Ω
        let n = 20000;
        let t_end = 3.7554;
        let dt = t_end / n as f64;
        let integral: f64 = (0..n).map(|k| s.omega.eval((k as f64 + 0.5) * dt) * dt).sum();
        assert!((integral - big_omega(t_end)).abs() < 1e-6);
    }

    #[test]
    fn lq_is_linear_on_window() {
        let s = builtin_scenario("linear-quadratic").unwrap();
        for x in [-7.9, -1.0, 0.0, 2.0, 7.99] {
            assert!((s.f.eval(x) - lq::A * x).abs() < 1e-12);
            assert!((s.h.eval(x) - lq::C * x).abs() < 1e-12);
        }
        assert!(s.f.sup_abs(-40.0, 40.0, 4000) < lq::A.abs() * (lq::XMAX + 2.0));
        let truth = s.truth.clone().unwrap();
        for t in [0.0, 0.4, 1.9] {
            assert!((s.ydot.eval(t) - lq::C * truth.eval(t)).abs() < 1e-12);
        }
    }
}
