//! Coefficient functions of one real variable with analytic first and
//! second derivatives.
//!
//! A [`Func`] is a small expression tree. Scenario files describe
//! coefficients as inline tables such as
//! `{ kind = "tanh", amp = 1.0, rate = 2.0, center = 0.0 }`.

use serde::{Deserialize, Serialize};

/// Value and first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { v: 0.0, d1: 0.0, d2: 0.0 };
    pub const ONE: Jet = Jet { v: 1.0, d1: 0.0, d2: 0.0 };

    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

/// A smooth real function, described by a tagged table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Func {
    /// Constant `value`.
    Const { value: f64 },
    /// `sum_k coeffs[k] * x^k`.
    Poly { coeffs: Vec<f64> },
    /// `amp * sin(freq * x + phase)`.
    Sin {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * cos(freq * x + phase)`.
    Cos {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * tanh(rate * (x - center))`.
    Tanh {
        amp: f64,
        rate: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amp * exp(-(x - center)^2 / (2 width^2))`.
    Gauss { amp: f64, center: f64, width: f64 },
    /// Smooth plateau: 1 on `[lo, hi]`, 0 outside `[lo - ramp, hi + ramp]`,
    /// quintic smoothstep in between (C² overall).
    Plateau { lo: f64, hi: f64, ramp: f64 },
    /// Samples on a uniform grid starting at `start` with spacing `step`.
    /// Values are interpolated linearly; derivatives come from centered
    /// differences with one-sided endpoints.
    Samples { start: f64, step: f64, values: Vec<f64> },
    Sum { terms: Vec<Func> },
    Product { factors: Vec<Func> },
}

impl Default for Func {
    fn default() -> Self {
        Func::zero()
    }
}

fn smoothstep(u: f64) -> Jet {
    if u <= 0.0 {
        return Jet::ZERO;
    }
    if u >= 1.0 {
        return Jet::ONE;
    }
    let w = 1.0 - u;
    Jet {
        v: u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
        d1: 30.0 * u * u * w * w,
        d2: 60.0 * u * w * (1.0 - 2.0 * u),
    }
}

impl Func {
    pub fn zero() -> Func {
        Func::Const { value: 0.0 }
    }

    pub fn constant(value: f64) -> Func {
        Func::Const { value }
    }

    pub fn poly(coeffs: &[f64]) -> Func {
        Func::Poly { coeffs: coeffs.to_vec() }
    }

    pub fn sum(terms: Vec<Func>) -> Func {
        Func::Sum { terms }
    }

    pub fn product(factors: Vec<Func>) -> Func {
        Func::Product { factors }
    }

    /// `self` multiplied by a plateau equal to 1 on `[lo, hi]`.
    pub fn truncated(self, lo: f64, hi: f64, ramp: f64) -> Func {
        Func::product(vec![self, Func::Plateau { lo, hi, ramp }])
    }

    pub fn jet(&self, x: f64) -> Jet {
        match self {
            Func::Const { value } => Jet { v: *value, d1: 0.0, d2: 0.0 },
            Func::Poly { coeffs } => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    d2 = d2 * x + 2.0 * d1;
                    d1 = d1 * x + v;
                    v = v * x + c;
                }
                Jet { v, d1, d2 }
            }
            Func::Sin { amp, freq, phase } => {
                let (s, c) = (freq * x + phase).sin_cos();
                Jet { v: amp * s, d1: amp * freq * c, d2: -amp * freq * freq * s }
            }
            Func::Cos { amp, freq, phase } => {
                let (s, c) = (freq * x + phase).sin_cos();
                Jet { v: amp * c, d1: -amp * freq * s, d2: -amp * freq * freq * c }
            }
            Func::Tanh { amp, rate, center } => {
                let th = (rate * (x - center)).tanh();
                let sech2 = 1.0 - th * th;
                Jet {
                    v: amp * th,
                    d1: amp * rate * sech2,
                    d2: -2.0 * amp * rate * rate * th * sech2,
                }
            }
            Func::Gauss { amp, center, width } => {
                let d = x - center;
                let w2 = width * width;
                let g = amp * (-0.5 * d * d / w2).exp();
                Jet { v: g, d1: -d / w2 * g, d2: (d * d / (w2 * w2) - 1.0 / w2) * g }
            }
            Func::Plateau { lo, hi, ramp } => {
                if x < *lo {
                    smoothstep((x - (lo - ramp)) / ramp).scaled_arg(1.0 / ramp)
                } else if x > *hi {
                    smoothstep((hi + ramp - x) / ramp).scaled_arg(-1.0 / ramp)
                } else {
                    Jet::ONE
                }
            }
            Func::Samples { start, step, values } => sample_jet(*start, *step, values, x),
            Func::Sum { terms } => terms.iter().fold(Jet::ZERO, |acc, f| acc.add(f.jet(x))),
            Func::Product { factors } => {
                factors.iter().fold(Jet::ONE, |acc, f| acc.mul(f.jet(x)))
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x).v
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        self.jet(x).d1
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        self.jet(x).d2
    }

    /// True when the function is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Func::Const { value } => *value == 0.0,
            Func::Poly { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            Func::Sum { terms } => terms.iter().all(Func::is_zero),
            Func::Product { factors } => factors.iter().any(Func::is_zero),
            Func::Sin { amp, .. } | Func::Cos { amp, .. } | Func::Tanh { amp, .. } => *amp == 0.0,
            Func::Gauss { amp, .. } => *amp == 0.0,
            Func::Samples { values, .. } => values.iter().all(|v| *v == 0.0),
            Func::Plateau { .. } => false,
        }
    }

    /// Max of `|f|` over `n + 1` equispaced samples of `[a, b]`.
    pub fn sup_abs(&self, a: f64, b: f64, n: usize) -> f64 {
        sample_max(a, b, n, |x| self.eval(x).abs())
    }

    /// Max of `|f'|` over `n + 1` equispaced samples of `[a, b]`.
    pub fn sup_abs_d1(&self, a: f64, b: f64, n: usize) -> f64 {
        sample_max(a, b, n, |x| self.d1(x).abs())
    }

    pub fn sup_abs_d2(&self, a: f64, b: f64, n: usize) -> f64 {
        sample_max(a, b, n, |x| self.d2(x).abs())
    }
}

impl Jet {
    /// Chain rule for an affine inner map with slope `k`.
    fn scaled_arg(self, k: f64) -> Jet {
        Jet { v: self.v, d1: self.d1 * k, d2: self.d2 * k * k }
    }
}

pub(crate) fn sample_max(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let n = n.max(1);
    (0..=n)
        .map(|k| g(a + (b - a) * k as f64 / n as f64))
        .fold(0.0, f64::max)
}

fn sample_deriv(step: f64, values: &[f64], i: usize) -> f64 {
    let n = values.len();
    if i == 0 {
        (values[1] - values[0]) / step
    } else if i == n - 1 {
        (values[n - 1] - values[n - 2]) / step
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * step)
    }
}

fn sample_jet(start: f64, step: f64, values: &[f64], x: f64) -> Jet {
    if values.is_empty() {
        return Jet::ZERO;
    }
    if values.len() == 1 {
        return Jet { v: values[0], d1: 0.0, d2: 0.0 };
    }
    let last = values.len() - 1;
    let s = ((x - start) / step).clamp(0.0, last as f64);
    let i = (s.floor() as usize).min(last - 1);
    let th = s - i as f64;
    let (d0, d1) = (sample_deriv(step, values, i), sample_deriv(step, values, i + 1));
    Jet {
        v: values[i] + th * (values[i + 1] - values[i]),
        d1: d0 + th * (d1 - d0),
        d2: (d1 - d0) / step,
    }
}
