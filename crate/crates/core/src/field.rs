//! Functions of `(x, t)` sampled on a space–time grid.

use crate::error::{Error, Result};

/// Values on `times × xs`, stored time-major (`values[n * nx + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(times: Vec<f64>, xs: Vec<f64>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != times.len() * xs.len() {
            return Err(Error::Input(format!(
                "field needs {} values, got {}",
                times.len() * xs.len(),
                values.len()
            )));
        }
        Ok(ScalarField { times, xs, values })
    }

    pub fn from_fn(times: &[f64], xs: &[f64], g: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(times.len() * xs.len());
        for &t in times {
            values.extend(xs.iter().map(|&x| g(x, t)));
        }
        ScalarField { times: times.to_vec(), xs: xs.to_vec(), values }
    }

    #[inline]
    pub fn n_t(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn n_x(&self) -> usize {
        self.xs.len()
    }

    pub fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    #[inline]
    pub fn at(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.xs.len() + i]
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let nx = self.xs.len();
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn last_slice(&self) -> &[f64] {
        self.slice(self.n_t() - 1)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Linear interpolation in x at time node `n`, clamped to the window.
    pub fn interp(&self, n: usize, x: f64) -> f64 {
        interp_uniform(self.xs[0], self.dx(), self.slice(n), x)
    }

    /// Indices of nodes with `a <= x <= b` (with a small slack for
    /// rounding).
    pub fn window_indices(&self, a: f64, b: f64) -> Vec<usize> {
        let slack = 1e-9 * self.dx();
        (0..self.n_x()).filter(|&i| self.xs[i] >= a - slack && self.xs[i] <= b + slack).collect()
    }

    /// Columns of the field restricted to nodes with `a <= x <= b`.
    pub fn restrict(&self, a: f64, b: f64) -> ScalarField {
        let idx = self.window_indices(a, b);
        let xs: Vec<f64> = idx.iter().map(|&i| self.xs[i]).collect();
        let mut values = Vec::with_capacity(idx.len() * self.n_t());
        for n in 0..self.n_t() {
            values.extend(idx.iter().map(|&i| self.at(n, i)));
        }
        ScalarField { times: self.times.clone(), xs, values }
    }

    /// Every `k`-th time node.
    pub fn subsample_times(&self, k: usize) -> ScalarField {
        let keep: Vec<usize> = (0..self.n_t()).step_by(k.max(1)).collect();
        let times = keep.iter().map(|&n| self.times[n]).collect();
        let mut values = Vec::with_capacity(keep.len() * self.n_x());
        for &n in &keep {
            values.extend_from_slice(self.slice(n));
        }
        ScalarField { times, xs: self.xs.clone(), values }
    }

    pub fn map(&self, g: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
        let nx = self.n_x();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| g(self.xs[k % nx], self.times[k / nx], v))
            .collect();
        ScalarField { times: self.times.clone(), xs: self.xs.clone(), values }
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs()))
        };
        if !close(&self.xs, &other.xs) || !close(&self.times, &other.times) {
            return Err(Error::GridMismatch(format!(
                "{}x{} grid vs {}x{} grid",
                self.n_t(),
                self.n_x(),
                other.n_t(),
                other.n_x()
            )));
        }
        Ok(())
    }

    /// Max of `|self - other|` over all times and nodes in `[a, b]`.
    pub fn sup_diff_window(&self, other: &ScalarField, a: f64, b: f64) -> Result<f64> {
        self.check_same_grid(other)?;
        let idx = self.window_indices(a, b);
        let mut m: f64 = 0.0;
        for n in 0..self.n_t() {
            for &i in &idx {
                m = m.max((self.at(n, i) - other.at(n, i)).abs());
            }
        }
        Ok(m)
    }

    /// Max over the window of `|self - other|`, with `other` sampled at
    /// the nodes of `self` (grids may differ; `other` is interpolated in x
    /// and must contain the time nodes of `self`).
    pub fn sup_diff_interp(&self, other: &ScalarField, a: f64, b: f64) -> Result<f64> {
        let idx = self.window_indices(a, b);
        let mut m: f64 = 0.0;
        for (n, &t) in self.times.iter().enumerate() {
            let k = other
                .times
                .iter()
                .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
                .ok_or_else(|| Error::GridMismatch(format!("time {t} missing from other field")))?;
            for &i in &idx {
                m = m.max((self.at(n, i) - other.interp(k, self.xs[i])).abs());
            }
        }
        Ok(m)
    }
}

/// Linear interpolation of samples on a uniform grid, clamped at the ends.
#[inline]
pub fn interp_uniform(x0: f64, dx: f64, v: &[f64], x: f64) -> f64 {
    let last = v.len() - 1;
    let s = (x - x0) / dx;
    if s <= 0.0 {
        return v[0];
    }
    if s >= last as f64 {
        return v[last];
    }
    let i = s.floor() as usize;
    let th = s - i as f64;
    if th == 0.0 {
        v[i]
    } else {
        v[i] + th * (v[i + 1] - v[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_interp() {
        let f = ScalarField::from_fn(&[0.0, 1.0], &[0.0, 0.5, 1.0], |x, t| x + 10.0 * t);
        assert_eq!(f.at(1, 2), 11.0);
        assert_eq!(f.slice(0), &[0.0, 0.5, 1.0]);
        assert!((f.interp(1, 0.25) - 10.25).abs() < 1e-15);
        assert_eq!(f.interp(0, -3.0), 0.0);
        assert_eq!(f.interp(0, 3.0), 1.0);
    }

    #[test]
    fn window_and_diff() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let a = ScalarField::from_fn(&[0.0, 1.0], &xs, |x, _| x);
        let b = ScalarField::from_fn(&[0.0, 1.0], &xs, |x, _| if x > 0.55 { x + 1.0 } else { x });
        assert_eq!(a.sup_diff_window(&b, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(a.sup_diff_window(&b, 0.0, 1.0).unwrap(), 1.0);
        let c = ScalarField::from_fn(&[0.0], &xs, |x, _| x);
        assert!(a.sup_diff_window(&c, 0.0, 1.0).is_err());
        assert_eq!(a.restrict(0.2, 0.4).xs.len(), 3);
    }
}
