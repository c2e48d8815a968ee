//! Uniformly sampled functions on a closed interval.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Finite-difference stencil used for first derivatives on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeScheme {
    /// Central differences inside, first-order one-sided at the two ends.
    Central2,
    /// Central differences inside, second-order one-sided at the two ends.
    #[default]
    OneSided2AtEnds,
}

/// Values at the n+1 nodes t_i = a + i(b−a)/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a grid function needs at least 2 nodes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(GridFunction { a, b, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("grid needs n >= 1 intervals".into()));
        }
        let h = (b - a) / n as f64;
        let values = (0..=n).map(|i| f(node(a, b, h, n, i))).collect();
        GridFunction::new(a, b, values)
    }

    pub fn zeros(a: f64, b: f64, n: usize) -> Result<Self> {
        GridFunction::from_fn(a, b, n, |_| 0.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        node(self.a, self.b, self.step(), self.n(), i)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n()).map(|i| self.node(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.a == other.a && self.b == other.b && self.values.len() == other.values.len()
    }

    /// A function on the same grid with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        GridFunction::new(self.a, self.b, values)
    }

    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = (0..=self.n()).map(|i| f(self.node(i), self.values[i])).collect();
        self.with_values(values)
    }

    /// Pointwise `f(t, self, other)`; both must share a grid.
    pub fn zip_with<F: Fn(f64, f64, f64) -> f64>(&self, other: &GridFunction, f: F) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::InvalidDomain("grid functions live on different grids".into()));
        }
        let values = (0..=self.n())
            .map(|i| f(self.node(i), self.values[i], other.values[i]))
            .collect();
        self.with_values(values)
    }

    /// Composite trapezoid rule over [a, b].
    pub fn trapezoid(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolant at `t`, clamped to [a, b].
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.n();
        let x = ((t - self.a) / self.step()).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Linear interpolant on a grid with `factor` times as many intervals.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refine factor must be positive".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let n = self.n();
        let mut values = Vec::with_capacity(n * factor + 1);
        for i in 0..n {
            let (lo, hi) = (self.values[i], self.values[i + 1]);
            for k in 0..factor {
                let frac = k as f64 / factor as f64;
                values.push(lo + frac * (hi - lo));
            }
        }
        values.push(self.values[n]);
        GridFunction::new(self.a, self.b, values)
    }

    /// Every `factor`-th node.
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n().is_multiple_of(factor) {
            return Err(Error::InvalidParameter(format!(
                "cannot restrict {} intervals by {factor}",
                self.n()
            )));
        }
        let values = self.values.iter().step_by(factor).copied().collect();
        GridFunction::new(self.a, self.b, values)
    }

    pub fn derivative(&self, scheme: DerivativeScheme) -> Result<Self> {
        self.with_values(differentiate(&self.values, self.step(), scheme))
    }
}

fn node(a: f64, b: f64, h: f64, n: usize, i: usize) -> f64 {
    if i == n {
        b
    } else {
        a + i as f64 * h
    }
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    h * (0.5 * (values[0] + values[n]) + inner)
}

pub(crate) fn differentiate(v: &[f64], h: f64, scheme: DerivativeScheme) -> Vec<f64> {
    let n = v.len() - 1;
    let mut d = vec![0.0; n + 1];
    for i in 1..n {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    if n >= 2 && scheme == DerivativeScheme::OneSided2AtEnds {
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        d[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    } else {
        d[0] = (v[1] - v[0]) / h;
        d[n] = (v[n] - v[n - 1]) / h;
    }
    d
}

/// Row-wise coefficients of [`differentiate`] as a sparse stencil:
/// `(row, col, weight)` triples.
pub(crate) fn derivative_stencil(n: usize, h: f64, scheme: DerivativeScheme) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(2 * (n + 1) + 2);
    for i in 1..n {
        out.push((i, i - 1, -0.5 / h));
        out.push((i, i + 1, 0.5 / h));
    }
    if n >= 2 && scheme == DerivativeScheme::OneSided2AtEnds {
        out.extend([
            (0, 0, -1.5 / h),
            (0, 1, 2.0 / h),
            (0, 2, -0.5 / h),
            (n, n, 1.5 / h),
            (n, n - 1, -2.0 / h),
            (n, n - 2, 0.5 / h),
        ]);
    } else {
        out.extend([(0, 0, -1.0 / h), (0, 1, 1.0 / h), (n, n, 1.0 / h), (n, n - 1, -1.0 / h)]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(GridFunction::new(1.0, 0.0, vec![0.0, 1.0]).is_err());
        assert!(GridFunction::new(0.0, 1.0, vec![0.0]).is_err());
        assert!(matches!(
            GridFunction::new(0.0, 1.0, vec![0.0, f64::NAN]),
            Err(Error::NumericalOverflow(_))
        ));
        let g = GridFunction::from_fn(0.0, 2.0, 4, |t| t).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.step(), 0.5);
        assert_eq!(g.node(4), 2.0);
        assert_eq!(g.values(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn trapezoid_and_interpolation() {
        let g = GridFunction::from_fn(0.0, 1.0, 10, |t| 3.0 * t + 1.0).unwrap();
        assert!((g.trapezoid() - 2.5).abs() < 1e-15);
        assert!((g.interpolate(0.37) - 2.11).abs() < 1e-14);
        assert_eq!(g.interpolate(-1.0), 1.0);
        assert_eq!(g.interpolate(2.0), 4.0);
    }

    #[test]
    fn refine_then_restrict_round_trips() {
        let g = GridFunction::from_fn(0.0, 1.0, 8, |t| t.sin()).unwrap();
        let fine = g.refine(4).unwrap();
        assert_eq!(fine.n(), 32);
        assert_eq!(fine.restrict(4).unwrap(), g);
        assert!((fine.values()[2] - 0.5 * (g.values()[0] + g.values()[1])).abs() < 1e-16);
    }

    #[test]
    fn derivative_schemes_are_exact_on_their_polynomials() {
        let q = GridFunction::from_fn(0.0, 1.0, 16, |t| t * t).unwrap();
        let d = q.derivative(DerivativeScheme::OneSided2AtEnds).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert!((v - 2.0 * q.node(i)).abs() < 1e-12);
        }
        let l = GridFunction::from_fn(0.0, 1.0, 16, |t| 2.0 - t).unwrap();
        let d = l.derivative(DerivativeScheme::Central2).unwrap();
        assert!(d.values().iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn stencil_matches_differentiate() {
        for scheme in [DerivativeScheme::Central2, DerivativeScheme::OneSided2AtEnds] {
            let g = GridFunction::from_fn(0.0, 1.0, 9, |t| (3.0 * t).cos()).unwrap();
            let direct = differentiate(g.values(), g.step(), scheme);
            let mut via = vec![0.0; 10];
            for (r, c, w) in derivative_stencil(9, g.step(), scheme) {
                via[r] += w * g.values()[c];
            }
            for (x, y) in direct.iter().zip(&via) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
