//! The generalized fractional integral K_P and the derivatives
//! A_P = D∘K_P^{1−α} and B_P = K_P^{1−α}∘D on uniform grids.

use crate::error::{Error, Result};
use crate::grid::{derivative_stencil, differentiate, trapezoid, DerivativeScheme, GridFunction};
use crate::kernels::{Kernel, KernelKind};
use crate::quadrature::integrate_with_origin_check;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Parameter set ⟨a, b, p, q⟩: the interval and the weights of the
/// left-looking and right-looking integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl ParamSet {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        let ps = ParamSet { a, b, p, q };
        ps.validate()?;
        Ok(ps)
    }

    /// ⟨a, b, 1, 0⟩.
    pub fn left(a: f64, b: f64) -> Result<Self> {
        ParamSet::new(a, b, 1.0, 0.0)
    }

    /// ⟨a, b, 0, 1⟩.
    pub fn right(a: f64, b: f64) -> Result<Self> {
        ParamSet::new(a, b, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::InvalidDomain(format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        if !(self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    /// The dual set ⟨a, b, q, p⟩.
    pub fn dual(&self) -> ParamSet {
        ParamSet { p: self.q, q: self.p, ..*self }
    }
}

pub fn dual(p: &ParamSet) -> ParamSet {
    p.dual()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Piecewise-linear f against exact kernel moments on each cell.
    #[default]
    ProductTrapezoid,
    /// Subdivided midpoint rule with abscissae off the diagonal.
    CompositeMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub quadrature: Quadrature,
    pub derivative_scheme: DerivativeScheme,
    /// Internal refinement used when differentiating K in the A-op.
    pub refine_factor: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            quadrature: Quadrature::ProductTrapezoid,
            derivative_scheme: DerivativeScheme::OneSided2AtEnds,
            refine_factor: 4,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.refine_factor, 1 | 2 | 4 | 8) {
            Ok(())
        } else {
            Err(Error::Configuration(format!(
                "refine_factor must be 1, 2, 4 or 8, got {}",
                self.refine_factor
            )))
        }
    }
}

/// Operator values with a per-node quality mask.
///
/// Flagged nodes carry values that are either repaired from unflagged
/// neighbours (divergent quadrature) or sit next to an endpoint
/// singularity; residual norms skip them.
#[derive(Debug, Clone, PartialEq)]
pub struct OpOutput {
    pub values: GridFunction,
    pub flagged: Vec<bool>,
}

impl OpOutput {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

const MIDPOINT_SUBCELLS: usize = 4;
const DIVERGENCE_CHANGE: f64 = 0.25;

fn check_grid(ps: &ParamSet, f: &GridFunction, cfg: &OperatorConfig) -> Result<()> {
    ps.validate()?;
    cfg.validate()?;
    if ps.a != f.a() || ps.b != f.b() {
        return Err(Error::InvalidDomain(format!(
            "operator on [{}, {}] applied to a function on [{}, {}]",
            ps.a,
            ps.b,
            f.a(),
            f.b()
        )));
    }
    Ok(())
}

fn uses_product_rule(kernel: &Kernel, cfg: &OperatorConfig) -> Result<bool> {
    match (kernel.kind(), cfg.quadrature) {
        (KernelKind::Difference, Quadrature::ProductTrapezoid) => Ok(true),
        (KernelKind::General, Quadrature::ProductTrapezoid) if kernel.singular_at_diagonal() => {
            Err(Error::Configuration(format!(
                "{} is singular on the diagonal and has no moments; use composite_midpoint",
                kernel.name()
            )))
        }
        _ => Ok(false),
    }
}

/// Product-trapezoid weights: cell m spans s ∈ [(m−1)h, mh]; `far[m]` goes to
/// the node at distance mh and `near[m]` to the node at distance (m−1)h.
fn product_weights(kernel: &Kernel, n: usize, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut far = vec![0.0; n + 1];
    let mut near = vec![0.0; n + 1];
    for m in 1..=n {
        let (m0, m1) = kernel.cell_moments((m - 1) as f64 * h, m as f64 * h)?;
        far[m] = m1 / h;
        near[m] = m0 - m1 / h;
        if !(far[m].is_finite() && near[m].is_finite()) {
            return Err(Error::NumericalOverflow(format!("{} moment on cell {m}", kernel.name())));
        }
    }
    Ok((far, near))
}

fn product_apply(ps: &ParamSet, kernel: &Kernel, f: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = f.len() - 1;
    let (far, near) = product_weights(kernel, n, h)?;
    let (p, q) = (ps.p, ps.q);
    Ok((0..=n)
        .into_par_iter()
        .map(|i| {
            let mut left = 0.0;
            if p != 0.0 {
                for m in 1..=i {
                    left += far[m] * f[i - m] + near[m] * f[i - m + 1];
                }
            }
            let mut right = 0.0;
            if q != 0.0 {
                for m in 1..=n - i {
                    right += near[m] * f[i + m - 1] + far[m] * f[i + m];
                }
            }
            combine(p, left, q, right)
        })
        .collect())
}

fn combine(p: f64, left: f64, q: f64, right: f64) -> f64 {
    match (p != 0.0, q != 0.0) {
        (true, true) => p * left + q * right,
        (true, false) => p * left,
        (false, true) => q * right,
        (false, false) => 0.0,
    }
}

struct MidpointGrid<'a> {
    kernel: &'a Kernel,
    a: f64,
    h: f64,
    n: usize,
}

impl MidpointGrid<'_> {
    fn node(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    /// Adds the weights of cell j, split into `sub` midpoint subcells, for
    /// the left (τ < t_i) or right (τ > t_i) integral at node i.
    fn cell(&self, i: usize, j: usize, sub: usize, left: bool, scale: f64, row: &mut [f64]) {
        let t = self.node(i);
        let width = self.h / sub as f64;
        for k in 0..sub {
            let frac = (k as f64 + 0.5) / sub as f64;
            let tau = self.node(j) + frac * self.h;
            let kv = if left { self.kernel.raw(t, tau) } else { self.kernel.raw(tau, t) };
            let w = scale * width * kv;
            row[j] += w * (1.0 - frac);
            row[j + 1] += w * frac;
        }
    }

    fn row(&self, i: usize, p: f64, q: f64, sub: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n + 1];
        if p != 0.0 {
            for j in 0..i {
                self.cell(i, j, sub, true, p, &mut row);
            }
        }
        if q != 0.0 {
            for j in i..self.n {
                self.cell(i, j, sub, false, q, &mut row);
            }
        }
        row
    }

    fn adjacent(&self, i: usize, p: f64, q: f64, sub: usize, f: &[f64]) -> f64 {
        let mut row = vec![0.0; self.n + 1];
        if p != 0.0 && i > 0 {
            self.cell(i, i - 1, sub, true, p, &mut row);
        }
        if q != 0.0 && i < self.n {
            self.cell(i, i, sub, false, q, &mut row);
        }
        dot(&row, f)
    }
}

fn dot(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

fn midpoint_apply(ps: &ParamSet, kernel: &Kernel, f: &[f64], h: f64) -> (Vec<f64>, Vec<bool>) {
    let n = f.len() - 1;
    let grid = MidpointGrid { kernel, a: ps.a, h, n };
    let (p, q) = (ps.p, ps.q);
    let out: Vec<(f64, bool)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let value = dot(&grid.row(i, p, q, MIDPOINT_SUBCELLS), f);
            let coarse = grid.adjacent(i, p, q, MIDPOINT_SUBCELLS, f);
            let fine = grid.adjacent(i, p, q, 2 * MIDPOINT_SUBCELLS, f);
            let change = (fine - coarse).abs();
            let diverging = !value.is_finite() || !change.is_finite() || change > DIVERGENCE_CHANGE * value.abs();
            (value, diverging)
        })
        .collect();
    out.into_iter().unzip()
}

/// Replaces flagged values by linear interpolation (or extrapolation) from
/// the nearest unflagged nodes.
fn repair(values: &mut [f64], flagged: &[bool]) -> Result<()> {
    let good: Vec<usize> = (0..values.len()).filter(|&i| !flagged[i]).collect();
    if good.len() < 2 {
        return Err(Error::NumericalOverflow(
            "quadrature diverged at nearly every node".into(),
        ));
    }
    for i in 0..values.len() {
        if !flagged[i] {
            continue;
        }
        let pos = good.partition_point(|&g| g < i);
        let (l, r) = if pos == 0 {
            (good[0], good[1])
        } else if pos == good.len() {
            (good[pos - 2], good[pos - 1])
        } else {
            (good[pos - 1], good[pos])
        };
        let frac = (i as f64 - l as f64) / (r as f64 - l as f64);
        values[i] = values[l] + frac * (values[r] - values[l]);
    }
    Ok(())
}

/// K_P f: p∫_a^t k(t,τ)f(τ)dτ + q∫_t^b k(τ,t)f(τ)dτ at every node of f's grid.
pub fn k_op(ps: &ParamSet, kernel: &Kernel, f: &GridFunction, cfg: &OperatorConfig) -> Result<OpOutput> {
    check_grid(ps, f, cfg)?;
    let n = f.n();
    let h = f.step();
    let (mut values, flagged) = if uses_product_rule(kernel, cfg)? {
        (product_apply(ps, kernel, f.values(), h)?, vec![false; n + 1])
    } else {
        midpoint_apply(ps, kernel, f.values(), h)
    };
    if flagged.iter().any(|&x| x) {
        repair(&mut values, &flagged)?;
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(format!("K-op value at node {i}")));
    }
    Ok(OpOutput { values: f.with_values(values)?, flagged })
}

/// Dense matrix M with (K_P f)_i = Σ_j M_ij f_j on n intervals of [a, b].
/// The midpoint path is assembled without divergence repair.
pub fn k_matrix(ps: &ParamSet, kernel: &Kernel, n: usize, cfg: &OperatorConfig) -> Result<DMatrix<f64>> {
    ps.validate()?;
    cfg.validate()?;
    let h = (ps.b - ps.a) / n as f64;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    if uses_product_rule(kernel, cfg)? {
        let (far, near) = product_weights(kernel, n, h)?;
        for i in 0..=n {
            if ps.p != 0.0 {
                for k in 1..=i {
                    m[(i, i - k)] += ps.p * far[k];
                    m[(i, i - k + 1)] += ps.p * near[k];
                }
            }
            if ps.q != 0.0 {
                for k in 1..=n - i {
                    m[(i, i + k - 1)] += ps.q * near[k];
                    m[(i, i + k)] += ps.q * far[k];
                }
            }
        }
    } else {
        let grid = MidpointGrid { kernel, a: ps.a, h, n };
        for i in 0..=n {
            for (j, w) in grid.row(i, ps.p, ps.q, MIDPOINT_SUBCELLS).into_iter().enumerate() {
                m[(i, j)] = w;
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(format!("{} operator matrix", kernel.name())));
    }
    Ok(m)
}

/// Dense finite-difference matrix on n intervals of [a, b].
pub fn derivative_matrix(a: f64, b: f64, n: usize, scheme: DerivativeScheme) -> DMatrix<f64> {
    let h = (b - a) / n as f64;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for (r, c, w) in derivative_stencil(n, h, scheme) {
        m[(r, c)] += w;
    }
    m
}

/// Nodes next to a singular endpoint of the A-op.
fn endpoint_mask(ps: &ParamSet, kernel: &Kernel, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n + 1];
    if kernel.singular_at_diagonal() {
        if ps.p != 0.0 {
            mask[0] = true;
            mask[1.min(n)] = true;
        }
        if ps.q != 0.0 {
            mask[n] = true;
            mask[n.saturating_sub(1)] = true;
        }
    }
    mask
}

/// A_P f = d/dt K_P^{1−α} f.
///
/// K is evaluated on a grid refined by `cfg.refine_factor` and differentiated
/// with second-order differences (one-sided at the ends), then sampled back.
pub fn a_op(ps: &ParamSet, kernel_1ma: &Kernel, f: &GridFunction, cfg: &OperatorConfig) -> Result<OpOutput> {
    check_grid(ps, f, cfg)?;
    let r = cfg.refine_factor;
    let n = f.n();
    let fine = f.refine(r)?;
    let k = k_op(ps, kernel_1ma, &fine, cfg)?;
    let d = differentiate(k.values.values(), fine.step(), DerivativeScheme::OneSided2AtEnds);
    let limit = f.max_abs() / (f.step() * f.step());
    if d[0].abs() > limit {
        return Err(Error::DerivativeBlowup("left"));
    }
    if d[d.len() - 1].abs() > limit {
        return Err(Error::DerivativeBlowup("right"));
    }
    let mut flagged = endpoint_mask(ps, kernel_1ma, n);
    let nf = fine.n();
    for (i, flag) in flagged.iter_mut().enumerate() {
        let lo = (i * r).saturating_sub(2);
        let hi = (i * r + 2).min(nf);
        *flag |= k.flagged[lo..=hi].iter().any(|&x| x);
    }
    let values: Vec<f64> = d.iter().step_by(r).copied().collect();
    Ok(OpOutput { values: f.with_values(values)?, flagged })
}

/// B_P f = K_P^{1−α} f′, with f′ supplied or formed by finite differences.
pub fn b_op(
    ps: &ParamSet,
    kernel_1ma: &Kernel,
    f: &GridFunction,
    f_prime: Option<&GridFunction>,
    cfg: &OperatorConfig,
) -> Result<OpOutput> {
    check_grid(ps, f, cfg)?;
    let fp = match f_prime {
        Some(d) if d.same_grid(f) => d.clone(),
        Some(_) => return Err(Error::InvalidDomain("f and f' live on different grids".into())),
        None => f.derivative(cfg.derivative_scheme)?,
    };
    k_op(ps, kernel_1ma, &fp, cfg)
}

/// Outcome of [`operator_norm_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormCheck {
    pub empirical_ratio_max: f64,
    pub l2_bound: f64,
}

impl NormCheck {
    /// Empirical ratio within 5% of the Hilbert-Schmidt bound.
    pub fn within_bound(&self) -> bool {
        self.empirical_ratio_max <= self.l2_bound * 1.05
    }
}

fn general_hs_sum(ps: &ParamSet, kernel: &Kernel, n: usize) -> f64 {
    let h = (ps.b - ps.a) / n as f64;
    let x = |i: usize| ps.a + i as f64 * h;
    let (p2, q2) = (ps.p * ps.p, ps.q * ps.q);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if i == j {
                    // triangle centroids keep the samples off the diagonal
                    let lo = kernel.raw(x(i) + 2.0 * h / 3.0, x(i) + h / 3.0);
                    acc += 0.5 * (p2 + q2) * lo * lo;
                } else {
                    let (t, tau) = (x(i) + 0.5 * h, x(j) + 0.5 * h);
                    let v = if tau < t { kernel.raw(t, tau) } else { kernel.raw(tau, t) };
                    acc += if tau < t { p2 } else { q2 } * v * v;
                }
            }
            acc * h * h
        })
        .sum()
}

fn hs_norm(ps: &ParamSet, kernel: &Kernel) -> Result<f64> {
    let len = ps.b - ps.a;
    let weight = ps.p * ps.p + ps.q * ps.q;
    if weight == 0.0 {
        return Ok(0.0);
    }
    if let Some(k) = kernel.profile_raw() {
        let k = k.clone();
        let i = integrate_with_origin_check(|s| (len - s) * k(s) * k(s), len, 1e-12).map_err(|e| match e {
            Error::NotIntegrable(msg) => Error::NotSquareIntegrable(msg),
            other => other,
        })?;
        return Ok((weight * i).sqrt());
    }
    let sums: Vec<f64> = [64, 128, 256, 512].iter().map(|&m| general_hs_sum(ps, kernel, m)).collect();
    if sums.iter().any(|s| !s.is_finite()) {
        return Err(Error::NotSquareIntegrable(format!("{} has non-finite samples", kernel.name())));
    }
    let d1 = sums[2] - sums[1];
    let d2 = sums[3] - sums[2];
    if d2 > 0.9 * d1.abs() && d2 > 1e-3 * sums[3].abs() {
        return Err(Error::NotSquareIntegrable(format!(
            "double integral of {}² keeps growing under refinement",
            kernel.name()
        )));
    }
    Ok(sums[3].sqrt())
}

/// Compares ‖K_P f‖₂/‖f‖₂ over random piecewise-linear f with the
/// Hilbert-Schmidt norm of K_P.
pub fn operator_norm_check(ps: &ParamSet, kernel: &Kernel, trials: usize, n: usize) -> Result<NormCheck> {
    ps.validate()?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let l2_bound = hs_norm(ps, kernel)?;
    let cfg = OperatorConfig::default();
    let mut empirical = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f_726d + trial as u64);
        let vals: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = GridFunction::new(ps.a, ps.b, vals)?;
        let kf = k_op(ps, kernel, &f, &cfg)?;
        let num: Vec<f64> = kf.values.values().iter().map(|v| v * v).collect();
        let den: Vec<f64> = f.values().iter().map(|v| v * v).collect();
        let ratio = (trapezoid(&num, f.step()) / trapezoid(&den, f.step())).sqrt();
        empirical = empirical.max(ratio);
    }
    Ok(NormCheck { empirical_ratio_max: empirical, l2_bound })
}
