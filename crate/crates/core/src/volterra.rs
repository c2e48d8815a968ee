//! Resolvent kernels, first-kind Volterra equations, and the closed-form
//! extremals of the two worked examples.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernels::{Kernel, KernelKind};
use crate::quadrature::tanh_sinh;
use crate::specfun::{mittag_leffler, MLParams};

/// Resolvent request: a nonsingular difference kernel on [0, horizon].
#[derive(Debug, Clone)]
pub struct ResolventSpec {
    pub kernel: Kernel,
    pub horizon: f64,
    pub n: usize,
}

/// Resolvent r with r̃ = 1/(s k̃) − 1.
///
/// When k(0) = c ≠ 1 the resolvent carries an atom (1/c − 1)δ at the origin;
/// `values` holds the regular part and `atom` that weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub values: GridFunction,
    pub atom: f64,
    /// k(0) differed from 1 and the kernel was rescaled.
    pub rescaled: bool,
}

fn check_difference(kernel: &Kernel) -> Result<f64> {
    if kernel.kind() != KernelKind::Difference || kernel.singular_at_diagonal() {
        return Err(Error::Precondition(format!(
            "{} must be a difference kernel that is finite at 0",
            kernel.name()
        )));
    }
    let k0 = kernel.profile(0.0)?;
    if k0 == 0.0 || !k0.is_finite() {
        return Err(Error::NonInvertible(format!("{} has k(0) = {k0}", kernel.name())));
    }
    Ok(k0)
}

/// Marches c·r(t) = −k′(t) − ∫_0^t k′(t−τ) r(τ) dτ, the derivative form of
/// k + k∗r = 1, with the product trapezoid rule. Moments of k′ come from k.
pub fn resolvent(spec: &ResolventSpec) -> Result<Resolvent> {
    let kernel = &spec.kernel;
    let c = check_difference(kernel)?;
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(Error::InvalidDomain(format!("horizon {}", spec.horizon)));
    }
    if spec.n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let n = spec.n;
    let h = spec.horizon / n as f64;
    // weights of k′/c over cell m, split between its far and near ends
    let mut far = vec![0.0; n + 1];
    let mut near = vec![0.0; n + 1];
    for m in 1..=n {
        let (s1, s2) = ((m - 1) as f64 * h, m as f64 * h);
        let (m0, _) = kernel.cell_moments(s1, s2)?;
        let k2 = kernel.profile(s2)?;
        let d0 = k2 - kernel.profile(s1)?;
        let d1 = (s2 - s1) * k2 - m0;
        far[m] = d1 / h / c;
        near[m] = (d0 - d1 / h) / c;
    }
    let mut r = vec![0.0; n + 1];
    r[0] = -kernel.profile_derivative(0.0)? / c;
    let pivot = 1.0 + near[1];
    if pivot.abs() < 1e-14 {
        return Err(Error::NonInvertible("resolvent march has a vanishing pivot".into()));
    }
    for i in 1..=n {
        let mut acc = kernel.profile_derivative(i as f64 * h)? / c + far[1] * r[i - 1];
        for m in 2..=i {
            acc += far[m] * r[i - m] + near[m] * r[i - m + 1];
        }
        r[i] = -acc / pivot;
        if !r[i].is_finite() {
            return Err(Error::NumericalOverflow(format!("resolvent at node {i}")));
        }
    }
    let values: Vec<f64> = r.iter().map(|v| v / c).collect();
    Ok(Resolvent {
        values: GridFunction::new(0.0, spec.horizon, values)?,
        atom: 1.0 / c - 1.0,
        rescaled: c != 1.0,
    })
}

/// (ξ − 1)(1 + ∫_0^t r(t−τ) dτ): the solution of ∫_0^t k(t−τ) y(τ) dτ = (ξ − 1)t.
pub fn resolvent_extremal(res: &Resolvent, xi: f64) -> Result<GridFunction> {
    let v = res.values.values();
    let h = res.values.step();
    let mut y = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    y.push((xi - 1.0) * (1.0 + res.atom));
    for i in 1..v.len() {
        acc += 0.5 * h * (v[i - 1] + v[i]);
        y.push((xi - 1.0) * (1.0 + res.atom + acc));
    }
    res.values.with_values(y)
}

/// Solves ∫_a^t k(t−τ) y(τ) dτ = rhs(t) for y on rhs's grid.
///
/// The unknowns are cell-midpoint values y_{j+½}, so node i gives
/// Σ_{j<i} h·k(t_i − τ_{j+½}) y_{j+½} = rhs_i, solved by forward substitution
/// from y_{½} = rhs₁/(h·k(h/2)). Nodal values are averages of neighbouring
/// midpoints, extrapolated linearly at the two ends.
pub fn volterra_first_kind(kernel: &Kernel, rhs: &GridFunction) -> Result<GridFunction> {
    check_difference(kernel)?;
    let n = rhs.n();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two intervals".into()));
    }
    let f = rhs.values();
    if f[0].abs() > 1e-10 * rhs.max_abs().max(1.0) {
        return Err(Error::InconsistentData(format!(
            "first-kind equation needs rhs(a) = 0, got {}",
            f[0]
        )));
    }
    let h = rhs.step();
    let w: Vec<f64> = (0..n).map(|m| kernel.profile((m as f64 + 0.5) * h).map(|k| h * k)).collect::<Result<_>>()?;
    if w[0] == 0.0 {
        return Err(Error::NonInvertible("k(h/2) = 0".into()));
    }
    let mut mid = vec![0.0; n];
    for i in 1..=n {
        let mut acc = f[i];
        for j in 0..i - 1 {
            acc -= w[i - 1 - j] * mid[j];
        }
        mid[i - 1] = acc / w[0];
        if !mid[i - 1].is_finite() {
            return Err(Error::NumericalOverflow(format!("first-kind march at node {i}")));
        }
    }
    let mut y = vec![0.0; n + 1];
    y[0] = 1.5 * mid[0] - 0.5 * mid[1];
    y[n] = 1.5 * mid[n - 1] - 0.5 * mid[n - 2];
    for i in 1..n {
        y[i] = 0.5 * (mid[i - 1] + mid[i]);
    }
    rhs.with_values(y)
}

fn check_alpha(alpha: f64) -> Result<MLParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is not in (0, 1)")));
    }
    MLParams::new(1.0 - alpha, 1.0)
}

/// y(t) = ξ ∫_a^t E_{1−α,1}(−(t−τ)^{1−α}) dτ on n intervals of [a, b].
pub fn example1_extremal(alpha: f64, xi: f64, a: f64, b: f64, n: usize) -> Result<GridFunction> {
    let ml = check_alpha(alpha)?;
    let mut y = GridFunction::zeros(a, b, n)?;
    if xi == 0.0 {
        return Ok(y);
    }
    let beta = 1.0 - alpha;
    let integrand = |s: f64| mittag_leffler(&ml, -s.powf(beta));
    // surface series failures before the quadrature sees a NaN
    integrand(b - a)?;
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for i in 1..=n {
        let (s1, s2) = (y.node(i - 1) - a, y.node(i) - a);
        let q = tanh_sinh(|s| integrand(s).unwrap_or(f64::NAN), s1, s2, 1e-14)?;
        acc += q.value;
        values.push(xi * acc);
    }
    y = y.with_values(values)?;
    Ok(y)
}

/// y′(t) = ξ E_{1−α,1}(−(t−a)^{1−α}).
pub fn example1_derivative(alpha: f64, xi: f64, a: f64, b: f64, n: usize) -> Result<GridFunction> {
    let ml = check_alpha(alpha)?;
    let grid = GridFunction::zeros(a, b, n)?;
    let values = (0..=n)
        .map(|i| mittag_leffler(&ml, -(grid.node(i) - a).powf(1.0 - alpha)).map(|e| xi * e))
        .collect::<Result<Vec<_>>>()?;
    grid.with_values(values)
}

/// Closed-form extremals for the exponential and cosine kernels.
pub fn example2_closed_form(kernel_name: &str, alpha: f64, xi: f64, t: f64) -> Result<f64> {
    match kernel_name {
        "exponential" => Ok((xi - 1.0) * (1.0 - alpha * t)),
        "cosine" => Ok((xi - 1.0) * (1.0 + alpha * alpha * t * t / 2.0)),
        other => Err(Error::Schema(format!(
            "example 2 has closed forms for exponential and cosine, not '{other}'"
        ))),
    }
}
