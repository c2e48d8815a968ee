//! Kernel objects, the built-in families, and kernel-level hypothesis checks.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::{gauss_legendre8, integrate_with_origin_check, tanh_sinh};
use crate::specfun::gamma;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type TwoVar = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Moments = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    General,
    /// k(t, τ) = κ(t − τ).
    Difference,
}

#[derive(Clone)]
enum Form {
    General(TwoVar),
    Difference(Profile),
}

/// A kernel k(t, τ) of a given order.
///
/// Difference kernels may carry closed-form cell moments
/// `(s1, s2) -> (∫κ, ∫(s − s1)κ)` over [s1, s2] ⊂ [0, ∞), which is what the
/// product quadrature in `operators` integrates through the singularity.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    order: f64,
    kind: KernelKind,
    singular_at_diagonal: bool,
    form: Form,
    moments: Option<Moments>,
    derivative: Option<Profile>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("kind", &self.kind)
            .field("singular_at_diagonal", &self.singular_at_diagonal)
            .field("moments", &self.moments.is_some())
            .finish()
    }
}

fn check_order(order: f64) -> Result<()> {
    if order > 0.0 && order < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel order must lie in (0, 1), got {order}")))
    }
}

// φ1(x) = (eˣ − 1)/x
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

// φ2(x) = (eˣ − 1 − x)/x²
fn phi2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..12 {
            term *= x / (k + 2) as f64;
            sum += term;
        }
        sum
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

impl Kernel {
    /// κ(s) = s^{β−1}/Γ(β), the Riemann-Liouville power kernel of order β.
    pub fn riemann_liouville(order: f64) -> Result<Kernel> {
        check_order(order)?;
        let gb = gamma(order)?;
        let gb1 = gamma(order + 1.0)?;
        let beta = order;
        let moments = move |s1: f64, s2: f64| {
            let w = s2 - s1;
            let m0 = if s1 == 0.0 {
                s2.powf(beta) / gb1
            } else {
                s1.powf(beta) * (beta * (w / s1).ln_1p()).exp_m1() / gb1
            };
            let m1 = if s1 < w {
                (s2.powf(beta + 1.0) - s1.powf(beta + 1.0)) / ((beta + 1.0) * gb) - s1 * m0
            } else {
                gauss_legendre8(|s| (s - s1) * s.powf(beta - 1.0) / gb, s1, s2)
            };
            (m0, m1)
        };
        Ok(Kernel {
            name: format!("riemann_liouville({order})"),
            order,
            kind: KernelKind::Difference,
            singular_at_diagonal: true,
            // even extension for s < 0
            form: Form::Difference(Arc::new(move |s: f64| s.abs().powf(beta - 1.0) / gb)),
            moments: Some(Arc::new(moments)),
            derivative: Some(Arc::new(move |s: f64| (beta - 1.0) * s.powf(beta - 2.0) / gb)),
        })
    }

    /// κ(s) = e^{αs}.
    pub fn exponential(alpha: f64) -> Result<Kernel> {
        check_order(alpha)?;
        let moments = move |s1: f64, s2: f64| {
            let w = s2 - s1;
            let base = (alpha * s1).exp();
            // ∫_0^w x e^{αx} dx = w² e^{αw} φ2(−αw)
            let m1 = base * w * w * (alpha * w).exp() * phi2(-alpha * w);
            (base * w * phi1(alpha * w), m1)
        };
        Ok(Kernel {
            name: format!("exponential({alpha})"),
            order: alpha,
            kind: KernelKind::Difference,
            singular_at_diagonal: false,
            form: Form::Difference(Arc::new(move |s: f64| (alpha * s).exp())),
            moments: Some(Arc::new(moments)),
            derivative: Some(Arc::new(move |s: f64| alpha * (alpha * s).exp())),
        })
    }

    /// κ(s) = cos(αs).
    pub fn cosine(alpha: f64) -> Result<Kernel> {
        check_order(alpha)?;
        let moments = move |s1: f64, s2: f64| {
            let w = s2 - s1;
            let m0 = 2.0 * (alpha * 0.5 * (s1 + s2)).cos() * (alpha * 0.5 * w).sin() / alpha;
            let m1 = if alpha * w > 0.5 {
                w * (alpha * s2).sin() / alpha + ((alpha * s2).cos() - (alpha * s1).cos()) / (alpha * alpha)
            } else {
                gauss_legendre8(|s| (s - s1) * (alpha * s).cos(), s1, s2)
            };
            (m0, m1)
        };
        Ok(Kernel {
            name: format!("cosine({alpha})"),
            order: alpha,
            kind: KernelKind::Difference,
            singular_at_diagonal: false,
            form: Form::Difference(Arc::new(move |s: f64| (alpha * s).cos())),
            moments: Some(Arc::new(moments)),
            derivative: Some(Arc::new(move |s: f64| -alpha * (alpha * s).sin())),
        })
    }

    /// k(t, τ) = (t² − τ²)/(t² + τ²)², singular only at the origin.
    /// Carries a nominal order of 1/2.
    pub fn counterexample() -> Kernel {
        Kernel {
            name: "counterexample".into(),
            order: 0.5,
            kind: KernelKind::General,
            singular_at_diagonal: false,
            form: Form::General(Arc::new(|t: f64, tau: f64| {
                let (t2, tau2) = (t * t, tau * tau);
                let d = t2 + tau2;
                (t2 - tau2) / (d * d)
            })),
            moments: None,
            derivative: None,
        }
    }

    /// κ(s) = 1. Carries a nominal order of 1/2.
    pub fn constant_one() -> Kernel {
        Kernel {
            name: "constant_one".into(),
            order: 0.5,
            kind: KernelKind::Difference,
            singular_at_diagonal: false,
            form: Form::Difference(Arc::new(|_| 1.0)),
            moments: Some(Arc::new(|s1: f64, s2: f64| {
                let w = s2 - s1;
                (w, 0.5 * w * w)
            })),
            derivative: Some(Arc::new(|_| 0.0)),
        }
    }

    /// A kernel given by an expression in `t`, `tau`, `s` (= t − τ) and
    /// `alpha` (= `order`). Difference kernels may only use `s` and `alpha`.
    pub fn from_expr(source: &str, kind: KernelKind, order: f64, singular_at_diagonal: bool) -> Result<Kernel> {
        check_order(order)?;
        let expr = Expr::parse(source, &["t", "tau", "s", "alpha"])?;
        let form = match kind {
            KernelKind::Difference => {
                if expr.uses("t") || expr.uses("tau") {
                    return Err(Error::InvalidParameter(format!(
                        "difference kernel '{source}' may only depend on s and alpha"
                    )));
                }
                Form::Difference(Arc::new(move |s: f64| expr.eval(&[0.0, 0.0, s, order])))
            }
            KernelKind::General => {
                Form::General(Arc::new(move |t: f64, tau: f64| expr.eval(&[t, tau, t - tau, order])))
            }
        };
        Ok(Kernel {
            name: format!("custom({source})"),
            order,
            kind,
            singular_at_diagonal,
            form,
            moments: None,
            derivative: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn singular_at_diagonal(&self) -> bool {
        self.singular_at_diagonal
    }

    pub fn has_moment(&self) -> bool {
        self.moments.is_some()
    }

    /// k(t, τ). Points on the diagonal of a singular kernel, and points where
    /// the kernel is not finite, are out of its domain.
    pub fn eval(&self, t: f64, tau: f64) -> Result<f64> {
        if self.singular_at_diagonal && t == tau {
            return Err(Error::OutOfDomain { t, tau });
        }
        let v = self.raw(t, tau);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OutOfDomain { t, tau })
        }
    }

    /// Unchecked evaluation.
    pub(crate) fn raw(&self, t: f64, tau: f64) -> f64 {
        match &self.form {
            Form::General(f) => f(t, tau),
            Form::Difference(k) => k(t - tau),
        }
    }

    /// κ(s) for a difference kernel.
    pub fn profile(&self, s: f64) -> Result<f64> {
        match &self.form {
            Form::Difference(k) => {
                let v = k(s);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::OutOfDomain { t: s, tau: 0.0 })
                }
            }
            Form::General(_) => Err(Error::Precondition(format!("{} is not a difference kernel", self.name))),
        }
    }

    pub(crate) fn profile_raw(&self) -> Option<&Profile> {
        match &self.form {
            Form::Difference(k) => Some(k),
            Form::General(_) => None,
        }
    }

    /// κ′(s): closed form for built-ins, finite differences otherwise.
    pub fn profile_derivative(&self, s: f64) -> Result<f64> {
        let k = self
            .profile_raw()
            .ok_or_else(|| Error::Precondition(format!("{} is not a difference kernel", self.name)))?;
        let v = match &self.derivative {
            Some(d) => d(s),
            None => {
                let h = 1e-4 * s.abs().max(1.0);
                if s >= 2.0 * h || !self.singular_at_diagonal && s < 0.0 {
                    (-k(s + 2.0 * h) + 8.0 * k(s + h) - 8.0 * k(s - h) + k(s - 2.0 * h)) / (12.0 * h)
                } else {
                    // fourth-order forward stencil
                    (-25.0 * k(s) + 48.0 * k(s + h) - 36.0 * k(s + 2.0 * h) + 16.0 * k(s + 3.0 * h)
                        - 3.0 * k(s + 4.0 * h))
                        / (12.0 * h)
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OutOfDomain { t: s, tau: 0.0 })
        }
    }

    /// Closed-form ∫_{s1}^{s2} κ(s) ds, when the kernel provides one.
    pub fn moment(&self, s1: f64, s2: f64) -> Option<f64> {
        if !(0.0 <= s1 && s1 < s2) {
            return None;
        }
        self.moments.as_ref().map(|m| m(s1, s2).0)
    }

    /// Zeroth and first local moments over [s1, s2]: ∫κ and ∫(s − s1)κ.
    /// Falls back to Gauss-Legendre for nonsingular difference kernels.
    pub(crate) fn cell_moments(&self, s1: f64, s2: f64) -> Result<(f64, f64)> {
        if let Some(m) = &self.moments {
            return Ok(m(s1, s2));
        }
        match &self.form {
            Form::Difference(k) if !self.singular_at_diagonal => Ok((
                gauss_legendre8(|s| k(s), s1, s2),
                gauss_legendre8(|s| (s - s1) * k(s), s1, s2),
            )),
            _ => Err(Error::Configuration(format!(
                "{} has no closed-form moments; product quadrature needs them",
                self.name
            ))),
        }
    }
}

/// Result of [`check_separability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separability {
    pub holds: bool,
    pub max_mixed_difference: f64,
}

/// Tests whether S(t,τ) = ∫_a^t k(θ,τ)dθ + ∫_a^τ k(t,θ)dθ splits as g(t) + f(τ).
///
/// S is formed on the (n+1)² node grid by midpoint sums, whose abscissae
/// sit half a step away from every node, and the largest normalized mixed
/// second difference is reported.
pub fn check_separability(kernel: &Kernel, a: f64, b: f64, n: usize, tol: f64) -> Result<Separability> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
    }
    if n < 8 {
        return Err(Error::InvalidParameter(format!("separability check needs n >= 8, got {n}")));
    }
    let h = (b - a) / n as f64;
    let node = |i: usize| a + i as f64 * h;
    let mid = |j: usize| a + (j as f64 + 0.5) * h;

    let eval = |t: f64, tau: f64| -> Result<f64> {
        let v = kernel.raw(t, tau);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::QuadratureFailure(format!(
                "{} is not finite at ({t}, {tau}) with n = {n}",
                kernel.name()
            )))
        }
    };

    // left[i][l] = h Σ_{j<i} k(θ_j, t_l), right[i][l] = h Σ_{j<l} k(t_i, θ_j)
    let m = n + 1;
    let mut s = vec![0.0; m * m];
    for l in 0..m {
        let mut acc = 0.0;
        for i in 0..m {
            s[i * m + l] = acc;
            if i < n {
                acc += h * eval(mid(i), node(l))?;
            }
        }
    }
    for i in 0..m {
        let mut acc = 0.0;
        for l in 0..m {
            s[i * m + l] += acc;
            if l < n {
                acc += h * eval(node(i), mid(l))?;
            }
        }
    }
    let mut max_mixed = 0.0f64;
    for i in 0..n {
        for l in 0..n {
            let d = s[(i + 1) * m + l + 1] - s[(i + 1) * m + l] - s[i * m + l + 1] + s[i * m + l];
            max_mixed = max_mixed.max((d / (h * h)).abs());
        }
    }
    Ok(Separability { holds: max_mixed <= tol, max_mixed_difference: max_mixed })
}

/// ∫_0^length |κ(s)| ds for a difference kernel.
///
/// Uses the closed-form moment when κ keeps one sign; otherwise integrates
/// |κ| adaptively, split at the origin and at located sign changes.
pub fn l1_norm_estimate(kernel: &Kernel, length: f64) -> Result<f64> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
    }
    let k = kernel
        .profile_raw()
        .ok_or_else(|| Error::Precondition(format!("{} is not a difference kernel", kernel.name())))?
        .clone();
    const SAMPLES: usize = 256;
    let xs: Vec<f64> = (1..=SAMPLES).map(|i| length * i as f64 / SAMPLES as f64).collect();
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (k(lo), k(hi));
        if flo == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if k(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if roots.is_empty() {
        if let Some(m0) = kernel.moment(0.0, length) {
            return Ok(m0.abs());
        }
    }
    let first = roots.first().copied().unwrap_or(length);
    let mut total = integrate_with_origin_check(|s| k(s).abs(), first, 1e-12)?;
    let mut edges = roots.clone();
    edges.push(length);
    for w in edges.windows(2) {
        total += tanh_sinh(|s| k(s).abs(), w[0], w[1], 1e-12)?.value;
    }
    Ok(total)
}

/// Names accepted in [`KernelSpec::name`].
pub const KERNEL_NAMES: [&str; 6] = [
    "riemann_liouville",
    "exponential",
    "cosine",
    "counterexample",
    "constant_one",
    "custom",
];

/// Serializable kernel selection used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<KernelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular: Option<bool>,
}

impl KernelSpec {
    pub fn named(name: &str, alpha: f64) -> Self {
        KernelSpec { name: name.into(), alpha: Some(alpha), ..Default::default() }
    }

    /// Builds the kernel; `default_order` is used when `alpha` is absent.
    pub fn build(&self, default_order: f64) -> Result<Kernel> {
        let order = self.alpha.unwrap_or(default_order);
        match self.name.as_str() {
            "riemann_liouville" | "rl" => Kernel::riemann_liouville(order),
            "exponential" => Kernel::exponential(order),
            "cosine" => Kernel::cosine(order),
            "counterexample" => Ok(Kernel::counterexample()),
            "constant_one" => Ok(Kernel::constant_one()),
            "custom" => {
                let src = self
                    .expr
                    .as_deref()
                    .ok_or_else(|| Error::Schema("custom kernel needs an 'expr' field".into()))?;
                Kernel::from_expr(
                    src,
                    self.kind.unwrap_or(KernelKind::Difference),
                    order,
                    self.singular.unwrap_or(false),
                )
            }
            other => Err(Error::Schema(format!(
                "unknown kernel '{other}'; valid names: {}",
                KERNEL_NAMES.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn builtins() -> Vec<Kernel> {
        vec![
            Kernel::riemann_liouville(0.5).unwrap(),
            Kernel::riemann_liouville(0.3).unwrap(),
            Kernel::exponential(0.5).unwrap(),
            Kernel::cosine(0.7).unwrap(),
            Kernel::constant_one(),
        ]
    }

    #[test]
    fn orders_are_validated() {
        assert!(Kernel::riemann_liouville(1.0).is_err());
        assert!(Kernel::exponential(0.0).is_err());
        assert!(Kernel::cosine(-0.2).is_err());
    }

    #[test]
    fn singular_diagonal_is_out_of_domain() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        assert_eq!(k.eval(0.3, 0.3), Err(Error::OutOfDomain { t: 0.3, tau: 0.3 }));
        assert!((k.eval(1.0, 0.0).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        let c = Kernel::counterexample();
        assert!(matches!(c.eval(0.0, 0.0), Err(Error::OutOfDomain { .. })));
        assert_eq!(c.eval(0.5, 0.5).unwrap(), 0.0);
        assert!((c.eval(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_match_adaptive_quadrature() {
        for k in builtins() {
            let prof = k.profile_raw().unwrap().clone();
            for &(s1, s2) in &[(1e-3, 1.0), (0.2, 0.21), (0.5, 3.0), (2.0, 2.001)] {
                let (m0, m1) = k.cell_moments(s1, s2).unwrap();
                let q0 = tanh_sinh(|s| prof(s), s1, s2, 1e-14).unwrap().value;
                let q1 = tanh_sinh(|s| (s - s1) * prof(s), s1, s2, 1e-14).unwrap().value;
                assert!(((m0 - q0) / q0).abs() < 1e-8, "{} m0 on [{s1},{s2}]", k.name());
                assert!(((m1 - q1) / q1).abs() < 1e-8, "{} m1 on [{s1},{s2}]", k.name());
            }
        }
    }

    #[test]
    fn rl_moment_from_origin() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let (m0, m1) = k.cell_moments(0.0, 1.0).unwrap();
        assert!((m0 - 2.0 / PI.sqrt()).abs() < 1e-14);
        // ∫ s·s^{-1/2}/Γ(1/2) = (2/3)/√π
        assert!((m1 - 2.0 / (3.0 * PI.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn separability_examples() {
        for k in builtins() {
            let r = check_separability(&k, 0.0, 1.0, 64, 1e-6).unwrap();
            assert!(r.holds, "{}: {}", k.name(), r.max_mixed_difference);
        }
        let tt = Kernel::from_expr("t*tau", KernelKind::General, 0.5, false).unwrap();
        let r = check_separability(&tt, 0.0, 1.0, 64, 1e-6).unwrap();
        assert!(!r.holds);
        // ∂²S/∂t∂τ = t + τ, largest at the last midpoint pair
        let h = 1.0 / 64.0;
        assert!((r.max_mixed_difference - (2.0 - h)).abs() < 1e-10, "{}", r.max_mixed_difference);
        assert!(matches!(check_separability(&tt, 1.0, 1.0, 64, 1e-6), Err(Error::InvalidDomain(_))));
        assert!(matches!(check_separability(&tt, 0.0, 1.0, 4, 1e-6), Err(Error::InvalidParameter(_))));
        let nan = Kernel::from_expr("sqrt(0 - 1 - t)", KernelKind::General, 0.5, false).unwrap();
        assert!(matches!(check_separability(&nan, 0.0, 1.0, 8, 1e-6), Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn l1_norms() {
        assert!((l1_norm_estimate(&Kernel::constant_one(), 1.0).unwrap() - 1.0).abs() < 1e-15);
        let rl = l1_norm_estimate(&Kernel::riemann_liouville(0.5).unwrap(), 1.0).unwrap();
        assert!((rl - 2.0 / PI.sqrt()).abs() < 1e-12);
        let e = l1_norm_estimate(&Kernel::exponential(0.5).unwrap(), 1.0).unwrap();
        assert!((e - 2.0 * (0.5f64.exp() - 1.0)).abs() < 1e-12);
        // cos changes sign on [0, 5] for α = 0.7: ∫|cos(0.7s)| by hand
        let c = l1_norm_estimate(&Kernel::cosine(0.7).unwrap(), 5.0).unwrap();
        let z = PI / 1.4;
        let exact = ((0.7 * z).sin() - ((0.7 * 5.0f64).sin() - (0.7 * z).sin())) / 0.7;
        assert!((c - exact).abs() < 1e-12, "{c} vs {exact}");
        let div = Kernel::from_expr("1/s", KernelKind::Difference, 0.5, true).unwrap();
        assert!(matches!(l1_norm_estimate(&div, 1.0), Err(Error::NotIntegrable(_))));
        assert!(matches!(
            l1_norm_estimate(&Kernel::counterexample(), 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn custom_kernels() {
        let k = Kernel::from_expr("exp(alpha*s)", KernelKind::Difference, 0.5, false).unwrap();
        let e = Kernel::exponential(0.5).unwrap();
        assert_eq!(k.eval(0.9, 0.2).unwrap(), e.eval(0.9, 0.2).unwrap());
        assert!((k.profile_derivative(0.3).unwrap() - e.profile_derivative(0.3).unwrap()).abs() < 1e-10);
        assert!((k.profile_derivative(0.0).unwrap() - 0.5).abs() < 1e-10);
        assert!(Kernel::from_expr("t - tau", KernelKind::Difference, 0.5, false).is_err());
        assert!(matches!(
            KernelSpec::named("bessel", 0.5).build(0.5),
            Err(Error::Schema(msg)) if msg.contains("riemann_liouville")
        ));
        let spec: KernelSpec = serde_json::from_str(r#"{"name": "riemann_liouville", "alpha": 0.5}"#).unwrap();
        assert_eq!(spec.build(0.1).unwrap().order(), 0.5);
    }
}
