//! Fractional variational and isoperimetric problems: Euler-Lagrange and
//! natural boundary residuals, a direct-method solver, and the coherence check.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{differentiate, GridFunction};
use crate::identities::{IdentityReport, Side};
use crate::kernels::Kernel;
use crate::operators::{a_op, b_op, derivative_matrix, k_matrix, k_op, OpOutput, OperatorConfig, ParamSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

type Slot = Arc<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>;

/// F(t, y, u, v, w) with its partials in y, u, v and w.
#[derive(Clone)]
pub struct Lagrangian {
    value: Slot,
    partials: [Slot; 4],
    label: String,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian").field("label", &self.label).finish()
    }
}

const GATE_POINTS: usize = 100;
const GATE_SEED: u64 = 0x4c61_6772;
const GATE_TOL: f64 = 1e-5;
const SLOT_NAMES: [&str; 4] = ["d2", "d3", "d4", "d5"];

impl Lagrangian {
    /// Builds a Lagrangian after checking each partial against central
    /// differences of `value` at seeded random points.
    pub fn new<F, D2, D3, D4, D5>(label: &str, value: F, d2: D2, d3: D3, d4: D4, d5: D5) -> Result<Self>
    where
        F: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        D3: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        D4: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        D5: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        let l = Lagrangian {
            value: Arc::new(value),
            partials: [Arc::new(d2), Arc::new(d3), Arc::new(d4), Arc::new(d5)],
            label: label.to_string(),
        };
        l.check_consistency()?;
        Ok(l)
    }

    /// Parses the value and partials from expressions in t, y, u, v, w.
    pub fn from_exprs(value: &str, partials: [&str; 4]) -> Result<Self> {
        let vars = ["t", "y", "u", "v", "w"];
        let slot = |src: &str| -> Result<Slot> {
            let e = Expr::parse(src, &vars)?;
            Ok(Arc::new(move |t, y, u, v, w| e.eval(&[t, y, u, v, w])))
        };
        let l = Lagrangian {
            value: slot(value)?,
            partials: [slot(partials[0])?, slot(partials[1])?, slot(partials[2])?, slot(partials[3])?],
            label: value.to_string(),
        };
        l.check_consistency()?;
        Ok(l)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, t: f64, y: f64, u: f64, v: f64, w: f64) -> f64 {
        (self.value)(t, y, u, v, w)
    }

    /// [∂F/∂y, ∂F/∂u, ∂F/∂v, ∂F/∂w].
    pub fn partials(&self, t: f64, y: f64, u: f64, v: f64, w: f64) -> [f64; 4] {
        [
            (self.partials[0])(t, y, u, v, w),
            (self.partials[1])(t, y, u, v, w),
            (self.partials[2])(t, y, u, v, w),
            (self.partials[3])(t, y, u, v, w),
        ]
    }

    /// F − λG.
    pub fn minus(&self, lambda: f64, g: &Lagrangian) -> Lagrangian {
        let combine = |x: &Slot, y: &Slot| -> Slot {
            let (x, y) = (x.clone(), y.clone());
            Arc::new(move |t, a, u, v, w| x(t, a, u, v, w) - lambda * y(t, a, u, v, w))
        };
        Lagrangian {
            value: combine(&self.value, &g.value),
            partials: std::array::from_fn(|k| combine(&self.partials[k], &g.partials[k])),
            label: format!("{} - {lambda}*({})", self.label, g.label),
        }
    }

    /// Largest relative mismatch between the partials and central differences
    /// over the gate points; errors if it exceeds the gate tolerance.
    pub fn check_consistency(&self) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(GATE_SEED);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for _ in 0..GATE_POINTS {
            let x: [f64; 5] = [
                rng.random_range(0.0..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let f = |z: &[f64; 5]| (self.value)(z[0], z[1], z[2], z[3], z[4]);
            if !f(&x).is_finite() {
                continue;
            }
            checked += 1;
            let d = self.partials(x[0], x[1], x[2], x[3], x[4]);
            for k in 0..4 {
                let h = 1e-5 * x[k + 1].abs().max(1.0);
                let (mut xp, mut xm) = (x, x);
                xp[k + 1] += h;
                xm[k + 1] -= h;
                let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                let err = (d[k] - fd).abs() / fd.abs().max(1.0);
                if !err.is_finite() || err > GATE_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "partial {} of '{}' disagrees with finite differences at {:?} ({} vs {})",
                        SLOT_NAMES[k], self.label, x, d[k], fd
                    )));
                }
                worst = worst.max(err);
            }
        }
        if checked == 0 {
            return Err(Error::InvalidParameter(format!("'{}' is not finite at any gate point", self.label)));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Boundary {
    Fixed { ya: f64, yb: f64 },
    /// y(a) free, y(b) prescribed.
    FreeStart { yb: f64 },
}

/// Isoperimetric constraint ∫ G = ξ.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub g: Lagrangian,
    pub xi: f64,
}

#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub a: f64,
    pub b: f64,
    pub p1: ParamSet,
    pub p2: ParamSet,
    pub alpha: f64,
    pub beta: f64,
    /// Order 1 − α; drives the B- and A-ops.
    pub kernel_b: Kernel,
    /// Order β; drives the K-op.
    pub kernel_k: Kernel,
    pub lagrangian: Lagrangian,
    pub bc: Boundary,
    pub constraint: Option<Constraint>,
    pub cfg: OperatorConfig,
}

const ORDER_TOL: f64 = 1e-12;

impl VariationalProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::InvalidDomain(format!("[{}, {}]", self.a, self.b)));
        }
        self.p1.validate()?;
        self.p2.validate()?;
        for ps in [&self.p1, &self.p2] {
            if ps.a != self.a || ps.b != self.b {
                return Err(Error::InvalidDomain(format!(
                    "parameter set on [{}, {}] does not match [{}, {}]",
                    ps.a, ps.b, self.a, self.b
                )));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not in (0, 1)")));
            }
        }
        if (self.kernel_b.order() - (1.0 - self.alpha)).abs() > ORDER_TOL {
            return Err(Error::InvalidParameter(format!(
                "B-kernel {} has order {}, expected 1 - alpha = {}",
                self.kernel_b.name(),
                self.kernel_b.order(),
                1.0 - self.alpha
            )));
        }
        if (self.kernel_k.order() - self.beta).abs() > ORDER_TOL {
            return Err(Error::InvalidParameter(format!(
                "K-kernel {} has order {}, expected beta = {}",
                self.kernel_k.name(),
                self.kernel_k.order(),
                self.beta
            )));
        }
        let finite = match self.bc {
            Boundary::Fixed { ya, yb } => ya.is_finite() && yb.is_finite(),
            Boundary::FreeStart { yb } => yb.is_finite(),
        };
        if !finite {
            return Err(Error::InvalidParameter("boundary values must be finite".into()));
        }
        self.cfg.validate()
    }

    fn check_bc(&self, y: &GridFunction) -> Result<()> {
        if y.a() != self.a || y.b() != self.b {
            return Err(Error::InvalidDomain("grid does not span the problem domain".into()));
        }
        let v = y.values();
        let bad = match self.bc {
            Boundary::Fixed { ya, yb } => (v[0] - ya).abs() > 1e-10 || (v[v.len() - 1] - yb).abs() > 1e-10,
            Boundary::FreeStart { yb } => (v[v.len() - 1] - yb).abs() > 1e-10,
        };
        if bad {
            return Err(Error::Precondition("y does not satisfy the boundary conditions".into()));
        }
        Ok(())
    }
}

/// Slot values {y}(t) = (t, y, y′, B y, K y) along a grid function.
struct Trajectory {
    t: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    v: OpOutput,
    w: OpOutput,
}

impl Trajectory {
    fn new(prob: &VariationalProblem, y: &GridFunction, cfg: &OperatorConfig) -> Result<Self> {
        let u = differentiate(y.values(), y.step(), cfg.derivative_scheme);
        let ug = y.with_values(u.clone())?;
        let v = b_op(&prob.p1, &prob.kernel_b, y, Some(&ug), cfg)?;
        let w = k_op(&prob.p2, &prob.kernel_k, y, cfg)?;
        Ok(Trajectory { t: y.nodes(), y: y.values().to_vec(), u, v, w })
    }

    fn partial(&self, l: &Lagrangian, slot: usize) -> Vec<f64> {
        (0..self.t.len())
            .map(|i| {
                l.partials(self.t[i], self.y[i], self.u[i], self.v.values.values()[i], self.w.values.values()[i])
                    [slot]
            })
            .collect()
    }
}

/// R = ∂₂F − d/dt ∂₃F − A_{P₁*} ∂₄F + K_{P₂*} ∂₅F along y.
///
/// `flagged` marks nodes excluded from residual norms: both endpoints and
/// any node an inner operator flagged.
pub fn el_residual(prob: &VariationalProblem, y: &GridFunction, cfg: &OperatorConfig) -> Result<OpOutput> {
    prob.validate()?;
    prob.check_bc(y)?;
    let tr = Trajectory::new(prob, y, cfg)?;
    let lag = &prob.lagrangian;
    let d2 = tr.partial(lag, 0);
    let d3 = tr.partial(lag, 1);
    let d4 = y.with_values(tr.partial(lag, 2))?;
    let d5 = y.with_values(tr.partial(lag, 3))?;
    let dd3 = differentiate(&d3, y.step(), crate::grid::DerivativeScheme::Central2);
    let a4 = a_op(&prob.p1.dual(), &prob.kernel_b, &d4, cfg)?;
    let k5 = k_op(&prob.p2.dual(), &prob.kernel_k, &d5, cfg)?;
    let n = y.n();
    let mut flagged = vec![false; n + 1];
    flagged[0] = true;
    flagged[n] = true;
    let mut r = vec![0.0; n + 1];
    for i in 0..=n {
        r[i] = d2[i] - dd3[i] - a4.values.values()[i] + k5.values.values()[i];
        flagged[i] |= a4.flagged[i] || k5.flagged[i] || tr.v.flagged[i] || tr.w.flagged[i] || !r[i].is_finite();
        if !r[i].is_finite() {
            r[i] = 0.0;
        }
    }
    Ok(OpOutput { values: y.with_values(r)?, flagged })
}

/// Max |R| over unflagged nodes.
pub fn max_unmasked(out: &OpOutput) -> f64 {
    max_unmasked_from(out, f64::NEG_INFINITY)
}

/// Max |R| over unflagged nodes with t ≥ `t_min`.
pub fn max_unmasked_from(out: &OpOutput, t_min: f64) -> f64 {
    let v = out.values.values();
    (0..v.len())
        .filter(|&i| !out.flagged[i] && out.values.node(i) >= t_min)
        .fold(0.0f64, |m, i| m.max(v[i].abs()))
}

/// |∂₃F(a) + (K_{P₁*}^{1−α} ∂₄F)(a)| for problems with y(a) free.
pub fn natural_bc_residual(prob: &VariationalProblem, y: &GridFunction, cfg: &OperatorConfig) -> Result<f64> {
    if !matches!(prob.bc, Boundary::FreeStart { .. }) {
        return Err(Error::Mode("natural boundary residual needs a free-start problem".into()));
    }
    prob.validate()?;
    prob.check_bc(y)?;
    let tr = Trajectory::new(prob, y, cfg)?;
    let d3 = tr.partial(&prob.lagrangian, 1);
    let d4 = y.with_values(tr.partial(&prob.lagrangian, 2))?;
    let k4 = k_op(&prob.p1.dual(), &prob.kernel_b, &d4, cfg)?;
    Ok((d3[0] + k4.values.values()[0]).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub y: GridFunction,
    pub lambda: Option<f64>,
    /// Max-norm of the Euler-Lagrange residual over unmasked interior nodes.
    pub el_residual: f64,
    pub constraint_residual: Option<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Max-norm of the discrete objective's gradient at the returned point.
    pub gradient_norm: f64,
    pub converged: bool,
}

/// The discretized functional Σ h F(t_c, ȳ_c, u_c, v̄_c, w̄_c) over cells,
/// where u_c is the cell difference quotient and the bars are averages of
/// nodal y, B y = K₁ D y and K y over the cell ends.
///
/// Cell difference quotients see every nodal mode, unlike the central
/// nodal derivative whose odd-even null space the optimizer would exploit.
pub struct Discretization {
    n: usize,
    h: f64,
    tc: Vec<f64>,
    /// Cell averages of B y, as an n × (n+1) matrix.
    vc: DMatrix<f64>,
    /// Cell averages of K y.
    wc: DMatrix<f64>,
    free: Vec<usize>,
    base: Vec<f64>,
}

struct CellSlots {
    y: Vec<f64>,
    u: Vec<f64>,
    v: DVector<f64>,
    w: DVector<f64>,
}

impl Discretization {
    pub fn new(prob: &VariationalProblem, n: usize) -> Result<Self> {
        prob.validate()?;
        if n < 4 {
            return Err(Error::InvalidParameter(format!("n = {n} is too small")));
        }
        let h = (prob.b - prob.a) / n as f64;
        let avg = DMatrix::from_fn(n, n + 1, |r, c| if c == r || c == r + 1 { 0.5 } else { 0.0 });
        let d = derivative_matrix(prob.a, prob.b, n, prob.cfg.derivative_scheme);
        let vc = &avg * (k_matrix(&prob.p1, &prob.kernel_b, n, &prob.cfg)? * d);
        let wc = &avg * k_matrix(&prob.p2, &prob.kernel_k, n, &prob.cfg)?;
        let (free, base) = match prob.bc {
            Boundary::Fixed { ya, yb } => {
                let base = (0..=n).map(|i| ya + (yb - ya) * i as f64 / n as f64).collect();
                ((1..n).collect(), base)
            }
            Boundary::FreeStart { yb } => ((0..n).collect(), vec![yb; n + 1]),
        };
        let tc = (0..n).map(|i| prob.a + (i as f64 + 0.5) * h).collect();
        Ok(Discretization { n, h, tc, vc, wc, free, base })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of decision variables.
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Initial point: the linear interpolant of the boundary data.
    pub fn initial(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.base[i]).collect()
    }

    pub fn full(&self, x: &[f64]) -> DVector<f64> {
        let mut y = DVector::from_vec(self.base.clone());
        for (&i, &v) in self.free.iter().zip(x) {
            y[i] = v;
        }
        y
    }

    fn slots(&self, y: &DVector<f64>) -> CellSlots {
        CellSlots {
            y: (0..self.n).map(|i| 0.5 * (y[i] + y[i + 1])).collect(),
            u: (0..self.n).map(|i| (y[i + 1] - y[i]) / self.h).collect(),
            v: &self.vc * y,
            w: &self.wc * y,
        }
    }

    /// Discrete ∫ F along y.
    pub fn objective(&self, lag: &Lagrangian, x: &[f64]) -> f64 {
        let c = self.slots(&self.full(x));
        (0..self.n).map(|i| self.h * lag.value(self.tc[i], c.y[i], c.u[i], c.v[i], c.w[i])).sum()
    }

    /// Objective and its exact gradient with respect to the free values.
    pub fn objective_and_gradient(&self, lag: &Lagrangian, x: &[f64]) -> Evaluation {
        let c = self.slots(&self.full(x));
        let n = self.n;
        let mut value = 0.0;
        let mut magnitude = 0.0;
        let mut full = DVector::zeros(n + 1);
        let mut g4 = DVector::zeros(n);
        let mut g5 = DVector::zeros(n);
        for i in 0..n {
            let (t, y, u, v, w) = (self.tc[i], c.y[i], c.u[i], c.v[i], c.w[i]);
            let term = self.h * lag.value(t, y, u, v, w);
            value += term;
            magnitude += term.abs();
            let p = lag.partials(t, y, u, v, w);
            let gy = 0.5 * self.h * p[0];
            full[i] += gy - p[1];
            full[i + 1] += gy + p[1];
            g4[i] = self.h * p[2];
            g5[i] = self.h * p[3];
        }
        full += self.vc.tr_mul(&g4) + self.wc.tr_mul(&g5);
        Evaluation { value, gradient: self.free.iter().map(|&i| full[i]).collect(), magnitude }
    }

    pub fn grid(&self, prob: &VariationalProblem, x: &[f64]) -> Result<GridFunction> {
        GridFunction::new(prob.a, prob.b, self.full(x).as_slice().to_vec())
    }
}

/// Objective value and gradient at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Sum of the magnitudes of the terms summed into `value`; sets the
    /// rounding scale of the objective.
    pub magnitude: f64,
}

/// Outcome of an unconstrained minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective and its magnitude after each accepted step, starting from
    /// the initial point.
    pub history: Vec<(f64, f64)>,
}

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_BACKTRACKS: usize = 60;
/// Objective increase, relative to its magnitude, attributable to rounding.
pub const ROUNDING_SLACK: f64 = 16.0 * f64::EPSILON;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// L-BFGS with backtracking. A step is accepted under the Armijo condition,
/// or, once the decrease is lost in rounding, when the objective grows by
/// at most [`ROUNDING_SLACK`] times its magnitude and the directional
/// derivative has shrunk (approximate Wolfe).
pub fn minimize<F>(f: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Evaluation,
{
    let mut x = x0;
    let e = f(&x);
    let (mut fx, mut g, mut scale) = (e.value, e.gradient, e.magnitude.max(e.value.abs()));
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow("objective at the initial point".into()));
    }
    let mut history = vec![(fx, scale)];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while max_norm(&g) > tol && iterations < max_iter {
        let mut d = two_loop(&g, &mem);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let step = match line_search(&f, &x, fx, scale, &d, slope)? {
            Some(s) => s,
            None if !mem.is_empty() => {
                mem.clear();
                d = g.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
                match line_search(&f, &x, fx, scale, &d, slope)? {
                    Some(s) => s,
                    None => return Err(Error::Stalled { iterations, gradient_norm: max_norm(&g) }),
                }
            }
            None => return Err(Error::Stalled { iterations, gradient_norm: max_norm(&g) }),
        };
        let (xn, e) = step;
        let (fxn, gn) = (e.value, e.gradient);
        scale = e.magnitude.max(fxn.abs());
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if mem.len() == LBFGS_MEMORY {
                mem.pop_front();
            }
            mem.push_back((s, yv, 1.0 / sy));
        }
        x = xn;
        fx = fxn;
        g = gn;
        history.push((fx, scale));
        iterations += 1;
    }
    let gradient_norm = max_norm(&g);
    Ok(Minimum { x, value: fx, gradient_norm, iterations, converged: gradient_norm <= tol, history })
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = mem.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn line_search<F>(f: &F, x: &[f64], fx: f64, scale: f64, d: &[f64], slope: f64) -> Result<Option<(Vec<f64>, Evaluation)>>
where
    F: Fn(&[f64]) -> Evaluation,
{
    let noise = ROUNDING_SLACK * scale;
    let mut s = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + s * b).collect();
        let e = f(&xn);
        if e.value.is_finite() && e.gradient.iter().all(|v| v.is_finite()) {
            // below rounding the sufficient-decrease test accepts standing still
            let armijo = -ARMIJO_C1 * s * slope > noise && e.value <= fx + ARMIJO_C1 * s * slope;
            let dn = dot(&e.gradient, d);
            let approx_wolfe =
                e.value <= fx + noise && dn <= (2.0 * ARMIJO_C1 - 1.0) * slope && dn >= WOLFE_C2 * slope;
            if armijo || approx_wolfe {
                return Ok(Some((xn, e)));
            }
        }
        s *= 0.5;
    }
    Ok(None)
}

fn check_n(n: usize, tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if max_iter == 0 || n < 4 {
        return Err(Error::InvalidParameter("n must be at least 4 and max_iter positive".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &VariationalProblem,
    disc: &Discretization,
    lag: &Lagrangian,
    min: &Minimum,
    lambda: Option<f64>,
    constraint_residual: Option<f64>,
    converged: bool,
    iterations: usize,
) -> Result<SolveResult> {
    let y = disc.grid(prob, &min.x)?;
    let mut scoped = prob.clone();
    scoped.lagrangian = lag.clone();
    let el = el_residual(&scoped, &y, &prob.cfg)?;
    Ok(SolveResult {
        el_residual: max_unmasked(&el),
        y,
        lambda,
        constraint_residual,
        objective: min.value,
        iterations,
        gradient_norm: min.gradient_norm,
        converged,
    })
}

/// Minimizes the discretized functional over the free nodal values.
///
/// `converged` means the max-norm of the discrete gradient reached `tol`;
/// `el_residual` is reported as an independent check.
pub fn solve_fundamental(prob: &VariationalProblem, n: usize, tol: f64, max_iter: usize) -> Result<SolveResult> {
    if prob.constraint.is_some() {
        return Err(Error::Precondition("problem has a constraint; use solve_isoperimetric".into()));
    }
    check_n(n, tol, max_iter)?;
    let disc = Discretization::new(prob, n)?;
    let lag = &prob.lagrangian;
    let min = minimize(|x| disc.objective_and_gradient(lag, x), disc.initial(), tol, max_iter)?;
    finish(prob, &disc, lag, &min, None, None, min.converged, min.iterations)
}

const MAX_OUTER: usize = 50;

/// Solves ∫F → extremum subject to ∫G = ξ by minimizing ∫(F − λG) and
/// adjusting λ by secant steps on the constraint defect, from λ = 0 and 1.
pub fn solve_isoperimetric(prob: &VariationalProblem, n: usize, tol: f64, max_iter: usize) -> Result<SolveResult> {
    let c = prob
        .constraint
        .as_ref()
        .ok_or_else(|| Error::Precondition("problem has no constraint".into()))?;
    check_n(n, tol, max_iter)?;
    let disc = Discretization::new(prob, n)?;
    let mut x = disc.initial();
    let mut iterations = 0;
    let inner = |lambda: f64, x0: Vec<f64>, iterations: &mut usize| -> Result<(Minimum, f64, Lagrangian)> {
        let h = prob.lagrangian.minus(lambda, &c.g);
        let min = minimize(|x| disc.objective_and_gradient(&h, x), x0, tol, max_iter)?;
        *iterations += min.iterations;
        let defect = disc.objective(&c.g, &min.x) - c.xi;
        Ok((min, defect, h))
    };
    let (mut lam_prev, mut lam) = (0.0, 1.0);
    let (min0, mut d_prev, h0) = inner(lam_prev, x.clone(), &mut iterations)?;
    if d_prev.abs() <= tol {
        let conv = min0.converged;
        return finish(prob, &disc, &h0, &min0, Some(lam_prev), Some(d_prev.abs()), conv, iterations);
    }
    x.clone_from(&min0.x);
    for _ in 0..MAX_OUTER {
        let (min, d, h) = inner(lam, x.clone(), &mut iterations)?;
        if d.abs() <= tol {
            let conv = min.converged;
            return finish(prob, &disc, &h, &min, Some(lam), Some(d.abs()), conv, iterations);
        }
        let slope = (d - d_prev) / (lam - lam_prev);
        if !(slope.abs() > 1e-12 * (1.0 + d.abs())) || !slope.is_finite() {
            return Err(Error::AbnormalCase(format!(
                "constraint defect does not respond to the multiplier (slope {slope:e}) at lambda = {lam}"
            )));
        }
        x.clone_from(&min.x);
        lam_prev = lam;
        d_prev = d;
        lam -= d / slope;
        if !lam.is_finite() {
            return Err(Error::NumericalOverflow("multiplier update".into()));
        }
    }
    let (min, d, h) = inner(lam, x, &mut iterations)?;
    finish(prob, &disc, &h, &min, Some(lam), Some(d.abs()), false, iterations)
}

/// Compares the embedded Euler-Lagrange expression ∂₂F − K_P ∂₃F with the
/// least-action one ∂₂F + K_{P*} ∂₃F, for F(t, y, w) with w = K_P y.
///
/// The reduced F is read from the y and w slots of `lag`.
pub fn coherence_check(
    kernel: &Kernel,
    p: f64,
    lag: &Lagrangian,
    y: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<IdentityReport> {
    let ps = ParamSet::new(y.a(), y.b(), p, -p)?;
    coherence_check_pset(&ps, kernel, lag, y, cfg)
}

/// As [`coherence_check`] with an explicit parameter set, which must have q = −p.
pub fn coherence_check_pset(
    ps: &ParamSet,
    kernel: &Kernel,
    lag: &Lagrangian,
    y: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<IdentityReport> {
    if ps.q != -ps.p {
        return Err(Error::HypothesisViolation(format!(
            "coherence needs q = -p, got p = {}, q = {}",
            ps.p, ps.q
        )));
    }
    let w = k_op(ps, kernel, y, cfg)?;
    let n = y.n();
    let mut d2 = vec![0.0; n + 1];
    let mut dw = vec![0.0; n + 1];
    for i in 0..=n {
        let part = lag.partials(y.node(i), y.values()[i], 0.0, 0.0, w.values.values()[i]);
        d2[i] = part[0];
        dw[i] = part[3];
    }
    let dw = y.with_values(dw)?;
    let direct_k = k_op(ps, kernel, &dw, cfg)?;
    let action_k = k_op(&ps.dual(), kernel, &dw, cfg)?;
    let direct: Vec<f64> = d2.iter().zip(direct_k.values.values()).map(|(a, k)| a - k).collect();
    let action: Vec<f64> = d2.iter().zip(action_k.values.values()).map(|(a, k)| a + k).collect();
    let residual = direct.iter().zip(&action).fold(0.0f64, |m, (x, z)| m.max((x - z).abs()));
    let mut report = IdentityReport {
        name: "coherence".into(),
        lhs: Side::Grid(y.with_values(direct)?),
        rhs: Side::Grid(y.with_values(action)?),
        residual,
        grid_n: n,
        tolerance: 1e-12,
        holds: residual <= 1e-12,
        degraded: w.any_flagged() || direct_k.any_flagged() || action_k.any_flagged(),
        masked: Vec::new(),
    };
    report.masked = vec![false; n + 1];
    Ok(report)
}
