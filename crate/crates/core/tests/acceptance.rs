//! Acceptance criteria 1-8. Runs as a plain binary so the per-criterion
//! lines always reach the test log; exits non-zero if any criterion fails.

use genfrac::convergence::Target;
use genfrac::identities::{identity_suite, relation_residual, SuiteResult, Window};
use genfrac::kernels::Kernel;
use genfrac::operators::{k_op, operator_norm_check, OperatorConfig, ParamSet};
use genfrac::quadrature::{tanh_sinh, tanh_sinh_offsets};
use genfrac::specfun::{gamma, mittag_leffler, MLParams};
use genfrac::variational::{
    coherence_check, el_residual, max_unmasked_from, solve_isoperimetric, Boundary, Constraint, Discretization,
    Lagrangian, VariationalProblem,
};
use genfrac::volterra::{resolvent, resolvent_extremal, volterra_first_kind, ResolventSpec};
use genfrac::{GridFunction, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, format!("{label}: {got:.6e} vs {want:.6e} (tol {tol:e})"))
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let out = f();
    let dt = t0.elapsed();
    match out {
        Ok(msg) if dt <= limit => Ok(format!("{msg} [{:.2}s]", dt.as_secs_f64())),
        Ok(msg) => Err(format!("{msg} but took {:.1}s (limit {}s)", dt.as_secs_f64(), limit.as_secs())),
        Err(e) => Err(format!("{e} [{:.2}s]", dt.as_secs_f64())),
    }
}

fn grid(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(0.0, 1.0, n, f).unwrap()
}

// ---------------------------------------------------------------- oracles

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    tanh_sinh(f, a, b, 1e-13).unwrap().value
}

/// ∫_0^1 g(t) [p∫_0^t k(t−τ) f dτ + q∫_t^1 k(τ−t) f dτ] dt by nested quadrature.
fn double_integral(k: &dyn Fn(f64) -> f64, p: f64, q: f64, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let inner = |t: f64| {
        let left = if t > 0.0 { tanh_sinh_offsets(|tau, _, d| k(d) * f(tau), 0.0, t, 1e-13).unwrap().value } else { 0.0 };
        let right = if t < 1.0 { tanh_sinh_offsets(|tau, d, _| k(d) * f(tau), t, 1.0, 1e-13).unwrap().value } else { 0.0 };
        p * left + q * right
    };
    quad(|t| g(t) * inner(t), 0.0, 1.0)
}

/// (lhs, rhs) of the identity computed independently of the operators.
fn ibp_oracle(case: &SuiteResult) -> Option<(f64, f64)> {
    let (p, q) = (case.params.p, case.params.q);
    let rl = |order: f64| {
        let g = gamma(order).unwrap();
        move |s: f64| s.powf(order - 1.0) / g
    };
    let e = |s: f64| (0.5 * s).exp();
    let c = |s: f64| (0.5 * s).cos();
    let sm_f = |t: f64| (3.0 * t).sin() + 1.0;
    let sm_g = |t: f64| (-t).exp() * (1.0 + t * t);
    match (case.name.as_str(), case.kernel.as_str()) {
        ("ibp_k_constant", _) => {
            let v = 1.0 / gamma(2.6).unwrap();
            Some((v, v))
        }
        ("ibp_k_singular", _) => {
            let k = rl(0.6);
            let f = |t: f64| t.exp();
            let g = |t: f64| (2.0 * t).cos();
            Some((double_integral(&k, p, q, &f, &g), double_integral(&k, q, p, &g, &f)))
        }
        ("ibp_k_smooth", name) => {
            let k: &dyn Fn(f64) -> f64 = if name.starts_with("exponential") { &e } else { &c };
            Some((double_integral(k, p, q, &sm_f, &sm_g), double_integral(k, q, p, &sm_g, &sm_f)))
        }
        ("ibp_a_linear" | "ibp_b_linear", _) => {
            // K f = (e^{t/2} − 1 − t/2)/0.25, A f = B f = 2(e^{t/2} − 1),
            // A_{P*} g = B_{P*} g = −2(e^{(1−t)/2} − 1), boundary terms vanish
            let lhs = quad(|t| (1.0 - t) * 2.0 * ((0.5 * t).exp() - 1.0), 0.0, 1.0);
            let rhs = quad(|t| t * 2.0 * ((0.5 * (1.0 - t)).exp() - 1.0), 0.0, 1.0);
            Some((lhs, rhs))
        }
        ("ibp_a_quadratic" | "ibp_b_quadratic", _) => {
            // A t² = B t² = 2 t^{3/2}/Γ(5/2); for g = t(1−t) the right-sided
            // A and B agree: √(1−t)(2/3 − 8t/3)/Γ(1/2); boundary terms vanish
            let lhs = 2.0 / gamma(2.5).unwrap() * (1.0 / 3.5 - 1.0 / 4.5);
            let g05 = gamma(0.5).unwrap();
            let rhs = -quad(|t| t * t * (1.0 - t).sqrt() * (2.0 / 3.0 - 8.0 * t / 3.0) / g05, 0.0, 1.0);
            Some((lhs, rhs))
        }
        _ => None,
    }
}

/// Tolerances stated for individual cases: (n, absolute tolerance).
fn stated_tolerance(case: &SuiteResult) -> (usize, f64) {
    match case.name.as_str() {
        "ibp_k_constant" | "ibp_k_singular" => (512, 1e-3),
        "ibp_k_smooth" => (1024, 1e-4),
        "ibp_a_linear" | "ibp_b_linear" => (512, 1e-3),
        _ => (1024, 5e-3),
    }
}

// ---------------------------------------------------------------- criteria

fn criterion1() -> Outcome {
    let n = 1024;
    let cfg = OperatorConfig::default();
    let ps = ParamSet::new(0.0, 1.0, 1.0, -1.0).unwrap();
    let k = Kernel::counterexample();
    let one = grid(n, |_| 1.0);
    let left = k_op(&ps, &k, &one, &cfg).map_err(|e| e.to_string())?.values.trapezoid();
    let right = k_op(&ps.dual(), &k, &one, &cfg).map_err(|e| e.to_string())?.values.trapezoid();
    within("int K_P 1", left, PI / 4.0, 5e-3)?;
    within("int K_P* 1", right, -PI / 4.0, 5e-3)?;
    let case = identity_suite()
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|c| c.name == "ibp_k_counterexample")
        .ok_or("counterexample case missing")?;
    let r = case.evaluate(n).map_err(|e| e.to_string())?;
    within("ibp_k residual", r.report.residual, PI / 2.0, 2e-2)?;
    check(!r.report.holds, "counterexample reported as holding".into())?;
    Ok(format!("int K_P 1 = {left:.5}, int K_P* 1 = {right:.5}, residual {:.5}", r.report.residual))
}

fn criterion2() -> Outcome {
    let ns = [128, 256, 512, 1024];
    let mut lines = Vec::new();
    for case in identity_suite().map_err(|e| e.to_string())? {
        if !case.claimed || case.name.starts_with("relation") {
            continue;
        }
        let runs: Vec<SuiteResult> = ns.iter().map(|&n| case.evaluate(n)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let label = format!("{} {}", case.name, case.kernel);
        for r in &runs {
            check(r.report.holds, format!("{label} fails at n={}: {:e} > {:e}", r.report.grid_n, r.report.residual, r.report.tolerance))?;
        }
        let res: Vec<f64> = runs.iter().map(|r| r.report.residual).collect();
        // identities the discretization satisfies to rounding have no error to decay
        let exact = res.iter().all(|&r| r <= 1e-12);
        if !exact {
            check(res.windows(2).all(|w| w[1] < w[0]), format!("{label} residuals do not decrease: {res:?}"))?;
        }
        let (lhs_o, rhs_o) = ibp_oracle(&runs[0]).ok_or(format!("no oracle for {label}"))?;
        within(&format!("{label} oracle lhs/rhs"), lhs_o, rhs_o, 1e-10)?;
        let (n_stated, tol) = stated_tolerance(&runs[0]);
        let at = runs.iter().find(|r| r.report.grid_n == n_stated).unwrap();
        within(&format!("{label} lhs"), at.report.lhs_scalar().unwrap(), lhs_o, tol)?;
        within(&format!("{label} rhs"), at.report.rhs_scalar().unwrap(), rhs_o, tol)?;
        check(at.report.residual <= tol, format!("{label} residual {:e} above stated {tol:e}", at.report.residual))?;
        lines.push(if exact { format!("{label}: exact") } else { format!("{label}: {:.1e}->{:.1e}", res[0], res[3]) });
    }
    Ok(lines.join("; "))
}

fn criterion3() -> Outcome {
    let cfg = OperatorConfig::default();
    let ps = ParamSet::left(0.0, 1.0).unwrap();
    let k = Kernel::riemann_liouville(0.5).unwrap();
    let n = 512;
    let y = grid(n, |t| t);
    let yp = grid(n, |_| 1.0);
    let r = relation_residual(&ps, &k, &y, Some(&yp), &cfg, Window::default(), 2e-3).map_err(|e| e.to_string())?;
    check(r.holds, format!("y = t residual {:e}", r.residual))?;
    let g15 = gamma(1.5).unwrap();
    if let Side::Grid(a) = &r.lhs {
        for i in (0..=n).filter(|&i| !r.masked[i] && y.node(i) >= 0.1) {
            within("A t", a.values()[i], y.node(i).sqrt() / g15, 1e-3)?;
        }
    }
    let one = grid(n, |_| 1.0);
    let window = Window { t_min: Some(0.1), t_max: None, relative: true };
    let r1 = relation_residual(&ps, &k, &one, None, &cfg, window, 1e-2).map_err(|e| e.to_string())?;
    check(r1.holds, format!("y = 1 relative residual {:e}", r1.residual))?;
    let g05 = gamma(0.5).unwrap();
    let mut worst = 0.0f64;
    if let (Side::Grid(a), Side::Grid(rhs)) = (&r1.lhs, &r1.rhs) {
        for i in (0..=n).filter(|&i| !r1.masked[i] && one.node(i) >= 0.1) {
            let exact = 1.0 / (one.node(i).sqrt() * g05);
            worst = worst.max((a.values()[i] - exact).abs() / exact).max((rhs.values()[i] - exact).abs() / exact);
        }
    }
    check(worst <= 1e-2, format!("Caputo-RL correction off by {worst:e}"))?;
    let zero = grid(n, |_| 0.0);
    let r0 = relation_residual(&ps, &k, &zero, None, &cfg, Window::default(), 0.0).map_err(|e| e.to_string())?;
    check(r0.residual == 0.0, "y = 0 residual nonzero".into())?;
    Ok(format!("y=t residual {:.2e}; y=1 relative residual {:.2e}, correction term rel err {worst:.2e}", r.residual, r1.residual))
}

fn example1_problem(xi: f64, yb: f64, lambda: Option<f64>) -> VariationalProblem {
    let ps = ParamSet::left(0.0, 1.0).unwrap();
    let f = Lagrangian::from_exprs("(u+v)^2", ["0", "2*(u+v)", "2*(u+v)", "0"]).unwrap();
    let g = Lagrangian::from_exprs("u+v", ["0", "1", "1", "0"]).unwrap();
    let (lagrangian, constraint) = match lambda {
        Some(l) => (f.minus(l, &g), None),
        None => (f, Some(Constraint { g, xi })),
    };
    VariationalProblem {
        a: 0.0,
        b: 1.0,
        p1: ps,
        p2: ps,
        alpha: 0.5,
        beta: 0.5,
        kernel_b: Kernel::riemann_liouville(0.5).unwrap(),
        kernel_k: Kernel::riemann_liouville(0.5).unwrap(),
        lagrangian,
        bc: Boundary::Fixed { ya: 0.0, yb },
        constraint,
        cfg: OperatorConfig::default(),
    }
}

/// ξ∫_0^t E_{1/2,1}(−√s) ds = ξ(eᵗ erfc(√t) − 1 + 2√(t/π)).
fn example1_oracle(xi: f64, t: f64) -> f64 {
    xi * (t.exp() * erfc(t.sqrt()) - 1.0 + 2.0 * (t / PI).sqrt())
}

fn criterion4() -> Outcome {
    let n = 256;
    let mut parts = Vec::new();
    for xi in [0.5, 1.0, 2.0] {
        let part = timed(Duration::from_secs(300), || {
            let prob = example1_problem(xi, example1_oracle(xi, 1.0), None);
            let r = solve_isoperimetric(&prob, n, 1e-10, 50_000).map_err(|e| e.to_string())?;
            check(r.converged, format!("xi={xi}: solver did not converge"))?;
            let err = (0..=n).map(|i| (r.y.values()[i] - example1_oracle(xi, r.y.node(i))).abs()).fold(0.0, f64::max);
            check(err <= 5e-3, format!("xi={xi}: max error {err:e}"))?;
            let lambda = r.lambda.ok_or("no multiplier")?;
            check((lambda - 2.0 * xi).abs() <= 0.05 * 2.0 * xi, format!("xi={xi}: lambda {lambda}"))?;
            Ok(format!("xi={xi}: err {err:.1e}, lambda {lambda:.5}"))
        })?;
        parts.push(part);
    }
    // the extremal also satisfies the Euler-Lagrange equation of F − 2ξG;
    // near t = a the t^{3/2} term of y limits finite differences, so the
    // residual is measured on t ≥ 0.05
    let n = 512;
    let y = grid(n, |t| example1_oracle(1.0, t));
    let prob = example1_problem(1.0, y.values()[n], Some(2.0));
    let r = el_residual(&prob, &y, &prob.cfg).map_err(|e| e.to_string())?;
    let el = max_unmasked_from(&r, 0.05);
    check(el <= 5e-3, format!("EL residual {el:e}"))?;
    parts.push(format!("EL residual (t>=0.05, n=512) {el:.1e}"));
    Ok(parts.join("; "))
}

fn criterion5() -> Outcome {
    let n = 512;
    let mut parts = Vec::new();
    for xi in [0.0, 2.0, 3.5] {
        for name in ["exponential", "cosine"] {
            let alpha = 0.5;
            let (k, exact): (Kernel, Box<dyn Fn(f64) -> f64>) = if name == "exponential" {
                (Kernel::exponential(alpha).unwrap(), Box::new(move |t| (xi - 1.0) * (1.0 - alpha * t)))
            } else {
                (Kernel::cosine(alpha).unwrap(), Box::new(move |t| (xi - 1.0) * (1.0 + alpha * alpha * t * t / 2.0)))
            };
            let rhs = grid(n, |t| (xi - 1.0) * t);
            let y1 = volterra_first_kind(&k, &rhs).map_err(|e| e.to_string())?;
            let res = resolvent(&ResolventSpec { kernel: k, horizon: 1.0, n }).map_err(|e| e.to_string())?;
            let y2 = resolvent_extremal(&res, xi).map_err(|e| e.to_string())?;
            let e1 = (0..=n).map(|i| (y1.values()[i] - exact(y1.node(i))).abs()).fold(0.0, f64::max);
            let e2 = (0..=n).map(|i| (y2.values()[i] - exact(y2.node(i))).abs()).fold(0.0, f64::max);
            check(e1 <= 1e-4 && e2 <= 1e-4, format!("{name} xi={xi}: first-kind {e1:e}, resolvent {e2:e}"))?;
            if xi == 2.0 {
                parts.push(format!("{name}: first-kind {e1:.1e}, resolvent {e2:.1e}"));
            }
        }
    }
    Ok(parts.join("; "))
}

fn criterion6() -> Outcome {
    let cfg = OperatorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let kernels = [Kernel::exponential(0.5).unwrap(), Kernel::cosine(0.7).unwrap(), Kernel::riemann_liouville(0.6).unwrap()];
    let lags = [
        Lagrangian::from_exprs("w^2", ["0", "0", "0", "2*w"]).unwrap(),
        Lagrangian::from_exprs("y*w", ["w", "0", "0", "y"]).unwrap(),
        Lagrangian::from_exprs("sin(y) + t*w^2", ["cos(y)", "0", "0", "2*t*w"]).unwrap(),
    ];
    let mut worst = 0.0f64;
    for k in &kernels {
        for lag in &lags {
            for _ in 0..3 {
                let p: f64 = rng.random_range(-2.0..2.0);
                let coeffs: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = grid(200, |t| coeffs[0] + coeffs[1] * t + coeffs[2] * (3.0 * t).sin() + coeffs[3] * t * t);
                let r = coherence_check(k, p, lag, &y, &cfg).map_err(|e| e.to_string())?;
                check(r.residual <= 1e-12, format!("{} p={p}: difference {:e}", k.name(), r.residual))?;
                worst = worst.max(r.residual);
            }
        }
    }
    Ok(format!("3 kernels x 3 Lagrangians x 3 random (p, y): max difference {worst:.1e}"))
}

fn linearity_checks() -> Result<f64, String> {
    let cfg = OperatorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kernels = [
        Kernel::riemann_liouville(0.4).unwrap(),
        Kernel::exponential(0.6).unwrap(),
        Kernel::cosine(0.3).unwrap(),
        Kernel::constant_one(),
        Kernel::counterexample(),
    ];
    let mut worst = 0.0f64;
    for k in &kernels {
        for _ in 0..4 {
            let (p, q) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let ps = ParamSet::new(0.0, 1.0, p, q).unwrap();
            let v1: Vec<f64> = (0..=96).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v2: Vec<f64> = (0..=96).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (c1, c2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let f1 = GridFunction::new(0.0, 1.0, v1).unwrap();
            let f2 = GridFunction::new(0.0, 1.0, v2).unwrap();
            let comb = f1.zip_with(&f2, |_, a, b| c1 * a + c2 * b).unwrap();
            // nodes flagged as divergent by any operator are excluded
            let op = |ps: &ParamSet, f: &GridFunction| {
                let out = k_op(ps, k, f, &cfg).unwrap();
                (out.values.into_values(), out.flagged)
            };
            let (k1, m1) = op(&ps, &f1);
            let (k2, m2) = op(&ps, &f2);
            let (kc, mc) = op(&ps, &comb);
            let (left, ml) = op(&ParamSet::new(0.0, 1.0, p, 0.0).unwrap(), &f1);
            let (right, mr) = op(&ParamSet::new(0.0, 1.0, 0.0, q).unwrap(), &f1);
            let anti = ParamSet::new(0.0, 1.0, p, -p).unwrap();
            let (x, mx) = op(&anti, &f1);
            let (z, mz) = op(&anti.dual(), &f1);
            let skip = |i: usize| m1[i] || m2[i] || mc[i] || ml[i] || mr[i] || mx[i] || mz[i];
            let scale = 1.0 + kc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in (0..kc.len()).filter(|&i| !skip(i)) {
                worst = worst.max((kc[i] - c1 * k1[i] - c2 * k2[i]).abs() / scale);
                worst = worst.max((k1[i] - left[i] - right[i]).abs());
                worst = worst.max((x[i] + z[i]).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("linearity/additivity/antisymmetry defect {worst:e}"))?;
    Ok(worst)
}

fn gradient_checks() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let alpha: f64 = rng.random_range(0.2..0.8);
        let beta: f64 = rng.random_range(0.2..0.8);
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..1.5)).collect();
        let kb = if trial % 2 == 0 { Kernel::exponential(1.0 - alpha) } else { Kernel::cosine(1.0 - alpha) }.unwrap();
        let kk = if trial % 3 == 0 { Kernel::cosine(beta) } else { Kernel::exponential(beta) }.unwrap();
        let (c0, c1, c2, c3, c4, c5) = (c[0], c[1], c[2], c[3], c[4], c[5]);
        let lag = Lagrangian::new(
            "random",
            move |t, y, u, v, w| c0 * y * y + c1 * (u + c2 * v).powi(2) + c3 * w * w * t + c4 * (y * w).sin() + c5 * u * v,
            move |_, y, _, _, w| 2.0 * c0 * y + c4 * w * (y * w).cos(),
            move |_, _, u, v, _| 2.0 * c1 * (u + c2 * v) + c5 * v,
            move |_, _, u, v, _| 2.0 * c1 * c2 * (u + c2 * v) + c5 * u,
            move |t, y, _, _, w| 2.0 * c3 * w * t + c4 * y * (y * w).cos(),
        )
        .map_err(|e| e.to_string())?;
        let p1 = ParamSet::new(0.0, 1.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap();
        let p2 = ParamSet::new(0.0, 1.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap();
        let bc = if trial % 4 == 0 {
            Boundary::FreeStart { yb: rng.random_range(-1.0..1.0) }
        } else {
            Boundary::Fixed { ya: rng.random_range(-1.0..1.0), yb: rng.random_range(-1.0..1.0) }
        };
        let prob = VariationalProblem {
            a: 0.0,
            b: 1.0,
            p1,
            p2,
            alpha,
            beta,
            kernel_b: kb,
            kernel_k: kk,
            lagrangian: lag.clone(),
            bc,
            constraint: None,
            cfg: OperatorConfig::default(),
        };
        let disc = Discretization::new(&prob, 64).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..disc.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = disc.objective_and_gradient(&lag, &x).gradient;
        let mut fd = vec![0.0; x.len()];
        for j in 0..x.len() {
            let h = 1e-6;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            fd[j] = (disc.objective(&lag, &xp) - disc.objective(&lag, &xm)) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        check(err <= 1e-6, format!("gradient trial {trial}: relative error {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(worst)
}

fn norm_checks() -> Result<f64, String> {
    let kernels = [
        Kernel::constant_one(),
        Kernel::exponential(0.5).unwrap(),
        Kernel::cosine(0.5).unwrap(),
        Kernel::riemann_liouville(0.6).unwrap(),
        Kernel::riemann_liouville(0.8).unwrap(),
    ];
    let sets = [ParamSet::left(0.0, 1.0).unwrap(), ParamSet::new(0.0, 1.0, 0.7, -1.2).unwrap()];
    let mut worst = 0.0f64;
    for k in &kernels {
        for ps in &sets {
            let r = operator_norm_check(ps, k, 20, 128).map_err(|e| e.to_string())?;
            check(r.within_bound(), format!("{}: {} > 1.05 x {}", k.name(), r.empirical_ratio_max, r.l2_bound))?;
            worst = worst.max(r.empirical_ratio_max / r.l2_bound);
        }
    }
    let c = operator_norm_check(&sets[0], &Kernel::constant_one(), 20, 128).map_err(|e| e.to_string())?;
    within("constant_one bound", c.l2_bound, 0.5f64.sqrt(), 1e-6)?;
    Ok(worst)
}

fn ml_checks() -> Result<(), String> {
    let e11 = MLParams::new(1.0, 1.0).unwrap();
    let e21 = MLParams::new(2.0, 1.0).unwrap();
    for i in 0..=100 {
        let z = -5.0 + 0.1 * i as f64;
        within("E11", mittag_leffler(&e11, z).unwrap(), z.exp(), 1e-10)?;
        let w = 0.2 * i as f64;
        within("E21", mittag_leffler(&e21, w).unwrap(), w.sqrt().cosh(), 1e-9)?;
    }
    Ok(())
}

fn criterion7() -> Outcome {
    let lin = linearity_checks()?;
    let grad = gradient_checks()?;
    let norm = norm_checks()?;
    ml_checks()?;
    Ok(format!(
        "linearity/additivity/antisymmetry defect {lin:.1e}; gradient rel err {grad:.1e}; max empirical/L2 bound {norm:.3}; ML identities ok"
    ))
}

fn criterion8() -> Outcome {
    let ns = [128, 256, 512, 1024];
    let exp = Target::KopExp.study(0.5, &ns).map_err(|e| e.to_string())?;
    let rl = Target::KopRl.study(0.5, &ns).map_err(|e| e.to_string())?;
    let cos = Target::KopCos.study(0.5, &ns).map_err(|e| e.to_string())?;
    check(exp.min_pairwise() >= 2.0, format!("exponential order {:?}", exp.pairwise))?;
    check(rl.min_pairwise() >= 1.5, format!("RL order {:?}", rl.pairwise))?;
    Ok(format!(
        "exponential min slope {:.6}, RL min slope {:.4}, cosine (not gated) min slope {:.6}",
        exp.min_pairwise(),
        rl.min_pairwise(),
        cos.min_pairwise()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("counterexample integrals", Duration::from_secs(10), criterion1),
        ("integration-by-parts suite", Duration::from_secs(60), criterion2),
        ("relation identity", Duration::from_secs(60), criterion3),
        ("Mittag-Leffler extremal", Duration::from_secs(900), criterion4),
        ("Volterra extremals", Duration::from_secs(10), criterion5),
        ("coherence", Duration::from_secs(60), criterion6),
        ("property suites", Duration::from_secs(300), criterion7),
        ("convergence orders", Duration::from_secs(300), criterion8),
    ];
    // GENFRAC_CRITERIA=2,7 runs a subset
    let only: Option<Vec<usize>> =
        std::env::var("GENFRAC_CRITERIA").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        match timed(*limit, f) {
            Ok(msg) => println!("criterion {} PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
