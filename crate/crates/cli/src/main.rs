mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genfrac::convergence::Target;
use genfrac::expr::Expr;
use genfrac::identities::{identity_suite, SuiteResult};
use genfrac::operators::{a_op, b_op, k_op};
use genfrac::problem::ProblemSpec;
use genfrac::variational::{solve_fundamental, solve_isoperimetric};
use genfrac::volterra::{
    example1_extremal, example2_closed_form, resolvent, resolvent_extremal, volterra_first_kind, ResolventSpec,
};
use genfrac::{
    Boundary, Constraint, ErrorClass, GridFunction, KernelSpec, Lagrangian, OperatorConfig, ParamSet, Side,
    VariationalProblem,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const N_MIN: usize = 16;
const N_MAX: usize = 8192;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Identity(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Identity(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Identity(m) | Failure::Io(m) => m,
        }
    }
}

impl From<genfrac::Error> for Failure {
    fn from(e: genfrac::Error) -> Self {
        match e.class() {
            ErrorClass::Validation => Failure::Validation(e.to_string()),
            ErrorClass::Numerical => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpKind {
    K,
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Example {
    Example1,
    Example2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    FirstKind,
    Resolvent,
}

#[derive(Debug, Clone, Args)]
struct Output {
    /// Output path prefix; the extension follows the format. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "genfrac", version, about = "Generalized fractional operators, identities and variational solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply K_P, A_P or B_P to a function of t on a uniform grid.
    OpEval {
        #[arg(long, value_enum, default_value = "k")]
        op: OpKind,
        #[arg(long, default_value = "riemann_liouville")]
        kernel: String,
        /// Kernel order for K; derivative order for A and B, whose kernel has order 1 − alpha.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Custom kernel expression in t, tau, s and alpha.
        #[arg(long)]
        kernel_expr: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// The function, an expression in t.
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Run the identity suite and report one row per identity.
    Verify {
        #[arg(long, default_value = "identities")]
        suite: String,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Solve the variational problem described by a JSON file.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Overrides the constraint value.
        #[arg(long)]
        xi: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Reproduce a closed-form extremal numerically.
    Reproduce {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        xi: f64,
        /// Kernel for example2: exponential or cosine.
        #[arg(long, default_value = "exponential")]
        kernel: String,
        /// How example2 is solved.
        #[arg(long, value_enum, default_value = "first-kind")]
        method: Method,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Observed convergence order of K_P against a closed form.
    Converge {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        ns: Vec<usize>,
        #[command(flatten)]
        output: Output,
    },
}

fn check_n(n: usize) -> Result<usize, Failure> {
    if (N_MIN..=N_MAX).contains(&n) {
        Ok(n)
    } else {
        Err(Failure::Validation(format!("--n = {n} is outside [{N_MIN}, {N_MAX}]")))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("GENFRAC_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Validation(format!("GENFRAC_THREADS = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Validation(format!("thread pool: {e}")))
}

#[derive(Serialize)]
struct OpRow {
    t: f64,
    f: f64,
    value: f64,
    flagged: bool,
}

#[allow(clippy::too_many_arguments)]
fn op_eval(
    op: OpKind,
    kernel: &str,
    alpha: f64,
    kernel_expr: Option<String>,
    (p, q, a, b): (f64, f64, f64, f64),
    f: &str,
    n: usize,
    output: &Output,
) -> Result<(), Failure> {
    let n = check_n(n)?;
    let order = if op == OpKind::K { alpha } else { 1.0 - alpha };
    let spec = KernelSpec { name: kernel.into(), alpha: Some(order), expr: kernel_expr, ..Default::default() };
    let k = spec.build(order)?;
    let ps = ParamSet::new(a, b, p, q)?;
    let expr = Expr::parse(f, &["t"])?;
    let fg = GridFunction::from_fn(a, b, n, |t| expr.eval(&[t]))?;
    let cfg = OperatorConfig::default();
    let out = match op {
        OpKind::K => k_op(&ps, &k, &fg, &cfg)?,
        OpKind::A => a_op(&ps, &k, &fg, &cfg)?,
        OpKind::B => b_op(&ps, &k, &fg, None, &cfg)?,
    };
    let rows: Vec<OpRow> = (0..=n)
        .map(|i| OpRow { t: fg.node(i), f: fg.values()[i], value: out.values.values()[i], flagged: out.flagged[i] })
        .collect();
    output::emit_rows(&rows, output.format, output.out.as_deref())
}

#[derive(Serialize)]
struct VerifyRow {
    name: String,
    kernel: String,
    #[serde(rename = "P")]
    params: String,
    n: usize,
    lhs: f64,
    rhs: f64,
    residual: f64,
    holds: bool,
}

/// Scalar sides as they are; pointwise sides as their max-norm.
fn side_value(side: &Side) -> f64 {
    match side {
        Side::Scalar(v) => *v,
        Side::Grid(g) => g.max_abs(),
    }
}

fn verify(suite: &str, n: usize, output: &Output) -> Result<(), Failure> {
    if suite != "identities" {
        return Err(Failure::Validation(format!("unknown suite '{suite}'; valid suites: identities")));
    }
    let n = check_n(n)?;
    let results: Vec<SuiteResult> = identity_suite()?.iter().map(|c| c.evaluate(n)).collect::<Result<_, _>>()?;
    let rows: Vec<VerifyRow> = results
        .iter()
        .map(|r| VerifyRow {
            name: r.name.clone(),
            kernel: r.kernel.clone(),
            params: format!("p={} q={}", r.params.p, r.params.q),
            n: r.report.grid_n,
            lhs: side_value(&r.report.lhs),
            rhs: side_value(&r.report.rhs),
            residual: r.report.residual,
            holds: r.report.holds,
        })
        .collect();
    output::emit_rows(&rows, output.format, output.out.as_deref())?;
    let unexpected: Vec<&str> =
        results.iter().filter(|r| r.report.holds != r.claimed).map(|r| r.name.as_str()).collect();
    if unexpected.is_empty() {
        Ok(())
    } else {
        Err(Failure::Identity(format!("identity checks disagree with their claims: {}", unexpected.join(", "))))
    }
}

#[derive(Serialize)]
struct SampleRow {
    t: f64,
    y: f64,
}

#[allow(clippy::too_many_arguments)]
fn solve(
    path: &Path,
    n: Option<usize>,
    tol: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    xi: Option<f64>,
    output: &Output,
) -> Result<(), Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut spec = ProblemSpec::from_json(&src)?;
    if let Some(a) = alpha {
        spec.alpha = a;
    }
    if let Some(b) = beta {
        spec.beta = b;
    }
    if let Some(x) = xi {
        match spec.constraint.as_mut() {
            Some(c) => c.xi = x,
            None => return Err(Failure::Validation("--xi given but the problem has no constraint".into())),
        }
    }
    let n = check_n(n.unwrap_or(spec.solver.n))?;
    let tol = tol.unwrap_or(spec.solver.tol);
    let prob = spec.build()?;
    let result = if prob.constraint.is_some() {
        solve_isoperimetric(&prob, n, tol, spec.solver.max_iter)?
    } else {
        solve_fundamental(&prob, n, tol, spec.solver.max_iter)?
    };
    let samples: Vec<SampleRow> =
        (0..=n).map(|i| SampleRow { t: result.y.node(i), y: result.y.values()[i] }).collect();
    match (&output.out, output.format) {
        (Some(prefix), _) => {
            output::emit_json(&result, Some(&output::with_extension(prefix, "json")))?;
            output::emit_csv(&samples, Some(&output::with_extension(prefix, "csv")))?;
        }
        (None, Format::Json) => output::emit_json(&result, None)?,
        (None, Format::Csv) => output::emit_csv(&samples, None)?,
    }
    if result.converged {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "solver did not converge (gradient norm {:e} after {} iterations)",
            result.gradient_norm, result.iterations
        )))
    }
}

#[derive(Serialize)]
struct ReproduceRow {
    t: f64,
    y_numeric: f64,
    y_closed_form: f64,
    abs_error: f64,
}

/// F = (u + v)², G = u + v with v = B y and RL kernels, y(0) = 0 and y(1)
/// taken from the closed form.
fn example1_problem(alpha: f64, xi: f64, yb: f64) -> Result<VariationalProblem, Failure> {
    let ps = ParamSet::left(0.0, 1.0)?;
    let kernel_b = genfrac::Kernel::riemann_liouville(1.0 - alpha)?;
    let kernel_k = genfrac::Kernel::riemann_liouville(0.5)?;
    let prob = VariationalProblem {
        a: 0.0,
        b: 1.0,
        p1: ps,
        p2: ps,
        alpha,
        beta: 0.5,
        kernel_b,
        kernel_k,
        lagrangian: Lagrangian::from_exprs("(u+v)^2", ["0", "2*(u+v)", "2*(u+v)", "0"])?,
        bc: Boundary::Fixed { ya: 0.0, yb },
        constraint: Some(Constraint { g: Lagrangian::from_exprs("u+v", ["0", "1", "1", "0"])?, xi }),
        cfg: OperatorConfig::default(),
    };
    prob.validate()?;
    Ok(prob)
}

#[allow(clippy::too_many_arguments)]
fn reproduce(
    example: Example,
    alpha: f64,
    xi: f64,
    kernel: &str,
    method: Method,
    n: usize,
    tol: f64,
    output: &Output,
) -> Result<(), Failure> {
    let n = check_n(n)?;
    let (numeric, exact): (GridFunction, Vec<f64>) = match example {
        Example::Example1 => {
            let exact = example1_extremal(alpha, xi, 0.0, 1.0, n)?;
            let prob = example1_problem(alpha, xi, exact.values()[n])?;
            let r = solve_isoperimetric(&prob, n, tol, 50_000)?;
            if !r.converged {
                return Err(Failure::Numerical("isoperimetric solver did not converge".into()));
            }
            (r.y, exact.into_values())
        }
        Example::Example2 => {
            let k = KernelSpec::named(kernel, alpha).build(alpha)?;
            // fail on unsupported kernels before solving
            example2_closed_form(kernel, alpha, xi, 0.0)?;
            let y = match method {
                Method::FirstKind => {
                    let rhs = GridFunction::from_fn(0.0, 1.0, n, |t| (xi - 1.0) * t)?;
                    volterra_first_kind(&k, &rhs)?
                }
                Method::Resolvent => {
                    let res = resolvent(&ResolventSpec { kernel: k, horizon: 1.0, n })?;
                    resolvent_extremal(&res, xi)?
                }
            };
            let exact =
                (0..=n).map(|i| example2_closed_form(kernel, alpha, xi, y.node(i))).collect::<Result<Vec<_>, _>>()?;
            (y, exact)
        }
    };
    let rows: Vec<ReproduceRow> = (0..=n)
        .map(|i| {
            let (yn, yc) = (numeric.values()[i], exact[i]);
            ReproduceRow { t: numeric.node(i), y_numeric: yn, y_closed_form: yc, abs_error: (yn - yc).abs() }
        })
        .collect();
    output::emit_rows(&rows, output.format, output.out.as_deref())
}

#[derive(Serialize)]
struct ConvergeRow {
    n: usize,
    error: f64,
    /// Pairwise order against the previous row; empty on the first.
    observed_order: Option<f64>,
}

fn converge(target: &str, alpha: f64, ns: &[usize], output: &Output) -> Result<(), Failure> {
    let target: Target = target.parse()?;
    for &n in ns {
        check_n(n)?;
    }
    let est = target.study(alpha, ns)?;
    let rows: Vec<ConvergeRow> = (0..est.ns.len())
        .map(|i| ConvergeRow {
            n: est.ns[i],
            error: est.errors[i],
            observed_order: i.checked_sub(1).map(|j| est.pairwise[j]),
        })
        .collect();
    output::emit_rows(&rows, output.format, output.out.as_deref())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::OpEval { op, kernel, alpha, kernel_expr, p, q, a, b, f, n, output } => {
            op_eval(op, &kernel, alpha, kernel_expr, (p, q, a, b), &f, n, &output)
        }
        Command::Verify { suite, n, output } => verify(&suite, n, &output),
        Command::Solve { problem, n, tol, alpha, beta, xi, output } => {
            solve(&problem, n, tol, alpha, beta, xi, &output)
        }
        Command::Reproduce { example, alpha, xi, kernel, method, n, tol, output } => {
            reproduce(example, alpha, xi, &kernel, method, n, tol, &output)
        }
        Command::Converge { target, alpha, ns, output } => converge(&target, alpha, &ns, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("genfrac: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
