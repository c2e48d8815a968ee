//! Observed orders of accuracy from errors on successively refined grids,
//! and the canned operator studies behind the `converge` command.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernels::Kernel;
use crate::operators::{k_op, OperatorConfig, ParamSet};
use crate::specfun::{mittag_leffler, MLParams};
use serde::Serialize;
use std::f64::consts::PI;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub ns: Vec<usize>,
    pub errors: Vec<f64>,
    /// log(e_k/e_{k+1}) / log(n_{k+1}/n_k) for each consecutive pair.
    pub pairwise: Vec<f64>,
    /// Slope of the least-squares line through (log n, −log e).
    pub least_squares: f64,
}

impl OrderEstimate {
    pub fn min_pairwise(&self) -> f64 {
        self.pairwise.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn observed_order(ns: &[usize], errors: &[f64]) -> Result<OrderEstimate> {
    if ns.len() != errors.len() || ns.len() < 2 {
        return Err(Error::InvalidParameter("need at least two (n, error) pairs".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("errors must be positive and finite".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid sizes must increase".into()));
    }
    let pairwise = ns
        .windows(2)
        .zip(errors.windows(2))
        .map(|(n, e)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(OrderEstimate {
        ns: ns.to_vec(),
        errors: errors.to_vec(),
        pairwise,
        least_squares: sxy / sxx,
    })
}

/// Operator convergence studies with closed-form references on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Left Riemann-Liouville integral of eᵗ: t^α E_{1,1+α}(t).
    KopRl,
    /// ∫_0^t e^{α(t−τ)} sin(πτ) dτ.
    KopExp,
    /// ∫_0^t cos(α(t−τ)) e^τ dτ.
    KopCos,
}

pub const TARGET_NAMES: [&str; 3] = ["kop-rl", "kop-exp", "kop-cos"];

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kop-rl" => Ok(Target::KopRl),
            "kop-exp" => Ok(Target::KopExp),
            "kop-cos" => Ok(Target::KopCos),
            other => Err(Error::Schema(format!(
                "unknown convergence target '{other}'; valid targets: {}",
                TARGET_NAMES.join(", ")
            ))),
        }
    }
}

impl Target {
    fn kernel(self, alpha: f64) -> Result<Kernel> {
        match self {
            Target::KopRl => Kernel::riemann_liouville(alpha),
            Target::KopExp => Kernel::exponential(alpha),
            Target::KopCos => Kernel::cosine(alpha),
        }
    }

    fn input(self, t: f64) -> f64 {
        match self {
            Target::KopExp => (PI * t).sin(),
            Target::KopRl | Target::KopCos => t.exp(),
        }
    }

    fn exact(self, alpha: f64, t: f64) -> Result<f64> {
        Ok(match self {
            Target::KopRl => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(alpha) * mittag_leffler(&MLParams::new(1.0, 1.0 + alpha)?, t)?
                }
            }
            Target::KopExp => {
                let d = alpha * alpha + PI * PI;
                (PI * (alpha * t).exp() - PI * (PI * t).cos() - alpha * (PI * t).sin()) / d
            }
            Target::KopCos => (t.exp() - (alpha * t).cos() + alpha * (alpha * t).sin()) / (1.0 + alpha * alpha),
        })
    }

    /// Max-norm error of the K-op against the closed form on n intervals.
    pub fn error(self, alpha: f64, n: usize) -> Result<f64> {
        let kernel = self.kernel(alpha)?;
        let ps = ParamSet::left(0.0, 1.0)?;
        let f = GridFunction::from_fn(0.0, 1.0, n, |t| self.input(t))?;
        let out = k_op(&ps, &kernel, &f, &OperatorConfig::default())?;
        let mut err = 0.0f64;
        for (i, v) in out.values.values().iter().enumerate() {
            err = err.max((v - self.exact(alpha, f.node(i))?).abs());
        }
        Ok(err)
    }

    pub fn study(self, alpha: f64, ns: &[usize]) -> Result<OrderEstimate> {
        let errors = ns.iter().map(|&n| self.error(alpha, n)).collect::<Result<Vec<_>>>()?;
        observed_order(ns, &errors)
    }
}
