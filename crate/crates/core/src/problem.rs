//! JSON problem files for the variational solvers.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::operators::{OperatorConfig, ParamSet};
use crate::variational::{Boundary, Constraint, Lagrangian, VariationalProblem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

/// Weights of a parameter set; the domain comes from the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub p: f64,
    pub q: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { p: 1.0, q: 0.0 }
    }
}

/// Expression strings in t, y, u, v, w; omitted partials are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    pub value: String,
    #[serde(default = "zero")]
    pub d2: String,
    #[serde(default = "zero")]
    pub d3: String,
    #[serde(default = "zero")]
    pub d4: String,
    #[serde(default = "zero")]
    pub d5: String,
}

fn zero() -> String {
    "0".into()
}

impl LagrangianSpec {
    pub fn build(&self) -> Result<Lagrangian> {
        Lagrangian::from_exprs(&self.value, [&self.d2, &self.d3, &self.d4, &self.d5])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub g: LagrangianSpec,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { n: 256, tol: 1e-10, max_iter: 50_000 }
    }
}

/// The on-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub p1: Weights,
    #[serde(default)]
    pub p2: Weights,
    /// Order defaults to 1 − alpha.
    pub kernel_b: KernelSpec,
    /// Order defaults to beta.
    pub kernel_k: KernelSpec,
    pub lagrangian: LagrangianSpec,
    pub bc: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub config: OperatorConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn line_col_to_offset(src: &str, line: usize, column: usize) -> usize {
    let start: usize = src.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(src.len())
}

impl ProblemSpec {
    /// Parses JSON; syntax errors carry a byte offset, shape errors are
    /// schema errors.
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                Error::Parse { offset: line_col_to_offset(src, e.line(), e.column()), message: e.to_string() }
            } else {
                Error::Schema(e.to_string())
            }
        })
    }

    pub fn build(&self) -> Result<VariationalProblem> {
        let (a, b) = (self.domain.a, self.domain.b);
        let p1 = ParamSet::new(a, b, self.p1.p, self.p1.q)?;
        let p2 = ParamSet::new(a, b, self.p2.p, self.p2.q)?;
        let constraint = match &self.constraint {
            Some(c) => Some(Constraint { g: c.g.build()?, xi: c.xi }),
            None => None,
        };
        let prob = VariationalProblem {
            a,
            b,
            p1,
            p2,
            alpha: self.alpha,
            beta: self.beta,
            kernel_b: self.kernel_b.build(1.0 - self.alpha)?,
            kernel_k: self.kernel_k.build(self.beta)?,
            lagrangian: self.lagrangian.build()?,
            bc: self.bc,
            constraint,
            cfg: self.config,
        };
        prob.validate()?;
        Ok(prob)
    }
}
