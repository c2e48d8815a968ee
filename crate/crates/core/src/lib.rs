//! Generalized fractional calculus on uniform grids.
//!
//! Kernel-parameterized fractional integrals and derivatives, numerical
//! checks of their integration-by-parts and relation identities, direct
//! solvers for fractional variational and isoperimetric problems, and the
//! Volterra machinery behind the closed-form extremals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod expr;
pub mod grid;
pub mod identities;
pub mod kernels;
pub mod operators;
pub mod problem;
pub mod quadrature;
pub mod specfun;
pub mod variational;
pub mod volterra;

pub use error::{Error, ErrorClass, Result};
pub use grid::{DerivativeScheme, GridFunction};
pub use identities::{IdentityReport, Side};
pub use kernels::{Kernel, KernelKind, KernelSpec};
pub use operators::{OpOutput, OperatorConfig, ParamSet, Quadrature};
pub use specfun::MLParams;
pub use variational::{Boundary, Constraint, Lagrangian, SolveResult, VariationalProblem};
