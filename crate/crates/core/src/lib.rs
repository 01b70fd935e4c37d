//! Augmented primal-dual gradient method for smooth convex programs with
//! inequality constraints.
//!
//! ```text
//!   x_{k+1} = x_k - alpha grad_x L(x_k, l_k)
//!   l_{k+1} = l_k + alpha grad_l L(x_k, l_k)
//! ```
//!
//! on the augmented Lagrangian of [`lagrangian`]. [`certificate`] evaluates
//! the admissible stepsize and the linear rate for a given solution,
//! [`oracle`] provides solver-independent references and [`bench`] runs the
//! power-flow experiment.

// `!(a <= b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod certificate;
pub mod error;
pub mod lagrangian;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod solver;

pub use error::{CertificateError, Error, Result};
pub use lagrangian::Penalty;
pub use problem::{ProblemSpec, StructuredProblem};
pub use solver::{KktResidual, SolverConfig};
