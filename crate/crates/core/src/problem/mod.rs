//! Inequality-constrained convex programs
//!
//! ```text
//!   min f(x)   s.t.  g_i(x) <= 0,  i = 1..m
//! ```
//!
//! described by value/gradient oracles together with the regularity constants
//! the rate analysis needs: the gradient-growth parameter `mu` of `f`, the
//! Lipschitz constant `l_smooth` of `grad f`, and for every constraint the
//! Lipschitz constant `L_gi` of `grad g_i` and a bound `B_gi` on `|grad g_i|`.
//!
//! Quadratic constraints have unbounded gradients on all of R^n, so the
//! constants are understood relative to an operating box. The solver flags
//! trajectories that leave it.

mod file;
pub mod random;
mod structured;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use file::{ConstraintEntry, ObjectiveEntry, PointEntry, ProblemFile};
pub use structured::{ConstraintKind, QuadraticObjective, StructuredProblem};

/// Value and gradient oracle `x -> (h(x), grad h(x))`.
pub type Oracle = Arc<dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync>;

pub fn oracle<F>(f: F) -> Oracle
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Smoothness constants of a single constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConstants {
    /// Lipschitz constant of the gradient (`L_gi`).
    #[serde(rename = "L")]
    pub lipschitz: f64,
    /// Bound on the gradient norm (`B_gi`).
    #[serde(rename = "B")]
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub mu: f64,
    pub l_smooth: f64,
    pub constraints: Vec<ConstraintConstants>,
}

impl DeclaredConstants {
    /// Aggregate `L_g = sqrt(sum L_gi^2)`.
    pub fn l_g(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.lipschitz * c.lipschitz)
            .sum::<f64>()
            .sqrt()
    }

    /// Aggregate `B_g = sqrt(sum B_gi^2)`.
    pub fn b_g(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.bound * c.bound)
            .sum::<f64>()
            .sqrt()
    }

    fn validate(&self, m: usize) -> Result<()> {
        check_len("declared constraint constants", m, self.constraints.len())?;
        for (name, v) in [("mu", self.mu), ("l_smooth", self.l_smooth)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "declared {name} must be positive and finite, got {v}"
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            // affine constraints legitimately have L_gi = 0
            if !(c.lipschitz.is_finite() && c.lipschitz >= 0.0)
                || !(c.bound.is_finite() && c.bound >= 0.0)
            {
                return Err(Error::InvalidInput(format!(
                    "constraint {i}: declared (L, B) = ({}, {}) must be finite and nonnegative",
                    c.lipschitz, c.bound
                )));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)),
        )
    }

    fn validate(&self) -> Result<()> {
        check_len("box upper bound", self.lo.len(), self.hi.len())?;
        if self.lo.is_empty() {
            return Err(Error::InvalidInput("box has dimension zero".into()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::InvalidInput(format!(
                    "box coordinate {i}: need finite lo <= hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }
}

/// An instance of the constrained program: oracles plus declared constants.
///
/// Cheap to clone; the oracles are shared and must be pure functions of `x`.
#[derive(Clone)]
pub struct ProblemSpec {
    n: usize,
    objective: Oracle,
    constraints: Vec<Oracle>,
    constants: DeclaredConstants,
    operating_box: Option<Bounds>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n", &self.n)
            .field("m", &self.constraints.len())
            .field("constants", &self.constants)
            .field("operating_box", &self.operating_box)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        n: usize,
        objective: Oracle,
        constraints: Vec<Oracle>,
        constants: DeclaredConstants,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "primal dimension n must be >= 1".into(),
            ));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidInput("need at least one constraint".into()));
        }
        constants.validate(constraints.len())?;
        Ok(Self {
            n,
            objective,
            constraints,
            constants,
            operating_box: None,
        })
    }

    pub fn with_box(mut self, bounds: Bounds) -> Result<Self> {
        bounds.validate()?;
        check_len("operating box", self.n, bounds.dim())?;
        self.operating_box = Some(bounds);
        Ok(self)
    }

    pub fn with_constants(mut self, constants: DeclaredConstants) -> Result<Self> {
        constants.validate(self.m())?;
        self.constants = constants;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn constants(&self) -> &DeclaredConstants {
        &self.constants
    }

    pub fn operating_box(&self) -> Option<&Bounds> {
        self.operating_box.as_ref()
    }

    pub fn eval_objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_len("x", self.n, x.len())?;
        let (v, g) = (self.objective)(x);
        check_len("objective gradient", self.n, g.len())?;
        Ok((v, g))
    }

    /// Single constraint `g_i(x)` and its gradient.
    pub fn eval_constraint(&self, i: usize, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_len("x", self.n, x.len())?;
        let oracle = self.constraints.get(i).ok_or_else(|| {
            Error::InvalidInput(format!(
                "constraint index {i} out of range (m = {})",
                self.m()
            ))
        })?;
        let (v, g) = oracle(x);
        check_len("constraint gradient", self.n, g.len())?;
        Ok((v, g))
    }

    /// Constraint values and the `m x n` Jacobian whose row `i` is `grad g_i(x)^T`.
    pub fn eval_constraints(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        check_len("x", self.n, x.len())?;
        let m = self.m();
        let mut values = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, self.n);
        for (i, oracle) in self.constraints.iter().enumerate() {
            let (v, g) = oracle(x);
            check_len("constraint gradient", self.n, g.len())?;
            values[i] = v;
            jac.row_mut(i).copy_from(&g.transpose());
        }
        Ok((values, jac))
    }
}

/// Relative gradient errors reported by [`finite_diff_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

impl FiniteDiffReport {
    pub fn max_error(&self) -> f64 {
        self.constraints
            .iter()
            .copied()
            .fold(self.objective, f64::max)
    }
}

/// `|a - b| / max(|a|, |b|, 1e-8)`; falls back to an absolute error for
/// vectors that are both essentially zero.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.norm().max(b.norm()).max(1e-8)
}

/// Central-difference gradient of a scalar function.
pub fn central_difference<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let xj = x[j];
        probe[j] = xj + h;
        let fp = f(&probe);
        probe[j] = xj - h;
        let fm = f(&probe);
        probe[j] = xj;
        grad[j] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Compare oracle gradients of `f` and every `g_i` with central differences.
pub fn finite_diff_check(p: &ProblemSpec, x: &DVector<f64>, h: f64) -> Result<FiniteDiffReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step h must be positive, got {h}"
        )));
    }
    check_len("x", p.n(), x.len())?;
    let (_, grad_f) = p.eval_objective(x)?;
    let fd_f = central_difference(|y| (p.objective)(y).0, x, h);
    let objective = relative_error(&grad_f, &fd_f);
    let constraints = p
        .constraints
        .iter()
        .map(|g| {
            let (_, grad) = g(x);
            let fd = central_difference(|y| g(y).0, x, h);
            relative_error(&grad, &fd)
        })
        .collect();
    Ok(FiniteDiffReport {
        objective,
        constraints,
    })
}
