//! Augmented Lagrangian
//!
//! ```text
//!   L(x, l) = f(x) + sum_i ( [rho g_i(x) + l_i]_+^2 - l_i^2 ) / (2 rho)
//!   grad_x L = grad f(x) + sum_i [rho g_i(x) + l_i]_+ grad g_i(x)
//!   grad_l L = ( [rho g(x) + l]_+ - l ) / rho
//! ```
//!
//! The clamp uses an exact comparison with zero; at the kink
//! `rho g_i + l_i = 0` the closed forms above are used as they stand.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::problem::ProblemSpec;

/// Penalty parameter `rho > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Penalty(f64);

impl Penalty {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidInput(format!(
                "penalty rho must be positive, got {rho}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Componentwise `max(v_i, 0)`.
pub fn project_nonneg(v: &DVector<f64>) -> DVector<f64> {
    v.map(|e| if e > 0.0 { e } else { 0.0 })
}

/// `[rho g + lambda]_+`, the clamped multiplier estimate.
pub(crate) fn clamped_multipliers(
    g: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    project_nonneg(&(g * rho + lambda))
}

pub(crate) fn grad_x_from_parts(
    grad_f: &DVector<f64>,
    jac: &DMatrix<f64>,
    clamped: &DVector<f64>,
) -> DVector<f64> {
    grad_f + jac.tr_mul(clamped)
}

pub(crate) fn grad_lambda_from_parts(
    clamped: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    (clamped - lambda) / rho
}

fn check_dims(p: &ProblemSpec, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<()> {
    check_len("x", p.n(), x.len())?;
    check_len("lambda", p.m(), lambda.len())
}

pub fn aug_value(
    p: &ProblemSpec,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: Penalty,
) -> Result<f64> {
    check_dims(p, x, lambda)?;
    let rho = rho.get();
    let (f, _) = p.eval_objective(x)?;
    let (g, _) = p.eval_constraints(x)?;
    let clamped = clamped_multipliers(&g, lambda, rho);
    let penalty: f64 = clamped
        .iter()
        .zip(lambda.iter())
        .map(|(c, l)| (c * c - l * l) / (2.0 * rho))
        .sum();
    Ok(f + penalty)
}

pub fn grad_x(
    p: &ProblemSpec,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: Penalty,
) -> Result<DVector<f64>> {
    check_dims(p, x, lambda)?;
    let (_, grad_f) = p.eval_objective(x)?;
    let (g, jac) = p.eval_constraints(x)?;
    let clamped = clamped_multipliers(&g, lambda, rho.get());
    Ok(grad_x_from_parts(&grad_f, &jac, &clamped))
}

pub fn grad_lambda(
    p: &ProblemSpec,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: Penalty,
) -> Result<DVector<f64>> {
    check_dims(p, x, lambda)?;
    let (g, _) = p.eval_constraints(x)?;
    let clamped = clamped_multipliers(&g, lambda, rho.get());
    Ok(grad_lambda_from_parts(&clamped, lambda, rho.get()))
}
