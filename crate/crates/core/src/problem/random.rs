//! Seeded random convex programs for property tests.
//!
//! Every generated problem has a strongly convex quadratic objective, a mix
//! of convex quadratic and affine constraints, and a box `[-4, 4]^n`. All
//! constraints hold with slack at an anchor point in `[-1, 1]^n`, so the
//! feasible set has nonempty interior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Bounds, ConstraintKind, QuadraticObjective, StructuredProblem};
use crate::error::{Error, Result};

pub const BOX_HALF_WIDTH: f64 = 4.0;

fn uniform_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.random_range(lo..hi)))
}

fn uniform_mat<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)))
}

/// `B^T B / n + s I` with `s` in `[0.5, 1.5)`.
fn random_hessian<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let b = uniform_mat(rng, n, n);
    let shift = rng.random_range(0.5..1.5);
    let mut h = b.transpose() * b / n as f64 + DMatrix::identity(n, n) * shift;
    h = (&h + h.transpose()) * 0.5;
    h
}

/// Constraint shape with `g(anchor) = value`.
fn random_constraint<R: Rng>(
    rng: &mut R,
    n: usize,
    anchor: &DVector<f64>,
    value: f64,
) -> ConstraintKind {
    if rng.random_bool(0.5) {
        let c = uniform_mat(rng, n, n);
        let mut a = c.transpose() * c / n as f64;
        a = (&a + a.transpose()) * 0.5;
        let b = uniform_vec(rng, n, -1.0, 1.0);
        let base = 0.5 * anchor.dot(&(&a * anchor)) + b.dot(anchor);
        ConstraintKind::Quadratic {
            a,
            b,
            d: value - base,
        }
    } else {
        let a = uniform_vec(rng, n, -1.0, 1.0);
        ConstraintKind::Affine {
            beta: a.dot(anchor) - value,
            a,
        }
    }
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("need n >= 1 and m >= 1".into()));
    }
    Ok(())
}

fn cube(n: usize) -> Bounds {
    Bounds::new(vec![-BOX_HALF_WIDTH; n], vec![BOX_HALF_WIDTH; n]).expect("valid box")
}

/// Random problem with a random linear term; the optimum is wherever it falls.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<StructuredProblem> {
    check_sizes(n, m)?;
    let anchor = uniform_vec(rng, n, -1.0, 1.0);
    let h = random_hessian(rng, n);
    let c = uniform_vec(rng, n, -3.0, 3.0);
    let constraints = (0..m)
        .map(|_| {
            let slack = rng.random_range(0.1..1.0);
            random_constraint(rng, n, &anchor, -slack)
        })
        .collect();
    let objective = QuadraticObjective {
        h,
        c,
        r: rng.random_range(-1.0..1.0),
    };
    StructuredProblem::new(objective, constraints, cube(n))
}

/// Random problem with a known KKT pair.
///
/// The first `active` constraints vanish at `x*` and carry multipliers in
/// `[0.5, 2)`; the rest hold with slack in `[0.5, 2)`. The linear term of the
/// objective is chosen to make `(x*, l*)` stationary. Requires `active <= n`
/// so the active gradients are generically independent.
pub fn random_kkt_problem<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    active: usize,
) -> Result<(StructuredProblem, DVector<f64>, DVector<f64>)> {
    check_sizes(n, m)?;
    if active > m || active > n {
        return Err(Error::InvalidInput(format!(
            "active count {active} must not exceed n = {n} or m = {m}"
        )));
    }
    let x_star = uniform_vec(rng, n, -1.0, 1.0);
    let h = random_hessian(rng, n);
    let mut lambda = DVector::zeros(m);
    let mut constraints = Vec::with_capacity(m);
    let mut pull = &h * &x_star;
    for i in 0..m {
        let value = if i < active {
            0.0
        } else {
            -rng.random_range(0.5..2.0)
        };
        let c = random_constraint(rng, n, &x_star, value);
        if i < active {
            lambda[i] = rng.random_range(0.5..2.0);
            pull += c.eval(&x_star).1 * lambda[i];
        }
        constraints.push(c);
    }
    let objective = QuadraticObjective {
        h,
        c: -pull,
        r: 0.0,
    };
    let problem = StructuredProblem::new(objective, constraints, cube(n))?;
    Ok((problem, x_star, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::kkt_residual;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constructed_pair_is_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (p, x, l) = random_kkt_problem(&mut rng, 4, 5, 2).unwrap();
            let r = kkt_residual(&p.to_spec().unwrap(), &x, &l, 1.0).unwrap();
            assert!(r.max() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn anchor_is_strictly_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_problem(&mut rng, 3, 6).unwrap();
        let spec = p.to_spec().unwrap();
        // some point in [-1, 1]^3 satisfies all constraints strictly, so the
        // minimum over a coarse grid of max_i g_i is negative
        let mut best = f64::INFINITY;
        for i in 0..=20 {
            for j in 0..=20 {
                for k in 0..=20 {
                    let x = DVector::from_vec(vec![
                        -1.0 + 0.1 * i as f64,
                        -1.0 + 0.1 * j as f64,
                        -1.0 + 0.1 * k as f64,
                    ]);
                    let (g, _) = spec.eval_constraints(&x).unwrap();
                    best = best.min(g.max());
                }
            }
        }
        assert!(best < 0.0);
    }

    #[test]
    fn rejects_too_many_active() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_kkt_problem(&mut rng, 2, 5, 3).is_err());
        assert!(random_kkt_problem(&mut rng, 2, 1, 2).is_err());
    }
}
