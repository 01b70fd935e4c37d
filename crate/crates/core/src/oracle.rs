//! Independent reference solutions and assumption estimators.
//!
//! Nothing here runs the primal-dual iteration: references come from
//! closed-form KKT algebra or from exhaustive grid search with an
//! active-set Newton polish, so they can be used to check the solver.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bench::PowerFlowInstance;
use crate::error::{check_len, Error, Result};
use crate::problem::{Bounds, ConstraintConstants, ProblemSpec};
use crate::solver::{kkt_residual, KktResidual};

/// KKT tolerance every reference solution meets.
pub const REFERENCE_TOL: f64 = 1e-8;
/// Tolerance for the closed-form power-flow solution.
pub const ANALYTIC_TOL: f64 = 1e-10;
/// Constraints with `|g_i(x*)|` below this take part in multiplier recovery.
pub const NEAR_ACTIVE_TOL: f64 = 1e-5;
/// Largest primal dimension [`grid_solve`] accepts.
pub const GRID_MAX_DIM: usize = 3;

/// `rho` used when evaluating the fixed-point gap of a reference; the gap
/// vanishes at KKT points for every positive `rho`.
const RESIDUAL_RHO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    Analytic,
    Grid,
    /// Supplied by the caller, e.g. read from a problem file or built with
    /// known multipliers.
    Supplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub lambda_star: DVector<f64>,
    pub method: ReferenceMethod,
    pub residual: KktResidual,
}

impl ReferenceSolution {
    /// Wraps a caller-supplied pair after checking it is a KKT point.
    pub fn supplied(
        p: &ProblemSpec,
        x_star: DVector<f64>,
        lambda_star: DVector<f64>,
    ) -> Result<Self> {
        let residual = kkt_residual(p, &x_star, &lambda_star, RESIDUAL_RHO)?;
        if !residual.is_kkt(REFERENCE_TOL) {
            return Err(Error::Oracle(format!(
                "supplied pair is not a KKT point (residual {:e})",
                residual.max()
            )));
        }
        Ok(Self {
            x_star,
            lambda_star,
            method: ReferenceMethod::Supplied,
            residual,
        })
    }

    /// `|(x*, l*)|`
    pub fn scale(&self) -> f64 {
        (self.x_star.norm_squared() + self.lambda_star.norm_squared()).sqrt()
    }
}

/// Closed-form KKT point of the power-flow program.
///
/// With `p_v,i > sqrt(S_i)` the disk constraint binds at `p_i = sqrt(S_i)`,
/// `q_i = 0`, with multiplier `(p_v,i - sqrt(S_i)) / sqrt(S_i)`; the box
/// constraints are inactive. Coordinates violating the precondition are
/// solved by [`grid_solve`] on their two-variable subproblem.
pub fn solve_powerflow_analytic(s: &[f64], p_v: &[f64]) -> Result<ReferenceSolution> {
    let inst = PowerFlowInstance::new(s.to_vec(), p_v.to_vec())?;
    let n = inst.n();
    let mut x = DVector::zeros(2 * n);
    let mut lambda = DVector::zeros(3 * n);
    let mut method = ReferenceMethod::Analytic;
    for i in 0..n {
        let root = s[i].sqrt();
        if p_v[i] > root {
            x[i] = root;
            lambda[i] = (p_v[i] - root) / root;
        } else {
            let coord = PowerFlowInstance::new(vec![s[i]], vec![p_v[i]])?;
            let spec = coord.spec();
            let sub = grid_solve(spec, spec.operating_box().expect("instance has a box"), 41)?;
            x[i] = sub.x_star[0];
            x[n + i] = sub.x_star[1];
            for block in 0..3 {
                lambda[block * n + i] = sub.lambda_star[block];
            }
            method = ReferenceMethod::Grid;
        }
    }
    let residual = kkt_residual(inst.spec(), &x, &lambda, RESIDUAL_RHO)?;
    let tol = if method == ReferenceMethod::Analytic {
        ANALYTIC_TOL
    } else {
        REFERENCE_TOL
    };
    if !residual.is_kkt(tol) {
        return Err(Error::Oracle(format!(
            "power-flow reference misses KKT tolerance {tol:e} (residual {:e})",
            residual.max()
        )));
    }
    Ok(ReferenceSolution {
        x_star: x,
        lambda_star: lambda,
        method,
        residual,
    })
}

/// Brute-force reference for problems with `n <= 3`.
///
/// Minimizes `f` over the feasible points of a `resolution^n` grid on
/// `bounds`, zooms the grid around the incumbent until its spacing reaches
/// rounding level, then polishes with Newton steps on the KKT system of the
/// near-active constraints. Multipliers are the least-squares fit of
/// stationarity over constraints with `|g_i| <= 1e-5`.
pub fn grid_solve(
    p: &ProblemSpec,
    bounds: &Bounds,
    resolution: usize,
) -> Result<ReferenceSolution> {
    let n = p.n();
    if n > GRID_MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "grid search supports n <= {GRID_MAX_DIM}, got {n}"
        )));
    }
    check_len("grid box", n, bounds.dim())?;
    if resolution < 2 {
        return Err(Error::InvalidInput("grid resolution must be >= 2".into()));
    }

    let mut lo = DVector::from_column_slice(&bounds.lo);
    let mut hi = DVector::from_column_slice(&bounds.hi);
    let mut best = grid_minimum(p, &lo, &hi, resolution, None)?
        .ok_or_else(|| Error::Oracle("no feasible grid point".into()))?;

    let scale = lo.amax().max(hi.amax()).max(1.0);
    let mut spacing = (&hi - &lo).amax() / (resolution - 1) as f64;
    while spacing > 1e-14 * scale {
        for j in 0..n {
            lo[j] = (best.0[j] - 2.0 * spacing).max(bounds.lo[j]);
            hi[j] = (best.0[j] + 2.0 * spacing).min(bounds.hi[j]);
        }
        if let Some(found) = grid_minimum(p, &lo, &hi, resolution, Some(best.clone()))? {
            best = found;
        }
        let next = (&hi - &lo).amax() / (resolution - 1) as f64;
        if next >= spacing {
            break;
        }
        spacing = next;
    }

    let x = polish(p, &best.0).unwrap_or(best.0);
    let lambda = fit_multipliers(p, &x)?;
    let residual = kkt_residual(p, &x, &lambda, RESIDUAL_RHO)?;
    if !residual.is_kkt(REFERENCE_TOL) {
        return Err(Error::Oracle(format!(
            "grid reference misses KKT tolerance {REFERENCE_TOL:e} (residual {:e})",
            residual.max()
        )));
    }
    Ok(ReferenceSolution {
        x_star: x,
        lambda_star: lambda,
        method: ReferenceMethod::Grid,
        residual,
    })
}

fn is_feasible(p: &ProblemSpec, x: &DVector<f64>) -> Result<bool> {
    for i in 0..p.m() {
        if !(p.eval_constraint(i, x)?.0 <= 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Best feasible grid point in `[lo, hi]`, seeded with `incumbent`.
fn grid_minimum(
    p: &ProblemSpec,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    resolution: usize,
    incumbent: Option<(DVector<f64>, f64)>,
) -> Result<Option<(DVector<f64>, f64)>> {
    let n = lo.len();
    let mut best = incumbent;
    let mut index = vec![0usize; n];
    let mut x = DVector::zeros(n);
    let steps = resolution - 1;
    loop {
        for j in 0..n {
            let t = index[j] as f64 / steps as f64;
            x[j] = if index[j] == steps {
                hi[j]
            } else {
                lo[j] + t * (hi[j] - lo[j])
            };
        }
        if is_feasible(p, &x)? {
            let (f, _) = p.eval_objective(&x)?;
            if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
                best = Some((x.clone(), f));
            }
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == n {
                return Ok(best);
            }
            index[j] += 1;
            if index[j] <= steps {
                break;
            }
            index[j] = 0;
            j += 1;
        }
    }
}

fn hessian_fd<F>(grad: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let t = 1e-5 * x[j].abs().max(1.0);
        probe[j] = x[j] + t;
        let gp = grad(&probe);
        probe[j] = x[j] - t;
        let gm = grad(&probe);
        probe[j] = x[j];
        h.set_column(j, &((gp - gm) / (2.0 * t)));
    }
    (&h + h.transpose()) * 0.5
}

/// Newton polish on the equality-constrained KKT system of the constraints
/// near activity at `start`. Returns `None` when the polish fails to land on
/// a feasible point with nonnegative multipliers.
fn polish(p: &ProblemSpec, start: &DVector<f64>) -> Option<DVector<f64>> {
    let (g0, _) = p.eval_constraints(start).ok()?;
    let mut working: Vec<usize> = (0..p.m()).filter(|&i| g0[i] >= -NEAR_ACTIVE_TOL).collect();
    for _ in 0..=p.m() {
        match newton_on(p, start, &working) {
            Some((x, mult)) => {
                let (g, _) = p.eval_constraints(&x).ok()?;
                let feasible = g.iter().all(|&v| v <= 1e-12 * (1.0 + x.amax()));
                let worst = mult
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, v)| (k, *v));
                match worst {
                    Some((k, v)) if v < -1e-10 => {
                        working.remove(k);
                    }
                    _ if feasible => return Some(x),
                    _ => return None,
                }
            }
            None => return None,
        }
    }
    None
}

fn newton_on(
    p: &ProblemSpec,
    start: &DVector<f64>,
    working: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.n();
    let k = working.len();
    let mut x = start.clone();
    let mut mult = DVector::zeros(k);
    for _ in 0..50 {
        let (_, grad_f) = p.eval_objective(&x).ok()?;
        let (g, jac) = p.eval_constraints(&x).ok()?;
        let mut hess = hessian_fd(
            |y| {
                p.eval_objective(y)
                    .map(|v| v.1)
                    .unwrap_or_else(|_| y.clone())
            },
            &x,
        );
        for (w, &i) in working.iter().enumerate() {
            let hi = hessian_fd(
                |y| {
                    p.eval_constraint(i, y)
                        .map(|v| v.1)
                        .unwrap_or_else(|_| y.clone())
                },
                &x,
            );
            hess += hi * mult[w];
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&grad_f));
        for (w, &i) in working.iter().enumerate() {
            let row = jac.row(i);
            kkt.view_mut((n + w, 0), (1, n)).copy_from(&row);
            kkt.view_mut((0, n + w), (n, 1)).copy_from(&row.transpose());
            rhs[n + w] = -g[i];
        }
        let sol = kkt.lu().solve(&rhs)?;
        let dx = sol.rows(0, n).into_owned();
        mult = sol.rows(n, k).into_owned();
        x += &dx;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        if dx.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    Some((x, mult))
}

/// Least-squares multipliers on the near-active constraints, clamped at zero.
fn fit_multipliers(p: &ProblemSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (_, grad_f) = p.eval_objective(x)?;
    let (g, jac) = p.eval_constraints(x)?;
    let near: Vec<usize> = (0..p.m())
        .filter(|&i| g[i].abs() <= NEAR_ACTIVE_TOL)
        .collect();
    let mut lambda = DVector::zeros(p.m());
    if near.is_empty() {
        return Ok(lambda);
    }
    // grad f + J_A^T l = 0  =>  J_A^T l = -grad f
    let lhs = jac.select_rows(near.iter()).transpose();
    let fit = lhs
        .svd(true, true)
        .solve(&(-grad_f), 1e-14)
        .map_err(|e| Error::Oracle(format!("multiplier fit failed: {e}")))?;
    for (w, &i) in near.iter().enumerate() {
        lambda[i] = fit[w].max(0.0);
    }
    Ok(lambda)
}

/// Minimum over seeded samples in the `radius` ball around `x*` of
/// `(grad f(x) - grad f(x*))^T (x - x*) / |x - x*|^2`.
///
/// Sampling can only miss the worst direction, so this overestimates the
/// true growth parameter.
pub fn estimate_mu(
    p: &ProblemSpec,
    x_star: &DVector<f64>,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let n = p.n();
    let (_, g_star) = p.eval_objective(x_star)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimate = f64::INFINITY;
    for _ in 0..samples {
        let dir = random_unit(&mut rng, n);
        let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
        if r == 0.0 {
            continue;
        }
        let dx = dir * r;
        let x = x_star + &dx;
        let (_, g) = p.eval_objective(&x)?;
        let ratio = (g - &g_star).dot(&dx) / dx.norm_squared();
        estimate = estimate.min(ratio);
    }
    Ok(estimate)
}

/// Sampled smoothness constants. These are lower estimates of the true ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessEstimate {
    pub l_smooth: f64,
    pub constraints: Vec<ConstraintConstants>,
}

/// Largest gradient-difference ratios over consecutive pairs of seeded
/// uniform samples in `bounds`, and largest constraint-gradient norms.
pub fn estimate_smoothness(
    p: &ProblemSpec,
    bounds: &Bounds,
    samples: usize,
    seed: u64,
) -> Result<SmoothnessEstimate> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    check_len("box", p.n(), bounds.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p.m();
    let mut l_smooth = 0.0_f64;
    let mut constraints = vec![
        ConstraintConstants {
            lipschitz: 0.0,
            bound: 0.0,
        };
        m
    ];
    let mut prev: Option<(DVector<f64>, DVector<f64>, DMatrix<f64>)> = None;
    for _ in 0..samples {
        let x = DVector::from_iterator(
            p.n(),
            bounds
                .lo
                .iter()
                .zip(&bounds.hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>()),
        );
        let (_, gf) = p.eval_objective(&x)?;
        let (_, jac) = p.eval_constraints(&x)?;
        for (i, c) in constraints.iter_mut().enumerate() {
            c.bound = c.bound.max(jac.row(i).norm());
        }
        if let Some((xp, gfp, jacp)) = &prev {
            let dist = (&x - xp).norm();
            if dist > 0.0 {
                l_smooth = l_smooth.max((&gf - gfp).norm() / dist);
                for (i, c) in constraints.iter_mut().enumerate() {
                    c.lipschitz = c.lipschitz.max((jac.row(i) - jacp.row(i)).norm() / dist);
                }
            }
        }
        prev = Some((x, gf, jac));
    }
    Ok(SmoothnessEstimate {
        l_smooth,
        constraints,
    })
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{oracle, DeclaredConstants, Oracle};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// `(x - shift)^2` subject to `x - 1 <= 0`
    fn scalar(shift: f64) -> ProblemSpec {
        let f: Oracle = oracle(move |x: &DVector<f64>| {
            let d = x[0] - shift;
            (d * d, dv(&[2.0 * d]))
        });
        let g: Oracle = oracle(|x: &DVector<f64>| (x[0] - 1.0, dv(&[1.0])));
        let constants = DeclaredConstants {
            mu: 2.0,
            l_smooth: 2.0,
            constraints: vec![ConstraintConstants {
                lipschitz: 0.0,
                bound: 1.0,
            }],
        };
        ProblemSpec::new(1, f, vec![g], constants).unwrap()
    }

    fn line() -> Bounds {
        Bounds::new(vec![-3.0], vec![3.0]).unwrap()
    }

    #[test]
    fn grid_inactive_constraint() {
        let r = grid_solve(&scalar(0.0), &line(), 61).unwrap();
        assert!(r.x_star[0].abs() < 1e-12);
        assert_eq!(r.lambda_star[0], 0.0);
    }

    #[test]
    fn grid_active_constraint() {
        let r = grid_solve(&scalar(2.0), &line(), 61).unwrap();
        assert!((r.x_star[0] - 1.0).abs() < 1e-12);
        assert!((r.lambda_star[0] - 2.0).abs() < 1e-9);
        assert_eq!(r.method, ReferenceMethod::Grid);
    }

    #[test]
    fn grid_rejects_large_dimension() {
        let inst = PowerFlowInstance::new(vec![1.0, 1.0], vec![4.0, 4.0]).unwrap();
        let spec = inst.spec();
        assert!(grid_solve(spec, spec.operating_box().unwrap(), 5).is_err());
    }

    #[test]
    fn grid_without_feasible_points() {
        let b = Bounds::new(vec![2.0], vec![3.0]).unwrap();
        assert!(matches!(
            grid_solve(&scalar(0.0), &b, 11),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn analytic_powerflow_values() {
        let r = solve_powerflow_analytic(&[2.7], &[10.8]).unwrap();
        let root = 2.7f64.sqrt();
        assert!((r.x_star[0] - root).abs() < 1e-15);
        assert_eq!(r.x_star[1], 0.0);
        // 4 sqrt(S) - 1 for p_v = 4 S
        assert!((r.lambda_star[0] - (4.0 * root - 1.0)).abs() < 1e-12);
        assert!((r.x_star[0] - 1.643168).abs() < 1e-6);
        assert!((r.lambda_star[0] - 5.572671).abs() < 1e-6);
        assert_eq!(r.method, ReferenceMethod::Analytic);

        let r = solve_powerflow_analytic(&[1.0, 1.0], &[4.0, 4.0]).unwrap();
        assert_eq!(r.x_star, dv(&[1.0, 1.0, 0.0, 0.0]));
        assert_eq!(r.lambda_star.rows(0, 2).into_owned(), dv(&[3.0, 3.0]));
        assert!(r.lambda_star.rows(2, 4).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_falls_back_to_grid() {
        // p_v = 0.5 < sqrt(1): the unconstrained minimizer (0.5, 0) is feasible
        let r = solve_powerflow_analytic(&[1.0], &[0.5]).unwrap();
        assert_eq!(r.method, ReferenceMethod::Grid);
        assert!((r.x_star[0] - 0.5).abs() < 1e-9);
        assert!(r.x_star[1].abs() < 1e-9);
    }

    #[test]
    fn grid_matches_analytic_on_coordinate() {
        let inst = PowerFlowInstance::new(vec![2.7], vec![10.8]).unwrap();
        let spec = inst.spec();
        let grid = grid_solve(spec, spec.operating_box().unwrap(), 41).unwrap();
        let exact = solve_powerflow_analytic(&[2.7], &[10.8]).unwrap();
        assert!((&grid.x_star - &exact.x_star).amax() < 1e-6);
        assert!((&grid.lambda_star - &exact.lambda_star).amax() < 1e-6);
    }

    #[test]
    fn mu_of_identity_hessian() {
        let f: Oracle = oracle(|x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone()));
        let g: Oracle = oracle(|x: &DVector<f64>| (x[0] - 10.0, dv(&[1.0, 0.0, 0.0])));
        let constants = DeclaredConstants {
            mu: 1.0,
            l_smooth: 1.0,
            constraints: vec![ConstraintConstants {
                lipschitz: 0.0,
                bound: 1.0,
            }],
        };
        let p = ProblemSpec::new(3, f, vec![g], constants).unwrap();
        let mu = estimate_mu(&p, &DVector::zeros(3), 200, 2.0, 7).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mu_of_powerflow_objective() {
        let inst = PowerFlowInstance::paper();
        let r = solve_powerflow_analytic(&inst.s, &inst.p_v).unwrap();
        let mu = estimate_mu(inst.spec(), &r.x_star, 500, 3.0, 1).unwrap();
        assert!((mu - 2.0).abs() < 1e-9);
    }

    #[test]
    fn estimates_are_reproducible() {
        let inst = PowerFlowInstance::paper();
        let spec = inst.spec();
        let b = spec.operating_box().unwrap();
        let a = estimate_smoothness(spec, b, 50, 3).unwrap();
        let c = estimate_smoothness(spec, b, 50, 3).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn smoothness_of_powerflow() {
        let inst = PowerFlowInstance::paper();
        let spec = inst.spec();
        let est = estimate_smoothness(spec, spec.operating_box().unwrap(), 400, 11).unwrap();
        assert!(est.l_smooth <= 2.0 + 1e-12);
        let n = inst.n();
        for i in 0..n {
            let reach = 2.0 * (inst.p_v[i].powi(2) * 2.0).sqrt();
            assert!(est.constraints[i].bound <= reach + 1e-12);
            assert!(est.constraints[i].lipschitz <= 2.0 + 1e-12);
        }
        for i in n..3 * n {
            // box rows are affine: constant unit gradients
            assert_eq!(est.constraints[i].lipschitz, 0.0);
            assert_eq!(est.constraints[i].bound, 1.0);
        }
    }
}
