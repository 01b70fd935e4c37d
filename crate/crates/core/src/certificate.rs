//! Linear-rate certificates.
//!
//! Given a KKT pair `(x*, l*)` with linearly independent active gradients,
//! every constant of the rate bound is evaluated here:
//!
//! ```text
//!   theta1 = rho B_g^2 + L_g |l*|
//!   a1 = 2 l^2 + 4 theta1^2           a2 = 4 B_g^2
//!   a3 = 2 B_g^2 l^2/kappa + 2 B_g^2 theta1^2/kappa + 2 B_g^2/(kappa rho^2) + kappa B_g^2 rho^2/4
//!   a4 = B_g^2 l^2/2 + B_g^2 theta1^2 + 2 B_g^2
//!   a5 = B_g^2 + 2/rho^2
//!   b1 = a1 + 2 B_g^2                 b2 = a2 + 2/rho^2
//!
//!   delta < min{ mu/(2 a3), (1-pi*)/(2 rho (kappa + 8 B_g^2 + L_g^2 (1-pi*))), 1/B_g }
//!   alpha < min{ 1, rho, 2 mu/(b1 + 2 a4 delta), kappa delta/(2 b2 + 4 a5 delta),
//!                (1-pi*)/(2 rho (b2 + 2 a5 delta)) }
//!
//!   c1 = mu alpha - a3 delta alpha - b1 alpha^2/2 - a4 delta alpha^2
//!   c2 = kappa delta alpha/4 - b2 alpha^2/2 - a5 delta alpha^2
//!   c3 = alpha (1-pi*)/(2 rho) - (delta alpha kappa + b2 alpha^2 + 2 a5 delta alpha^2)/2
//!        - 4 alpha delta B_g^2
//!   gamma = min{c1, c2, c3}
//!
//!   Q_delta = [[I, delta J^T], [delta J, I]],  C = lambda_max(Q_delta)/lambda_min(Q_delta)
//!   pi* = [rho max_{i inactive} g_i(x*) / (sqrt(C) d0) + 1]_+^2
//! ```
//!
//! so that `|x_k - x*|^2 + |l_k - l*|^2 <= C (1 - gamma)^k d0^2` for runs
//! started at distance `d0`, and the Lyapunov value
//! `V_k = z_k^T Q_delta z_k` decays by `1 - gamma` per step.
//!
//! `pi*`, `delta` and `C` depend on each other; [`build_certificate`]
//! resolves the cycle by fixed-point iteration.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, CertificateError, Error, Result};
use crate::linalg::{spectral_norm, stacked_norm, sym_eig_extremes};
use crate::problem::ProblemSpec;
use crate::solver::kkt_residual;

pub const DEFAULT_ACT_TOL: f64 = 1e-7;
pub const DEFAULT_SAFETY: f64 = 0.9;
/// Reference pairs must be KKT to this tolerance.
pub const REFERENCE_KKT_TOL: f64 = 1e-8;
/// `kappa` below this fraction of `|J_I|^2` counts as rank deficient.
pub const LICQ_TOL: f64 = 1e-10;

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetInfo {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    /// Constraint values `g(x*)`.
    pub values: DVector<f64>,
    /// Full constraint Jacobian at `x*` (`m x n`).
    pub jacobian: DMatrix<f64>,
    /// Rows of `jacobian` indexed by `active`.
    pub jacobian_active: DMatrix<f64>,
    /// `lambda_min(J_I J_I^T)`
    pub kappa: f64,
}

pub fn active_set(p: &ProblemSpec, x_star: &DVector<f64>, act_tol: f64) -> Result<ActiveSetInfo> {
    if !(act_tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "act_tol must be nonnegative, got {act_tol}"
        )));
    }
    let (values, jacobian) = p.eval_constraints(x_star)?;
    let worst = values.max();
    if worst > act_tol {
        return Err(Error::InvalidInput(format!(
            "x* is infeasible: max_i g_i(x*) = {worst:e} > {act_tol:e}"
        )));
    }
    let (active, inactive): (Vec<usize>, Vec<usize>) =
        (0..p.m()).partition(|&i| values[i].abs() <= act_tol);
    if active.is_empty() {
        return Err(CertificateError::EmptyActiveSet.into());
    }
    let jacobian_active = jacobian.select_rows(active.iter());
    let gram = &jacobian_active * jacobian_active.transpose();
    let (kappa, top) = sym_eig_extremes(&gram)?;
    if kappa <= LICQ_TOL * top.max(1.0) {
        return Err(CertificateError::LicqViolated { kappa }.into());
    }
    Ok(ActiveSetInfo {
        active,
        inactive,
        values,
        jacobian,
        jacobian_active,
        kappa,
    })
}

/// Which definition of `a1` to use.
///
/// `Squared` is `a1 = 2 l^2 + 4 theta1^2`, which bounds the squared primal
/// gradient. `Linear` is `a1 = 2 l + 4 theta1^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum A1Variant {
    #[default]
    Squared,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateOptions {
    pub act_tol: f64,
    /// Fraction of the strict upper bounds used for `delta` and `alpha`.
    pub safety: f64,
    pub a1_variant: A1Variant,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            act_tol: DEFAULT_ACT_TOL,
            safety: DEFAULT_SAFETY,
            a1_variant: A1Variant::default(),
        }
    }
}

/// Constants that depend only on the problem, `rho` and `(x*, l*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseConstants {
    pub mu: f64,
    pub l_smooth: f64,
    pub l_g: f64,
    pub b_g: f64,
    pub kappa: f64,
    pub rho: f64,
    pub theta1: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub b1: f64,
    pub b2: f64,
}

impl BaseConstants {
    pub fn new(
        p: &ProblemSpec,
        info: &ActiveSetInfo,
        lambda_star: &DVector<f64>,
        rho: f64,
        a1_variant: A1Variant,
    ) -> Result<Self> {
        let declared = p.constants();
        let mu = declared.mu;
        let l = declared.l_smooth;
        let l_g = declared.l_g();
        let b_g = declared.b_g();
        let kappa = info.kappa;
        positive("rho", rho)?;
        positive("B_g", b_g)?;
        positive("kappa", kappa)?;

        let bg2 = b_g * b_g;
        let theta1 = rho * bg2 + l_g * lambda_star.norm();
        let a1 = match a1_variant {
            A1Variant::Squared => 2.0 * l * l + 4.0 * theta1 * theta1,
            A1Variant::Linear => 2.0 * l + 4.0 * theta1 * theta1,
        };
        let a2 = 4.0 * bg2;
        let a3 = 2.0 * bg2 * l * l / kappa
            + 2.0 * bg2 * theta1 * theta1 / kappa
            + 2.0 * bg2 / (kappa * rho * rho)
            + kappa * bg2 * rho * rho / 4.0;
        let a4 = bg2 * l * l / 2.0 + bg2 * theta1 * theta1 + 2.0 * bg2;
        let a5 = bg2 + 2.0 / (rho * rho);
        Ok(Self {
            mu,
            l_smooth: l,
            l_g,
            b_g,
            kappa,
            rho,
            theta1,
            a1,
            a2,
            a3,
            a4,
            a5,
            b1: a1 + 2.0 * bg2,
            b2: a2 + 2.0 / (rho * rho),
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CertificateError::NonPositive { name, value }.into())
    }
}

fn check_pi_star(pi_star: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi_star) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "pi* must lie in [0, 1], got {pi_star}"
        )))
    }
}

/// `safety * min{ mu/(2 a3), (1-pi*)/(2 rho (kappa + 8 B_g^2 + L_g^2 (1-pi*))), 1/B_g }`
pub fn compute_delta(base: &BaseConstants, pi_star: f64, safety: f64) -> Result<f64> {
    check_pi_star(pi_star)?;
    check_safety(safety)?;
    let slack = 1.0 - pi_star;
    let bg2 = base.b_g * base.b_g;
    let growth = base.mu / (2.0 * base.a3);
    let dual = slack / (2.0 * base.rho * (base.kappa + 8.0 * bg2 + base.l_g * base.l_g * slack));
    let coupling = 1.0 / base.b_g;
    positive("delta", safety * growth.min(dual).min(coupling))
}

/// The five-way minimum bounding admissible stepsizes.
pub fn compute_alpha_max(base: &BaseConstants, delta: f64, pi_star: f64) -> Result<f64> {
    check_pi_star(pi_star)?;
    positive("delta", delta)?;
    let candidates = [
        1.0,
        base.rho,
        2.0 * base.mu / (base.b1 + 2.0 * base.a4 * delta),
        base.kappa * delta / (2.0 * base.b2 + 4.0 * base.a5 * delta),
        (1.0 - pi_star) / (2.0 * base.rho * (base.b2 + 2.0 * base.a5 * delta)),
    ];
    positive(
        "alpha_max",
        candidates.into_iter().fold(f64::INFINITY, f64::min),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Contraction terms `c1, c2, c3` at stepsize `alpha` and `gamma = min(c1, c2, c3)`,
/// kept strictly below one.
pub fn compute_gamma(
    base: &BaseConstants,
    delta: f64,
    pi_star: f64,
    alpha: f64,
) -> Result<RateTriple> {
    check_pi_star(pi_star)?;
    positive("alpha", alpha)?;
    let BaseConstants {
        mu,
        kappa,
        rho,
        a3,
        a4,
        a5,
        b1,
        b2,
        b_g,
        ..
    } = *base;
    let a = alpha;
    let c1 = mu * a - a3 * delta * a - b1 * a * a / 2.0 - a4 * delta * a * a;
    let c2 = kappa * delta * a / 4.0 - b2 * a * a / 2.0 - a5 * delta * a * a;
    let c3 = a / (2.0 * rho) * (1.0 - pi_star)
        - (delta * a * kappa + b2 * a * a + 2.0 * a5 * delta * a * a) / 2.0
        - 4.0 * a * delta * b_g * b_g;
    positive("c1", c1)?;
    positive("c2", c2)?;
    positive("c3", c3)?;
    let gamma = c1.min(c2).min(c3).min(1.0 - f64::EPSILON);
    Ok(RateTriple { gamma, c1, c2, c3 })
}

/// `[rho max_{i inactive} g_i(x*) / (sqrt(C) d0) + 1]_+^2`, zero without inactive constraints.
pub fn compute_pi_star(info: &ActiveSetInfo, rho: f64, condition: f64, d0: f64) -> Result<f64> {
    positive("d0", d0)?;
    if !(condition >= 1.0 && condition.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "C must be >= 1, got {condition}"
        )));
    }
    let Some(closest) = info
        .inactive
        .iter()
        .map(|&i| info.values[i])
        .reduce(f64::max)
    else {
        return Ok(0.0);
    };
    let t = rho * closest / (condition.sqrt() * d0) + 1.0;
    Ok(if t > 0.0 { (t * t).min(1.0) } else { 0.0 })
}

/// `[[I_n, delta J^T], [delta J, I_m]]` for an `m x n` Jacobian.
pub fn q_delta(jacobian: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let (m, n) = jacobian.shape();
    let mut q = DMatrix::identity(n + m, n + m);
    q.view_mut((n, 0), (m, n)).copy_from(&(jacobian * delta));
    q.view_mut((0, n), (n, m))
        .copy_from(&(jacobian.transpose() * delta));
    q
}

/// `C = lambda_max(Q_delta) / lambda_min(Q_delta)`.
pub fn condition_number(jacobian: &DMatrix<f64>, delta: f64) -> Result<f64> {
    let (lo, hi) = sym_eig_extremes(&q_delta(jacobian, delta))?;
    if lo <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Q_delta is not positive definite (lambda_min = {lo:e})"
        )));
    }
    Ok((hi / lo).max(1.0))
}

/// `z^T Q_delta z` for the stacked error `z = (x - x*, l - l*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovForm {
    jacobian: DMatrix<f64>,
    delta: f64,
}

impl LyapunovForm {
    /// Fails unless `Q_delta` is positive definite, i.e. `delta |J| < 1`.
    pub fn new(jacobian: DMatrix<f64>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        let norm = spectral_norm(&jacobian)?;
        if delta * norm >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "Q_delta is not positive definite: delta |J| = {:e} >= 1",
                delta * norm
            )));
        }
        Ok(Self { jacobian, delta })
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn value_of_error(&self, dx: &DVector<f64>, dl: &DVector<f64>) -> f64 {
        dx.norm_squared() + dl.norm_squared() + 2.0 * self.delta * dl.dot(&(&self.jacobian * dx))
    }

    pub fn value(
        &self,
        x: &DVector<f64>,
        lambda: &DVector<f64>,
        x_star: &DVector<f64>,
        lambda_star: &DVector<f64>,
    ) -> Result<f64> {
        let (m, n) = self.jacobian.shape();
        for (what, want, got) in [
            ("x", n, x.len()),
            ("x*", n, x_star.len()),
            ("lambda", m, lambda.len()),
            ("lambda*", m, lambda_star.len()),
        ] {
            check_len(what, want, got)?;
        }
        Ok(self.value_of_error(&(x - x_star), &(lambda - lambda_star)))
    }
}

pub fn lyapunov_value(
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    x_star: &DVector<f64>,
    lambda_star: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    delta: f64,
) -> Result<f64> {
    LyapunovForm::new(jacobian.clone(), delta)?.value(x, lambda, x_star, lambda_star)
}

/// Every constant of the linear-rate bound for one `(x*, l*, rho, d0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub base: BaseConstants,
    pub active: Vec<usize>,
    pub delta: f64,
    pub alpha_max: f64,
    /// Stepsize the rate is evaluated at (`safety * alpha_max`).
    pub alpha: f64,
    pub rate: RateTriple,
    pub pi_star: f64,
    pub condition: f64,
    pub d0: f64,
    /// Rounds of the `(pi*, delta, C)` fixed-point iteration.
    pub rounds: usize,
    pub a1_variant: A1Variant,
    pub lyapunov: LyapunovForm,
}

impl RateCertificate {
    pub fn gamma(&self) -> f64 {
        self.rate.gamma
    }

    /// `C (1 - gamma)^k d0^2`, the bound on the squared stacked error at step `k`.
    pub fn envelope(&self, k: usize) -> f64 {
        self.condition * (1.0 - self.rate.gamma).powf(k as f64) * self.d0 * self.d0
    }

    /// Flat `name = value` listing, one constant per line.
    pub fn report(&self) -> String {
        let b = &self.base;
        let active = self
            .active
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let variant = match self.a1_variant {
            A1Variant::Squared => "squared",
            A1Variant::Linear => "linear",
        };
        let e = |v: f64| format!("{v:e}");
        let rows: [(&str, String); 27] = [
            ("mu", e(b.mu)),
            ("l_smooth", e(b.l_smooth)),
            ("L_g", e(b.l_g)),
            ("B_g", e(b.b_g)),
            ("rho", e(b.rho)),
            ("active_set", active),
            ("kappa", e(b.kappa)),
            ("theta1", e(b.theta1)),
            ("a1_variant", variant.to_string()),
            ("a1", e(b.a1)),
            ("a2", e(b.a2)),
            ("a3", e(b.a3)),
            ("a4", e(b.a4)),
            ("a5", e(b.a5)),
            ("b1", e(b.b1)),
            ("b2", e(b.b2)),
            ("delta", e(self.delta)),
            ("alpha_max", e(self.alpha_max)),
            ("alpha", e(self.alpha)),
            ("gamma", e(self.rate.gamma)),
            ("c1", e(self.rate.c1)),
            ("c2", e(self.rate.c2)),
            ("c3", e(self.rate.c3)),
            ("C", e(self.condition)),
            ("pi_star", e(self.pi_star)),
            ("d0", e(self.d0)),
            ("fixed_point_rounds", self.rounds.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn check_safety(safety: f64) -> Result<()> {
    if safety > 0.0 && safety < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "safety must lie in (0, 1), got {safety}"
        )))
    }
}

/// Assemble a certificate for a KKT reference pair.
///
/// `pi*` depends on `C`, `C` on `delta` and `delta` on `pi*`. Starting from
/// `pi*` evaluated at `delta = 0.5 / B_g`, the three are updated in turn until
/// `pi*` moves by less than `1e-12`. The stepsize the rate is evaluated at is
/// `safety * alpha_max`.
pub fn build_certificate(
    p: &ProblemSpec,
    x_star: &DVector<f64>,
    lambda_star: &DVector<f64>,
    rho: f64,
    d0: f64,
    opts: &CertificateOptions,
) -> Result<RateCertificate> {
    check_len("lambda*", p.m(), lambda_star.len())?;
    check_safety(opts.safety)?;
    if !(d0.is_finite() && d0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "d0 must be positive, got {d0}"
        )));
    }
    let residual = kkt_residual(p, x_star, lambda_star, rho)?.max();
    if !(residual <= REFERENCE_KKT_TOL) {
        return Err(CertificateError::NotKkt { residual }.into());
    }
    let info = active_set(p, x_star, opts.act_tol)?;
    let base = BaseConstants::new(p, &info, lambda_star, rho, opts.a1_variant)?;

    let mut delta = 0.5 / base.b_g;
    let mut condition = condition_number(&info.jacobian, delta)?;
    let mut pi_star = compute_pi_star(&info, rho, condition, d0)?;
    let mut rounds = 0;
    loop {
        rounds += 1;
        delta = compute_delta(&base, pi_star, opts.safety)?;
        condition = condition_number(&info.jacobian, delta)?;
        let next = compute_pi_star(&info, rho, condition, d0)?;
        let change = (next - pi_star).abs();
        pi_star = next;
        if change < FIXED_POINT_TOL {
            break;
        }
        if rounds >= FIXED_POINT_ROUNDS {
            return Err(CertificateError::NoFixedPoint { rounds, change }.into());
        }
    }

    let alpha_max = compute_alpha_max(&base, delta, pi_star)?;
    let alpha = opts.safety * alpha_max;
    let rate = compute_gamma(&base, delta, pi_star, alpha)?;
    let lyapunov = LyapunovForm::new(info.jacobian.clone(), delta)?;
    Ok(RateCertificate {
        base,
        active: info.active,
        delta,
        alpha_max,
        alpha,
        rate,
        pi_star,
        condition,
        d0,
        rounds,
        a1_variant: opts.a1_variant,
        lyapunov,
    })
}

/// Stacked norm `|(x*, l*)|`, the scale initial distances are quoted in.
pub fn reference_scale(x_star: &DVector<f64>, lambda_star: &DVector<f64>) -> f64 {
    stacked_norm(x_star, lambda_star)
}
