//! Augmented primal-dual gradient iteration
//!
//! ```text
//!   x_{k+1} = x_k - alpha grad_x L(x_k, l_k)
//!   l_{k+1} = l_k + alpha grad_l L(x_k, l_k)
//! ```
//!
//! Both updates read the old pair `(x_k, l_k)`. With `0 < alpha <= rho` and
//! `l_0 >= 0` the multipliers stay nonnegative; the dual update is evaluated
//! as the convex combination `(1 - alpha/rho) l_k + (alpha/rho) [rho g + l_k]_+`
//! so that this holds exactly in floating point as well.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::certificate::LyapunovForm;
use crate::error::{check_len, Error, Result};
use crate::lagrangian::{clamped_multipliers, grad_x_from_parts};
use crate::linalg::stacked_norm;
use crate::problem::ProblemSpec;

/// Iterates with `|x_k|` or `|l_k|` above this are treated as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

pub const DEFAULT_STOP_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// CSV header of [`Trace::write_csv`].
pub const TRACE_CSV_HEADER: [&str; 7] = [
    "k",
    "fixed_point_gap",
    "stationarity",
    "primal_infeas",
    "complementarity",
    "dist_to_ref",
    "lyapunov",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub record_every: usize,
}

impl SolverConfig {
    /// Stepsize `alpha`, penalty `rho`, default stopping rule, every iterate recorded.
    ///
    /// `alpha > rho` is accepted (the iteration is still defined) but loses the
    /// multiplier sign guarantee; see [`SolverConfig::stepsize_warning`].
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("rho", rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let config = Self {
            alpha,
            rho,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            record_every: 1,
        };
        if let Some(w) = config.stepsize_warning() {
            log::warn!("{w}");
        }
        Ok(config)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: f64) -> Self {
        self.stop_tol = stop_tol;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn stepsize_warning(&self) -> Option<String> {
        (self.alpha > self.rho).then(|| {
            format!(
                "alpha = {} exceeds rho = {}; multipliers may turn negative",
                self.alpha, self.rho
            )
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha and rho must be positive, got alpha = {}, rho = {}",
                self.alpha, self.rho
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "stop_tol must be nonnegative, got {}",
                self.stop_tol
            )));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidInput(
                "max_iters and record_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl IterateState {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>) -> Self {
        Self { k: 0, x, lambda }
    }
}

/// KKT violation of a primal-dual pair. All five fields vanish exactly at KKT points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    /// `|grad f(x) + sum_i l_i grad g_i(x)|`
    pub stationarity: f64,
    /// `max_i [g_i(x)]_+`
    pub primal_infeas: f64,
    /// `max_i [-l_i]_+`
    pub dual_infeas: f64,
    /// `max_i |l_i g_i(x)|`
    pub complementarity: f64,
    /// `|l - [rho g(x) + l]_+|`
    pub fixed_point_gap: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_infeas)
            .max(self.dual_infeas)
            .max(self.complementarity)
            .max(self.fixed_point_gap)
    }

    pub fn is_kkt(&self, tol: f64) -> bool {
        self.max() <= tol
    }

    fn is_finite(&self) -> bool {
        self.max().is_finite()
    }
}

/// Oracle outputs at one primal point.
struct Evaluation {
    grad_f: DVector<f64>,
    g: DVector<f64>,
    jac: DMatrix<f64>,
}

impl Evaluation {
    fn at(p: &ProblemSpec, x: &DVector<f64>) -> Result<Self> {
        let (_, grad_f) = p.eval_objective(x)?;
        let (g, jac) = p.eval_constraints(x)?;
        Ok(Self { grad_f, g, jac })
    }

    fn is_finite(&self) -> bool {
        self.grad_f
            .iter()
            .chain(self.g.iter())
            .chain(self.jac.iter())
            .all(|v| v.is_finite())
    }

    fn residual(&self, lambda: &DVector<f64>, rho: f64) -> KktResidual {
        let stationarity = (&self.grad_f + self.jac.tr_mul(lambda)).norm();
        let primal_infeas = self.g.iter().fold(0.0_f64, |a, &v| a.max(v));
        let dual_infeas = lambda.iter().fold(0.0_f64, |a, &v| a.max(-v));
        let complementarity = lambda
            .iter()
            .zip(self.g.iter())
            .fold(0.0_f64, |a, (l, g)| a.max((l * g).abs()));
        let fixed_point_gap = (lambda - clamped_multipliers(&self.g, lambda, rho)).norm();
        KktResidual {
            stationarity,
            primal_infeas,
            dual_infeas,
            complementarity,
            fixed_point_gap,
        }
    }

    fn advance(&self, s: &IterateState, c: &SolverConfig) -> IterateState {
        let clamped = clamped_multipliers(&self.g, &s.lambda, c.rho);
        let x = &s.x - grad_x_from_parts(&self.grad_f, &self.jac, &clamped) * c.alpha;
        let t = c.alpha / c.rho;
        let lambda = &s.lambda * (1.0 - t) + clamped * t;
        IterateState {
            k: s.k + 1,
            x,
            lambda,
        }
    }
}

pub fn kkt_residual(
    p: &ProblemSpec,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
) -> Result<KktResidual> {
    check_len("lambda", p.m(), lambda.len())?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rho must be positive, got {rho}"
        )));
    }
    Ok(Evaluation::at(p, x)?.residual(lambda, rho))
}

/// One simultaneous primal-dual update.
pub fn step(p: &ProblemSpec, s: &IterateState, c: &SolverConfig) -> Result<IterateState> {
    check_len("lambda", p.m(), s.lambda.len())?;
    c.validate()?;
    let eval = Evaluation::at(p, &s.x)?;
    if !eval.is_finite() {
        return Err(Error::Numeric {
            iteration: s.k,
            message: "oracle returned a non-finite value".into(),
        });
    }
    let next = eval.advance(s, c);
    if !all_finite(&next) {
        return Err(Error::Numeric {
            iteration: next.k,
            message: "iterate overflowed".into(),
        });
    }
    Ok(next)
}

fn all_finite(s: &IterateState) -> bool {
    s.x.iter().chain(s.lambda.iter()).all(|v| v.is_finite())
}

/// Optional quantities tracked along a run.
#[derive(Debug, Clone, Default)]
pub struct Monitor {
    /// Reference solution `(x*, l*)` for distance tracking.
    pub reference: Option<(DVector<f64>, DVector<f64>)>,
    /// Lyapunov form evaluated on the error to `reference`.
    pub lyapunov: Option<LyapunovForm>,
}

impl Monitor {
    pub fn with_reference(x_star: DVector<f64>, lambda_star: DVector<f64>) -> Self {
        Self {
            reference: Some((x_star, lambda_star)),
            lyapunov: None,
        }
    }

    pub fn with_lyapunov(mut self, form: LyapunovForm) -> Self {
        self.lyapunov = Some(form);
        self
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if let Some((x, l)) = &self.reference {
            check_len("reference x", n, x.len())?;
            check_len("reference lambda", m, l.len())?;
        } else if self.lyapunov.is_some() {
            return Err(Error::InvalidInput(
                "a Lyapunov form needs a reference solution".into(),
            ));
        }
        if let Some(form) = &self.lyapunov {
            if form.jacobian().shape() != (m, n) {
                return Err(Error::InvalidInput(format!(
                    "Lyapunov Jacobian must be {m}x{n}, got {}x{}",
                    form.jacobian().nrows(),
                    form.jacobian().ncols()
                )));
            }
        }
        Ok(())
    }

    fn measure(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> (Option<f64>, Option<f64>) {
        let Some((xs, ls)) = &self.reference else {
            return (None, None);
        };
        let dx = x - xs;
        let dl = lambda - ls;
        let dist = stacked_norm(&dx, &dl);
        let lyap = self.lyapunov.as_ref().map(|f| f.value_of_error(&dx, &dl));
        (Some(dist), lyap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// `stationarity + fixed_point_gap <= stop_tol`.
    Converged,
    MaxIterations,
    /// The iterate at `iteration` overflowed or exceeded [`DIVERGENCE_LIMIT`].
    Diverged {
        iteration: usize,
        reason: String,
    },
}

/// Borrowed view of one iterate handed to observers.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub lambda: &'a DVector<f64>,
    pub residual: KktResidual,
    pub dist_to_ref: Option<f64>,
    pub lyapunov: Option<f64>,
    /// Set on the last snapshot of a run.
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub termination: Termination,
    /// Last finite iterate.
    pub final_state: IterateState,
    pub final_residual: KktResidual,
    /// First iteration whose primal iterate lay outside the operating box.
    pub left_box_at: Option<usize>,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.final_state.k
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn check_start(p: &ProblemSpec, x0: &DVector<f64>, lambda0: &DVector<f64>) -> Result<()> {
    check_len("x0", p.n(), x0.len())?;
    check_len("lambda0", p.m(), lambda0.len())?;
    if let Some((i, v)) = lambda0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "lambda0 must be nonnegative; component {i} is {v}"
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("x0 must be finite".into()));
    }
    Ok(())
}

/// Iterate from `(x0, lambda0)` calling `observe` on every iterate.
///
/// Stops on convergence, after `max_iters` steps, or on divergence. Divergence
/// is reported through [`Termination::Diverged`], not as an error.
pub fn run_observed<F>(
    p: &ProblemSpec,
    c: &SolverConfig,
    x0: &DVector<f64>,
    lambda0: &DVector<f64>,
    monitor: &Monitor,
    mut observe: F,
) -> Result<RunOutcome>
where
    F: FnMut(&Snapshot<'_>),
{
    c.validate()?;
    check_start(p, x0, lambda0)?;
    monitor.validate(p.n(), p.m())?;

    let mut state = IterateState::new(x0.clone(), lambda0.clone());
    let mut left_box_at = None;
    loop {
        let eval = Evaluation::at(p, &state.x)?;
        let residual = eval.residual(&state.lambda, c.rho);
        let (dist_to_ref, lyapunov) = monitor.measure(&state.x, &state.lambda);

        if left_box_at.is_none() {
            if let Some(b) = p.operating_box() {
                if !b.contains(&state.x) {
                    log::warn!(
                        "iterate {} left the operating box; declared constants may not hold",
                        state.k
                    );
                    left_box_at = Some(state.k);
                }
            }
        }

        let termination = if !eval.is_finite() || !residual.is_finite() {
            Some(Termination::Diverged {
                iteration: state.k,
                reason: "oracle returned a non-finite value".into(),
            })
        } else if residual.stationarity + residual.fixed_point_gap <= c.stop_tol {
            Some(Termination::Converged)
        } else if state.k >= c.max_iters {
            Some(Termination::MaxIterations)
        } else {
            None
        };

        let next = termination.is_none().then(|| eval.advance(&state, c));
        let termination = termination.or_else(|| {
            let next = next.as_ref().expect("computed when not terminated");
            divergence(next, c).map(|reason| Termination::Diverged {
                iteration: next.k,
                reason,
            })
        });

        observe(&Snapshot {
            k: state.k,
            x: &state.x,
            lambda: &state.lambda,
            residual,
            dist_to_ref,
            lyapunov,
            is_final: termination.is_some(),
        });

        if let Some(termination) = termination {
            if let Termination::Diverged { iteration, reason } = &termination {
                log::warn!("diverged at iteration {iteration}: {reason}");
            }
            return Ok(RunOutcome {
                termination,
                final_state: state,
                final_residual: residual,
                left_box_at,
            });
        }
        state = next.expect("computed when not terminated");
    }
}

fn divergence(s: &IterateState, c: &SolverConfig) -> Option<String> {
    let hint = |what: &str| {
        format!(
            "{what}; alpha = {} likely exceeds the admissible stepsize bound (see `certify` for alpha_max)",
            c.alpha
        )
    };
    if !all_finite(s) {
        return Some(hint("iterate overflowed"));
    }
    let (nx, nl) = (s.x.norm(), s.lambda.norm());
    if nx > DIVERGENCE_LIMIT || nl > DIVERGENCE_LIMIT {
        return Some(hint(&format!(
            "|x| = {nx:e}, |lambda| = {nl:e} exceed {DIVERGENCE_LIMIT:e}"
        )));
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub k: usize,
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub residual: KktResidual,
    pub dist_to_ref: Option<f64>,
    pub lyapunov: Option<f64>,
}

/// Recorded iterates of a run plus its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub outcome: RunOutcome,
}

impl Trace {
    pub fn last(&self) -> &TraceEntry {
        self.entries
            .last()
            .expect("a trace always holds its final iterate")
    }

    /// CSV with header [`TRACE_CSV_HEADER`]; missing optional columns are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                e.k.to_string(),
                e.residual.fixed_point_gap.to_string(),
                e.residual.stationarity.to_string(),
                e.residual.primal_infeas.to_string(),
                e.residual.complementarity.to_string(),
                opt(e.dist_to_ref),
                opt(e.lyapunov),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run and record every `record_every`-th iterate plus the final one.
pub fn run(
    p: &ProblemSpec,
    c: &SolverConfig,
    x0: &DVector<f64>,
    lambda0: &DVector<f64>,
    monitor: &Monitor,
) -> Result<Trace> {
    let mut entries = Vec::new();
    let outcome = run_observed(p, c, x0, lambda0, monitor, |s| {
        if s.k % c.record_every == 0 || s.is_final {
            entries.push(TraceEntry {
                k: s.k,
                x: s.x.clone(),
                lambda: s.lambda.clone(),
                residual: s.residual,
                dist_to_ref: s.dist_to_ref,
                lyapunov: s.lyapunov,
            });
        }
    })?;
    Ok(Trace { entries, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{oracle, ConstraintConstants, DeclaredConstants, Oracle};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// `f(x) = (x - shift)^2`, `g(x) = x - 1`
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

    fn state(x: f64, l: f64) -> IterateState {
        IterateState::new(dv(&[x]), dv(&[l]))
    }

    #[test]
    fn step_hand_examples() {
        let p = scalar(0.0);
        let c = SolverConfig::new(0.5, 1.0).unwrap();
        let s1 = step(&p, &state(0.0, 0.0), &c).unwrap();
        assert_eq!((s1.x[0], s1.lambda[0], s1.k), (0.0, 0.0, 1));
        // grad_x = 4 + [1]_+ = 5, grad_l = 1
        let s1 = step(&p, &state(2.0, 0.0), &c).unwrap();
        assert_eq!((s1.x[0], s1.lambda[0]), (-0.5, 0.5));
    }

    #[test]
    fn kkt_pair_is_fixed() {
        // (x - 2)^2 with x <= 1: x* = 1, l* = 2
        let p = scalar(2.0);
        let c = SolverConfig::new(0.3, 1.0).unwrap();
        let s = step(&p, &state(1.0, 2.0), &c).unwrap();
        assert_eq!((s.x[0], s.lambda[0]), (1.0, 2.0));
        let r = kkt_residual(&p, &dv(&[1.0]), &dv(&[2.0]), 1.0).unwrap();
        assert!(r.max() < 1e-12);
    }

    #[test]
    fn residual_of_non_kkt_pair() {
        // x* = 0, l* = 0 for f = x^2; (1, 2) is not a KKT pair
        let p = scalar(0.0);
        let r = kkt_residual(&p, &dv(&[0.0]), &dv(&[0.0]), 1.0).unwrap();
        assert_eq!(r.max(), 0.0);
        let r = kkt_residual(&p, &dv(&[1.0]), &dv(&[2.0]), 1.0).unwrap();
        assert!(r.stationarity > 1.0);
    }

    #[test]
    fn interior_point_residual() {
        let p = scalar(0.0);
        let r = kkt_residual(&p, &dv(&[0.5]), &dv(&[0.0]), 1.0).unwrap();
        assert_eq!(r.stationarity, 1.0);
        assert_eq!(r.primal_infeas, 0.0);
        assert_eq!(r.dual_infeas, 0.0);
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.fixed_point_gap, 0.0);
    }

    #[test]
    fn negative_multiplier_is_dual_infeasible() {
        let p = scalar(0.0);
        let r = kkt_residual(&p, &dv(&[0.0]), &dv(&[-0.25]), 1.0).unwrap();
        assert_eq!(r.dual_infeas, 0.25);
    }

    #[test]
    fn run_from_kkt_pair_stops_immediately() {
        let p = scalar(2.0);
        let c = SolverConfig::new(0.1, 0.1).unwrap();
        let t = run(&p, &c, &dv(&[1.0]), &dv(&[2.0]), &Monitor::default()).unwrap();
        assert_eq!(t.outcome.termination, Termination::Converged);
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.last().k, 0);
        assert_eq!(t.last().residual.max(), 0.0);
    }

    #[test]
    fn run_converges_on_scalar_problems() {
        let c = SolverConfig::new(0.5, 1.0).unwrap();
        let t = run(
            &scalar(0.0),
            &c,
            &dv(&[2.0]),
            &dv(&[0.0]),
            &Monitor::default(),
        )
        .unwrap();
        assert!(t.outcome.converged());
        assert!(t.last().x[0].abs() < 1e-9 && t.last().lambda[0].abs() < 1e-9);

        let t = run(
            &scalar(2.0),
            &c,
            &dv(&[2.0]),
            &dv(&[0.0]),
            &Monitor::default(),
        )
        .unwrap();
        assert!(t.outcome.converged());
        assert!((t.last().x[0] - 1.0).abs() < 1e-9);
        assert!((t.last().lambda[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_initial_multiplier() {
        let c = SolverConfig::new(0.5, 1.0).unwrap();
        let err = run(
            &scalar(0.0),
            &c,
            &dv(&[2.0]),
            &dv(&[-1.0]),
            &Monitor::default(),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn large_stepsize_diverges_with_partial_trace() {
        let c = SolverConfig::new(50.0, 1.0).unwrap();
        let t = run(
            &scalar(2.0),
            &c,
            &dv(&[2.0]),
            &dv(&[0.0]),
            &Monitor::default(),
        )
        .unwrap();
        match &t.outcome.termination {
            Termination::Diverged { reason, .. } => assert!(reason.contains("alpha")),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(!t.entries.is_empty());
    }

    #[test]
    fn max_iterations_and_recording() {
        let c = SolverConfig::new(0.01, 1.0)
            .unwrap()
            .with_max_iters(25)
            .with_record_every(10);
        let t = run(
            &scalar(2.0),
            &c,
            &dv(&[5.0]),
            &dv(&[0.0]),
            &Monitor::default(),
        )
        .unwrap();
        assert_eq!(t.outcome.termination, Termination::MaxIterations);
        let ks: Vec<_> = t.entries.iter().map(|e| e.k).collect();
        assert_eq!(ks, vec![0, 10, 20, 25]);
    }

    #[test]
    fn distance_to_reference_is_stacked() {
        let c = SolverConfig::new(0.1, 1.0).unwrap().with_max_iters(1);
        let m = Monitor::with_reference(dv(&[1.0]), dv(&[2.0]));
        let t = run(&scalar(2.0), &c, &dv(&[4.0]), &dv(&[6.0]), &m).unwrap();
        assert_eq!(t.entries[0].dist_to_ref, Some(5.0));
    }

    #[test]
    fn non_finite_oracle_is_numeric_error() {
        let f: Oracle = oracle(|_: &DVector<f64>| (f64::NAN, dv(&[f64::NAN])));
        let g: Oracle = oracle(|x: &DVector<f64>| (x[0], dv(&[1.0])));
        let constants = DeclaredConstants {
            mu: 1.0,
            l_smooth: 1.0,
            constraints: vec![ConstraintConstants {
                lipschitz: 0.0,
                bound: 1.0,
            }],
        };
        let p = ProblemSpec::new(1, f, vec![g], constants).unwrap();
        let c = SolverConfig::new(0.1, 1.0).unwrap();
        let mut s = state(0.0, 0.0);
        s.k = 7;
        assert!(matches!(
            step(&p, &s, &c),
            Err(Error::Numeric { iteration: 7, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let c = SolverConfig::new(0.5, 1.0).unwrap().with_max_iters(3);
        let t = run(
            &scalar(2.0),
            &c,
            &dv(&[2.0]),
            &dv(&[0.0]),
            &Monitor::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,fixed_point_gap,stationarity,primal_infeas,complementarity,dist_to_ref,lyapunov"
        );
        let first: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[5], "");
        assert_eq!(text.lines().count(), 1 + t.entries.len());
    }

    #[test]
    fn stepsize_warning_when_alpha_exceeds_rho() {
        assert!(SolverConfig::new(0.2, 0.1)
            .unwrap()
            .stepsize_warning()
            .is_some());
        assert!(SolverConfig::new(0.1, 0.1)
            .unwrap()
            .stepsize_warning()
            .is_none());
    }
}
