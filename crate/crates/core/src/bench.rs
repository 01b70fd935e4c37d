//! Power-flow benchmark
//!
//! ```text
//!   min  sum_i (p_i - p_v,i)^2 + q_i^2
//!   s.t. p_i^2 + q_i^2 - S_i <= 0,   -p_i <= 0,   p_i - p_v,i <= 0
//! ```
//!
//! with `x = (p, q)` and the `3n` constraints ordered as all disk rows, then
//! all lower bounds, then all upper bounds. The experiment starts the solver
//! from random points at prescribed distances from the optimum and records
//! the normalized distance `|(x_k - x*, l_k - l*)| / |(x*, l*)|`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::stacked_norm;
use crate::oracle::{random_unit, solve_powerflow_analytic, ReferenceSolution};
use crate::problem::{Bounds, ConstraintKind, ProblemSpec, QuadraticObjective, StructuredProblem};
use crate::solver::{run_observed, Monitor, SolverConfig, Termination};

/// Apparent powers of the ten-bus instance.
pub const PAPER_S: [f64; 10] = [2.7, 1.35, 2.7, 1.35, 2.025, 2.025, 2.7, 2.7, 1.35, 2.025];

/// Attempts [`sample_initial`] makes before giving up.
pub const MAX_SAMPLE_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone)]
pub struct PowerFlowInstance {
    pub s: Vec<f64>,
    pub p_v: Vec<f64>,
    problem: StructuredProblem,
    spec: ProblemSpec,
}

impl PowerFlowInstance {
    /// The operating box is `0 <= p <= p_v`, `|q| <= p_v`.
    pub fn new(s: Vec<f64>, p_v: Vec<f64>) -> Result<Self> {
        let n = s.len();
        if n == 0 {
            return Err(Error::InvalidInput("need at least one bus".into()));
        }
        check_len("p_v", n, p_v.len())?;
        if let Some(v) = s.iter().chain(&p_v).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "S and p_v must be positive, got {v}"
            )));
        }
        let dim = 2 * n;
        let mut c = DVector::zeros(dim);
        for i in 0..n {
            c[i] = -2.0 * p_v[i];
        }
        let objective = QuadraticObjective {
            h: DMatrix::identity(dim, dim) * 2.0,
            c,
            r: p_v.iter().map(|v| v * v).sum(),
        };
        let mut constraints = Vec::with_capacity(3 * n);
        for i in 0..n {
            let mut a = DMatrix::zeros(dim, dim);
            a[(i, i)] = 2.0;
            a[(n + i, n + i)] = 2.0;
            constraints.push(ConstraintKind::Quadratic {
                a,
                b: DVector::zeros(dim),
                d: -s[i],
            });
        }
        for i in 0..n {
            let mut a = DVector::zeros(dim);
            a[i] = -1.0;
            constraints.push(ConstraintKind::Affine { a, beta: 0.0 });
        }
        for i in 0..n {
            let mut a = DVector::zeros(dim);
            a[i] = 1.0;
            constraints.push(ConstraintKind::Affine { a, beta: p_v[i] });
        }
        let lo = (0..dim)
            .map(|j| if j < n { 0.0 } else { -p_v[j - n] })
            .collect();
        let hi = (0..dim).map(|j| p_v[j % n]).collect();
        let problem = StructuredProblem::new(objective, constraints, Bounds::new(lo, hi)?)?;
        let spec = problem.to_spec()?;
        Ok(Self {
            s,
            p_v,
            problem,
            spec,
        })
    }

    /// Ten buses with `p_v = 4 S`.
    pub fn paper() -> Self {
        let s = PAPER_S.to_vec();
        let p_v = s.iter().map(|v| 4.0 * v).collect();
        Self::new(s, p_v).expect("paper data is valid")
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn structured(&self) -> &StructuredProblem {
        &self.problem
    }

    pub fn reference(&self) -> Result<ReferenceSolution> {
        solve_powerflow_analytic(&self.s, &self.p_v)
    }
}

pub fn build_paper_instance() -> PowerFlowInstance {
    PowerFlowInstance::paper()
}

/// Random start at stacked distance `d0` from the reference with `l0 >= 0`.
///
/// A uniform direction is scaled to length `d0`; negative multipliers are
/// clamped to zero and the primal block is rescaled so the stacked distance
/// is still `d0`. Directions whose clamped dual part alone exceeds `d0`, or
/// whose primal part vanishes, are redrawn from the next substream.
pub fn sample_initial(
    reference: &ReferenceSolution,
    d0: f64,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "d0 must be positive, got {d0}"
        )));
    }
    let xs = &reference.x_star;
    let ls = &reference.lambda_star;
    let (n, m) = (xs.len(), ls.len());
    for attempt in 0..MAX_SAMPLE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let dir = random_unit(&mut rng, n + m) * d0;
        let dx = dir.rows(0, n).into_owned();
        let lambda0 = (ls + dir.rows(n, m)).map(|v| v.max(0.0));
        let dl_sq = (&lambda0 - ls).norm_squared();
        let rest = d0 * d0 - dl_sq;
        let dx_norm = dx.norm();
        if rest < 0.0 || dx_norm == 0.0 {
            continue;
        }
        let x0 = xs + dx * (rest.sqrt() / dx_norm);
        return Ok((x0, lambda0));
    }
    Err(Error::InvalidInput(format!(
        "no admissible initial point at distance {d0} after {MAX_SAMPLE_ATTEMPTS} attempts"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub rho: f64,
    pub alpha: f64,
    /// Initial distances as multiples of `|(x*, l*)|`.
    pub d0_multipliers: Vec<f64>,
    pub seeds_per_case: usize,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub master_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            rho: 0.1,
            alpha: 0.1,
            d0_multipliers: vec![0.1, 5.0, 10.0],
            seeds_per_case: 10,
            max_iters: 20_000,
            stop_tol: 1e-10,
            master_seed: 2020,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        SolverConfig::new(self.alpha, self.rho)?;
        if self.seeds_per_case == 0 {
            return Err(Error::InvalidInput(
                "seeds_per_case must be positive".into(),
            ));
        }
        if self.d0_multipliers.is_empty() {
            return Err(Error::InvalidInput(
                "need at least one d0 multiplier".into(),
            ));
        }
        for (i, m) in self.d0_multipliers.iter().enumerate() {
            if !(m.is_finite() && *m > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "d0 multiplier {m} must be positive"
                )));
            }
            if self.d0_multipliers[..i].contains(m) {
                return Err(Error::InvalidInput(format!(
                    "d0 multiplier {m} is repeated"
                )));
            }
        }
        Ok(())
    }

    /// Seed of run `(multiplier index, seed index)`.
    pub fn run_seed(&self, case: usize, index: usize) -> u64 {
        splitmix64(self.master_seed ^ splitmix64(((case as u64) << 32) | index as u64))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iters",
            Self::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub d0_multiplier: f64,
    pub case: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub iters: usize,
    /// Largest KKT residual field at the last iterate.
    pub final_kkt: f64,
    pub final_x: DVector<f64>,
    pub final_lambda: DVector<f64>,
    /// Normalized distance at `k = 0..=iters`.
    pub norm_dist: Vec<f64>,
    pub early_rate: f64,
    pub late_rate: f64,
}

impl RunRecord {
    /// First `k` from which the normalized distance never increases, if any.
    pub fn monotone_from(&self) -> usize {
        let d = &self.norm_dist;
        let mut start = d.len().saturating_sub(1);
        while start > 0 && d[start] <= d[start - 1] {
            start -= 1;
        }
        start
    }
}

/// Geometric-mean contraction over the first and last tenth of a curve.
pub fn phase_rates(norm_dist: &[f64]) -> (f64, f64) {
    let last = norm_dist.len().saturating_sub(1);
    if last == 0 {
        return (f64::NAN, f64::NAN);
    }
    let span = (last / 10).max(1);
    let ratio = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else {
            (b / a).powf(1.0 / span as f64)
        }
    };
    (
        ratio(norm_dist[0], norm_dist[span]),
        ratio(norm_dist[last - span], norm_dist[last]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub reference: ReferenceSolution,
    /// `|(x*, l*)|`
    pub scale: f64,
    /// Ordered by multiplier index, then seed index.
    pub runs: Vec<RunRecord>,
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "d0_multiplier",
    "seed",
    "iters",
    "final_kkt",
    "early_rate",
    "late_rate",
    "status",
];

impl ExperimentReport {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Converged)
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for r in &self.runs {
            w.write_record([
                r.d0_multiplier.to_string(),
                r.seed.to_string(),
                r.iters.to_string(),
                format!("{:e}", r.final_kkt),
                r.early_rate.to_string(),
                r.late_rate.to_string(),
                r.status.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_run_csv<W: Write>(run: &RunRecord, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "norm_dist"])?;
        for (k, d) in run.norm_dist.iter().enumerate() {
            w.write_record([k.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: `d0_multiplier,seed_index,k,norm_dist`.
    pub fn write_plot_data<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["d0_multiplier", "seed_index", "k", "norm_dist"])?;
        for r in &self.runs {
            let m = r.d0_multiplier.to_string();
            let s = r.seed_index.to_string();
            for (k, d) in r.norm_dist.iter().enumerate() {
                w.write_record([m.as_str(), s.as_str(), &k.to_string(), &d.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `summary.csv`, `plot_data.csv` and `runs/d0_<case>_seed_<index>.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir)?;
        let create = |p: &Path| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(p)?)) };
        self.write_summary(create(&dir.join("summary.csv"))?)?;
        self.write_plot_data(create(&dir.join("plot_data.csv"))?)?;
        for r in &self.runs {
            let name = format!("d0_{}_seed_{}.csv", r.case, r.seed_index);
            Self::write_run_csv(r, create(&runs_dir.join(name))?)?;
        }
        Ok(())
    }
}

/// Run the plan on the ten-bus instance against its closed-form optimum.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let inst = PowerFlowInstance::paper();
    let reference = inst.reference()?;
    run_experiment_on(inst.spec(), &reference, plan)
}

pub fn run_experiment_on(
    p: &ProblemSpec,
    reference: &ReferenceSolution,
    plan: &ExperimentPlan,
) -> Result<ExperimentReport> {
    plan.validate()?;
    let scale = reference.scale();
    let config = SolverConfig::new(plan.alpha, plan.rho)?
        .with_max_iters(plan.max_iters)
        .with_stop_tol(plan.stop_tol);
    let jobs: Vec<(usize, usize)> = (0..plan.d0_multipliers.len())
        .flat_map(|c| (0..plan.seeds_per_case).map(move |s| (c, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(case, seed_index)| {
            let mult = plan.d0_multipliers[case];
            let seed = plan.run_seed(case, seed_index);
            let (x0, l0) = sample_initial(reference, mult * scale, seed)?;
            let monitor =
                Monitor::with_reference(reference.x_star.clone(), reference.lambda_star.clone());
            let mut norm_dist = Vec::new();
            let outcome = run_observed(p, &config, &x0, &l0, &monitor, |s| {
                norm_dist.push(s.dist_to_ref.expect("reference is set") / scale);
            })?;
            let status = match outcome.termination {
                Termination::Converged => RunStatus::Converged,
                Termination::MaxIterations => RunStatus::MaxIterations,
                Termination::Diverged { .. } => RunStatus::Diverged,
            };
            let (early_rate, late_rate) = phase_rates(&norm_dist);
            log::info!(
                "d0 = {mult} x scale, seed {seed_index}: {} after {} iterations",
                status.as_str(),
                outcome.iterations()
            );
            Ok(RunRecord {
                d0_multiplier: mult,
                case,
                seed_index,
                seed,
                status,
                iters: outcome.iterations(),
                final_kkt: outcome.final_residual.max(),
                final_x: outcome.final_state.x,
                final_lambda: outcome.final_state.lambda,
                norm_dist,
                early_rate,
                late_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        plan: plan.clone(),
        reference: reference.clone(),
        scale,
        runs,
    })
}

/// Stacked distance of `(x, l)` from the reference.
pub fn distance_to(reference: &ReferenceSolution, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    stacked_norm(&(x - &reference.x_star), &(lambda - &reference.lambda_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_instance_data() {
        let inst = build_paper_instance();
        assert_eq!(inst.n(), 10);
        assert_eq!(inst.s, PAPER_S.to_vec());
        assert_eq!(inst.s[4], 2.025);
        assert_eq!(inst.p_v[4], 8.1);
        assert_eq!(inst.spec().m(), 30);
        assert_eq!(inst.spec().n(), 20);
    }

    #[test]
    fn paper_optimum_is_feasible() {
        let inst = build_paper_instance();
        let r = inst.reference().unwrap();
        assert!(r.x_star.rows(10, 10).iter().all(|&q| q == 0.0));
        let (g, _) = inst.spec().eval_constraints(&r.x_star).unwrap();
        assert!(g.iter().all(|&v| v <= 1e-12));
        assert!((r.scale() - 15.846).abs() < 1e-3);
    }

    #[test]
    fn constraint_ordering() {
        let inst = PowerFlowInstance::new(vec![1.0, 2.0], vec![3.0, 5.0]).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 0.5, -1.0]);
        let (g, _) = inst.spec().eval_constraints(&x).unwrap();
        let expect = [1.25 - 1.0, 5.0 - 2.0, -1.0, -2.0, 1.0 - 3.0, 2.0 - 5.0];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_start_has_exact_distance() {
        let r = build_paper_instance().reference().unwrap();
        for (seed, d0) in [(0, 1.5), (1, 80.0), (2, 160.0), (3, 0.01)] {
            let (x0, l0) = sample_initial(&r, d0, seed).unwrap();
            assert!(l0.iter().all(|&v| v >= 0.0));
            let d = distance_to(&r, &x0, &l0);
            assert!((d - d0).abs() <= 1e-9 * d0, "{d} vs {d0}");
            assert_eq!(sample_initial(&r, d0, seed).unwrap(), (x0, l0));
        }
        assert!(sample_initial(&r, 0.0, 0).is_err());
    }

    #[test]
    fn plan_validation() {
        assert!(ExperimentPlan::default().validate().is_ok());
        for bad in [vec![1.0, 1.0], vec![-1.0], vec![]] {
            let p = ExperimentPlan {
                d0_multipliers: bad,
                ..ExperimentPlan::default()
            };
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn run_seeds_are_distinct() {
        let p = ExperimentPlan::default();
        let mut seeds: Vec<u64> = (0..3)
            .flat_map(|c| (0..10).map(move |s| (c, s)))
            .map(|(c, s)| p.run_seed(c, s))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 30);
    }

    #[test]
    fn rates_of_geometric_curve() {
        let d: Vec<f64> = (0..=100).map(|k| 0.5f64.powi(k)).collect();
        let (e, l) = phase_rates(&d);
        assert!((e - 0.5).abs() < 1e-12 && (l - 0.5).abs() < 1e-12);
        let r = RunRecord {
            d0_multiplier: 1.0,
            case: 0,
            seed_index: 0,
            seed: 0,
            status: RunStatus::Converged,
            iters: 4,
            final_kkt: 0.0,
            final_x: DVector::zeros(1),
            final_lambda: DVector::zeros(1),
            norm_dist: vec![1.0, 2.0, 1.5, 1.5, 1.0],
            early_rate: 0.0,
            late_rate: 0.0,
        };
        assert_eq!(r.monotone_from(), 1);
    }

    #[test]
    fn small_experiment_converges() {
        let plan = ExperimentPlan {
            d0_multipliers: vec![0.1],
            seeds_per_case: 2,
            ..ExperimentPlan::default()
        };
        let report = run_experiment(&plan).unwrap();
        assert_eq!(report.runs.len(), 2);
        assert!(report.all_converged());
        let mut a = Vec::new();
        report.write_summary(&mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        assert!(
            text.starts_with("d0_multiplier,seed,iters,final_kkt,early_rate,late_rate,status\n")
        );
    }
}
