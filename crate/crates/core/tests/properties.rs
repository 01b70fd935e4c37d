use augpdg::bench::sample_initial;
use augpdg::certificate::lyapunov_value;
use augpdg::lagrangian::{aug_value, grad_lambda, grad_x, project_nonneg, Penalty};
use augpdg::oracle::ReferenceSolution;
use augpdg::problem::random::{random_kkt_problem, random_problem};
use augpdg::problem::{central_difference, finite_diff_check, relative_error};
use augpdg::solver::{kkt_residual, step, IterateState, SolverConfig};
use augpdg::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_nonnegative(v in prop::collection::vec(-1e3..1e3f64, 1..20)) {
        let v = DVector::from_vec(v);
        let p = project_nonneg(&v);
        prop_assert!(p.iter().all(|&e| e >= 0.0));
        prop_assert_eq!(project_nonneg(&p), p.clone());
        for (a, b) in v.iter().zip(p.iter()) {
            prop_assert!(*b == a.max(0.0));
        }
    }

    #[test]
    fn multipliers_stay_nonnegative(seed in any::<u64>(), n in 1usize..6, m in 1usize..6, ratio in 0.01..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, n, m).unwrap().to_spec().unwrap();
        let rho = 0.5;
        let c = SolverConfig::new(ratio * rho, rho).unwrap();
        let mut s = IterateState::new(DVector::from_element(n, 2.0), DVector::from_element(m, 0.3));
        for _ in 0..200 {
            s = match step(&p, &s, &c) {
                Ok(next) => next,
                // overflow on an aggressive stepsize ends the trajectory
                Err(Error::Numeric { .. }) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(s.lambda.iter().all(|&l| l >= 0.0));
        }
    }

    #[test]
    fn constructed_pairs_are_fixed_points(seed in any::<u64>(), n in 1usize..5, extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = n + extra;
        let active = n.min(m) / 2 + 1;
        let (sp, x, l) = random_kkt_problem(&mut rng, n, m, active.min(n)).unwrap();
        let p = sp.to_spec().unwrap();
        let r = kkt_residual(&p, &x, &l, 0.3).unwrap();
        prop_assert!(r.max() < 1e-12);
        let c = SolverConfig::new(0.2, 0.3).unwrap();
        let next = step(&p, &IterateState::new(x.clone(), l.clone()), &c).unwrap();
        prop_assert!((&next.x - &x).amax() < 1e-12);
        prop_assert!((&next.lambda - &l).amax() < 1e-12);
    }

    #[test]
    fn augmented_gradients_match_differences(seed in any::<u64>(), xs in vec_strategy(3), ls in prop::collection::vec(0.0..5.0f64, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 3, 4).unwrap().to_spec().unwrap();
        let x = DVector::from_vec(xs).map(|v| v * 0.3);
        let l = DVector::from_vec(ls);
        let rho = Penalty::new(0.7).unwrap();
        let (g, _) = p.eval_constraints(&x).unwrap();
        prop_assume!((&g * 0.7 + &l).iter().all(|v| v.abs() > 1e-3));
        let gx = grad_x(&p, &x, &l, rho).unwrap();
        let gl = grad_lambda(&p, &x, &l, rho).unwrap();
        let fx = central_difference(|y| aug_value(&p, y, &l, rho).unwrap(), &x, 1e-6);
        let fl = central_difference(|y| aug_value(&p, &x, y, rho).unwrap(), &l, 1e-6);
        prop_assert!(relative_error(&gx, &fx) < 1e-5);
        prop_assert!(relative_error(&gl, &fl) < 1e-5);
    }

    #[test]
    fn oracle_gradients_match_differences(seed in any::<u64>(), xs in vec_strategy(4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 4, 3).unwrap().to_spec().unwrap();
        let report = finite_diff_check(&p, &DVector::from_vec(xs), 1e-6).unwrap();
        prop_assert!(report.max_error() < 1e-6, "{:?}", report);
    }

    #[test]
    fn sampled_starts_have_requested_distance(seed in any::<u64>(), d0 in 1e-3..1e3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sp, x, l) = random_kkt_problem(&mut rng, 3, 4, 2).unwrap();
        let r = ReferenceSolution::supplied(&sp.to_spec().unwrap(), x, l).unwrap();
        let (x0, l0) = sample_initial(&r, d0, seed).unwrap();
        prop_assert!(l0.iter().all(|&v| v >= 0.0));
        let d = ((&x0 - &r.x_star).norm_squared() + (&l0 - &r.lambda_star).norm_squared()).sqrt();
        prop_assert!((d - d0).abs() <= 1e-9 * d0);
    }

    #[test]
    fn lyapunov_value_is_sandwiched(j in prop::collection::vec(-1.0..1.0f64, 6), e in vec_strategy(5), frac in 0.0..0.99f64) {
        // lambda_min |e|^2 <= V <= lambda_max |e|^2 with extremes 1 -+ delta |J|
        let jac = DMatrix::from_vec(2, 3, j);
        let sigma = jac.clone().svd(false, false).singular_values.max();
        prop_assume!(sigma > 1e-6);
        let delta = frac / sigma;
        let e = DVector::from_vec(e);
        let zero3 = DVector::zeros(3);
        let zero2 = DVector::zeros(2);
        let x = e.rows(0, 3).into_owned();
        let l = e.rows(3, 2).into_owned();
        let v = lyapunov_value(&x, &l, &zero3, &zero2, &jac, delta).unwrap();
        let sq = e.norm_squared();
        prop_assert!(v >= (1.0 - delta * sigma) * sq - 1e-9 * (1.0 + sq));
        prop_assert!(v <= (1.0 + delta * sigma) * sq + 1e-9 * (1.0 + sq));
    }
}
