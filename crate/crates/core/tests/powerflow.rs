use std::path::PathBuf;

use augpdg::bench::{build_paper_instance, run_experiment, ExperimentPlan, RunStatus};
use augpdg::certificate::{build_certificate, CertificateOptions};
use augpdg::oracle::{grid_solve, ReferenceMethod};
use augpdg::problem::ProblemFile;
use augpdg::solver::{run, Monitor, SolverConfig, Termination};
use nalgebra::DVector;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

#[test]
fn data_file_matches_builder() {
    let file = ProblemFile::read(&data("powerflow_paper.json")).unwrap();
    let inst = build_paper_instance();
    assert_eq!(&file.to_structured().unwrap(), inst.structured());
    let reference = inst.reference().unwrap();
    let (x, l) = file.reference.unwrap().to_vectors(20, 30).unwrap();
    assert!((x - &reference.x_star).amax() < 1e-15);
    assert!((l - &reference.lambda_star).amax() < 1e-14);
}

#[test]
fn scalar_file_solves_to_grid_reference() {
    let file = ProblemFile::read(&data("scalar.json")).unwrap();
    let p = file.to_structured().unwrap().to_spec().unwrap();
    let grid = grid_solve(&p, p.operating_box().unwrap(), 101).unwrap();
    assert_eq!(grid.method, ReferenceMethod::Grid);
    assert!((grid.x_star[0] - 1.0).abs() < 1e-12);
    assert!((grid.lambda_star[0] - 2.0).abs() < 1e-9);

    let c = SolverConfig::new(0.1, 0.1).unwrap();
    let monitor = Monitor::with_reference(grid.x_star.clone(), grid.lambda_star.clone());
    let trace = run(&p, &c, &DVector::zeros(1), &DVector::zeros(1), &monitor).unwrap();
    assert_eq!(trace.outcome.termination, Termination::Converged);
    assert!((trace.outcome.final_state.x[0] - grid.x_star[0]).abs() < 1e-8);
    assert!(trace.last().dist_to_ref.unwrap() < 1e-8);
}

#[test]
fn gamma_is_nonincreasing_in_d0() {
    let inst = build_paper_instance();
    let r = inst.reference().unwrap();
    let opts = CertificateOptions::default();
    let gammas: Vec<f64> = [0.1, 1.0, 10.0, 1e3, 1e5, 1e7]
        .iter()
        .map(|m| {
            build_certificate(
                inst.spec(),
                &r.x_star,
                &r.lambda_star,
                0.1,
                m * r.scale(),
                &opts,
            )
            .unwrap()
            .gamma()
        })
        .collect();
    for w in gammas.windows(2) {
        assert!(w[1] <= w[0], "{gammas:?}");
    }
    // far enough out the pi*-dependent terms bind and gamma drops strictly
    assert!(gammas[5] < gammas[0], "{gammas:?}");
    assert!(gammas.iter().all(|g| *g > 0.0 && *g < 1.0));
}

#[test]
fn near_regime_converges_to_oracle() {
    let plan = ExperimentPlan {
        d0_multipliers: vec![0.1],
        seeds_per_case: 3,
        ..ExperimentPlan::default()
    };
    let report = run_experiment(&plan).unwrap();
    for r in &report.runs {
        assert_eq!(r.status, RunStatus::Converged);
        assert!(r.final_kkt <= 1e-8);
        assert!((&r.final_x - &report.reference.x_star).norm() < 1e-6);
        assert!(r.monotone_from() <= 100);
    }
}

#[test]
fn experiment_files_are_written() {
    let plan = ExperimentPlan {
        d0_multipliers: vec![0.1, 5.0],
        seeds_per_case: 2,
        max_iters: 500,
        ..ExperimentPlan::default()
    };
    let report = run_experiment(&plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write_all(dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    let run = std::fs::read_to_string(dir.path().join("runs/d0_0_seed_1.csv")).unwrap();
    assert!(run.starts_with("k,norm_dist\n0,"));
    let plot = std::fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
    assert!(plot.starts_with("d0_multiplier,seed_index,k,norm_dist\n"));
    let again = run_experiment(&plan).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    report.write_summary(&mut a).unwrap();
    again.write_summary(&mut b).unwrap();
    assert_eq!(a, b);
}
