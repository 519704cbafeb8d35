use tfsi_core::harness::config::ExperimentConfig;
use tfsi_core::harness::experiments::{self, MatrixRow};
use tfsi_core::harness::output;
use tfsi_core::harness::problem;
use tfsi_core::{Accelerator, Predictor};

fn short() -> ExperimentConfig {
    ExperimentConfig { end_time: 20.0, tols: vec![1e-2, 1e-3], ..ExperimentConfig::default() }
}

#[test]
fn totals_are_sums_of_stage_counts() {
    let cfg = short();
    let rec = problem::run(&cfg, &problem::simulation(&cfg, 1e-3, Accelerator::Mpe, Predictor::Linear)).unwrap();
    let by_stage: usize = rec.steps.iter().flat_map(|s| s.stages.iter()).map(|s| s.iterations).sum();
    assert_eq!(rec.total_iterations(), by_stage);
    for stage in rec.steps.iter().flat_map(|s| s.stages.iter()) {
        assert_eq!(stage.iterations, stage.residual_norms.len());
    }
}

#[test]
fn matrix_cells_are_reproducible_from_records() {
    let cfg = ExperimentConfig { predictors: vec![Predictor::None], ..short() };
    let reference = experiments::reference_solution(&cfg).unwrap();
    for cell in experiments::matrix_cells(&cfg) {
        let (row, rec) = experiments::run_cell(&cfg, cell, Some(&reference)).unwrap();
        let rec = rec.expect("cell finished");
        let rebuilt = MatrixRow::from_record(row.method.clone(), row.tol, &rec, Some(&reference)).unwrap();
        assert_eq!(row, rebuilt);
    }
}

#[test]
fn larger_iteration_limit_leaves_totals_unchanged() {
    let cfg = short();
    let loose = ExperimentConfig { max_iterations: 200, ..short() };
    for accel in Accelerator::ALL {
        let a = problem::run(&cfg, &problem::simulation(&cfg, 1e-3, accel, Predictor::None)).unwrap();
        let b = problem::run(&loose, &problem::simulation(&loose, 1e-3, accel, Predictor::None)).unwrap();
        assert_eq!(a.total_iterations(), b.total_iterations(), "{accel}");
    }
}

#[test]
fn linear_predictor_saves_iterations() {
    let cfg = ExperimentConfig::default();
    let total = |p| problem::run(&cfg, &problem::simulation(&cfg, 1e-4, Accelerator::None, p)).unwrap().total_iterations();
    assert!(total(Predictor::Linear) < total(Predictor::None));
}

#[test]
fn adaptive_steps_grow_after_startup() {
    let cfg = ExperimentConfig::default();
    for tol in [1e-2, 1e-3, 1e-4] {
        let dts = problem::run(&cfg, &problem::simulation(&cfg, tol, Accelerator::None, Predictor::None))
            .unwrap()
            .accepted_dts();
        // the first step is the start-up guess, the last one is cut to hit
        // the end time
        let interior = &dts[1..dts.len() - 1];
        let drops = interior.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(drops <= 1, "tol {tol}: {dts:?}");
        assert!(dts[dts.len() - 2] > 100.0 * dts[0]);
    }
}

#[test]
fn adaptive_run_needs_fewer_steps_than_fixed_initial_step() {
    let cfg = short();
    let sim = problem::simulation(&cfg, 1e-3, Accelerator::None, Predictor::None);
    let adaptive = problem::run(&cfg, &sim).unwrap();
    let fixed = problem::run(&cfg, &sim.clone().fixed()).unwrap();
    assert!(adaptive.accepted_steps() <= fixed.accepted_steps());
    assert_eq!(fixed.accepted_steps(), (cfg.end_time / cfg.dt0).round() as usize);
}

#[test]
fn stage_study_curves() {
    let cfg = ExperimentConfig::default();
    let curves = experiments::run_stage_study(&cfg).unwrap();
    assert_eq!(curves.len(), cfg.stage_study.dts.len() * cfg.accelerators.len());
    for c in &curves {
        assert!(c.converged, "{} at dt={}", c.method, c.dt);
        let target = cfg.stage_study.residual_target;
        let (last, before) = c.residual_norms.split_last().unwrap();
        // the curve stops at the first norm below the target
        assert!(*last <= target * (1.0 + 1e-9));
        assert!(before.iter().all(|r| *r > target));
        if c.method == Accelerator::None {
            assert!(c.residual_norms.windows(2).all(|w| w[1] < w[0]), "{:?}", c.residual_norms);
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let cfg = ExperimentConfig { predictors: vec![Predictor::Quadratic], ..short() };
    let a = output::matrix_csv_string(&experiments::run_iteration_count_matrix(&cfg).unwrap()).unwrap();
    let b = output::matrix_csv_string(&experiments::run_iteration_count_matrix(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(output::parse_matrix_csv(&a).unwrap().len(), 8);
}

#[test]
fn matrix_and_summary_files() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![MatrixRow::dnf("none-none".into(), 1e-3)];
    output::write_file(dir.path(), "m.csv", output::matrix_csv_string(&rows).unwrap().as_bytes()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(text, "method,tol,total_iterations,steps,rejections,end_error\nnone-none,1e-3,DNF,,,\n");
    assert!(output::matrix_summary(&rows).contains("DNF"));
}

#[test]
fn unwritable_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, b"x").unwrap();
    let err = output::write_file(&file.join("sub"), "a.csv", b"").unwrap_err();
    assert!(matches!(err, tfsi_core::FsiError::Io(_)));
}
