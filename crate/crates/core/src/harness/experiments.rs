//! The studies: single-stage residual decay, the iteration-count matrix and
//! fixed versus adaptive stepping.

use crate::acceleration::Accelerator;
use crate::coupling::{gauss_seidel_stage_trace, CouplingConfig, InterfaceVector, Subsolver};
use crate::error::{FsiError, Result};
use crate::integrator::RunRecord;
use crate::linalg::norm2;
use crate::predictors::Predictor;
use crate::time::{SdirkTableau, StageContext};

use super::config::ExperimentConfig;
use super::problem;

/// `{accelerator}-{predictor}`, e.g. `aitken-linear`.
pub fn method_name(accelerator: Accelerator, predictor: Predictor) -> String {
    format!("{accelerator}-{predictor}")
}

/// Relative max-norm distance of `field` from `reference`.
pub fn relative_error(field: &[f64], reference: &[f64]) -> Result<f64> {
    if field.len() != reference.len() {
        return Err(FsiError::Dimension { expected: reference.len(), got: field.len() });
    }
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = field.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / scale)
}

/// Tight-tolerance run without acceleration.
pub fn reference_run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let sim = problem::simulation(cfg, cfg.reference_tol, Accelerator::None, Predictor::None);
    problem::run(cfg, &sim)
}

/// Final structure field of [`reference_run`].
pub fn reference_solution(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(reference_run(cfg)?.structure_field)
}

/// Final field of the reference run, or `None` when that run itself does
/// not finish (for instance with a tiny iteration limit). Configuration
/// errors still propagate.
pub fn optional_reference(cfg: &ExperimentConfig) -> Result<Option<Vec<f64>>> {
    match reference_solution(cfg) {
        Ok(r) => Ok(Some(r)),
        Err(e @ (FsiError::Config(_) | FsiError::Parse { .. })) => Err(e),
        Err(_) => Ok(None),
    }
}

/// Linear interpolation of an interface trace at time `t`.
fn interpolate(trace: &[(f64, Vec<f64>)], t: f64) -> Result<Vec<f64>> {
    let (first, last) = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(FsiError::Contract("empty reference trace".into())),
    };
    if t < first.0 || t > last.0 * (1.0 + 1e-12) {
        return Err(FsiError::Contract(format!("time {t} outside the reference trace")));
    }
    let k = trace.partition_point(|(s, _)| *s < t);
    if k == 0 {
        return Ok(first.1.clone());
    }
    if k == trace.len() {
        return Ok(last.1.clone());
    }
    let (t0, a) = &trace[k - 1];
    let (t1, b) = &trace[k];
    let w = (t - t0) / (t1 - t0);
    Ok(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
}

/// Largest interface temperature error over the accepted time points of
/// `trace`, relative to the largest reference temperature.
pub fn trajectory_error(trace: &[(f64, Vec<f64>)], reference: &[(f64, Vec<f64>)]) -> Result<f64> {
    let scale = reference.iter().flat_map(|(_, v)| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut err = 0.0f64;
    for (t, v) in trace {
        let r = interpolate(reference, *t)?;
        for (a, b) in v.iter().zip(&r) {
            err = err.max((a - b).abs());
        }
    }
    Ok(err / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageCurve {
    pub dt: f64,
    pub method: Accelerator,
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

/// Residual decay in the first stage of the first step, for every
/// accelerator and step size of the study. Each curve runs until the
/// residual norm drops to the study's target.
pub fn run_stage_study(cfg: &ExperimentConfig) -> Result<Vec<StageCurve>> {
    cfg.validate()?;
    let st = &cfg.stage_study;
    let fluid = crate::fluid::FluidSurrogateConfig { stiffness: st.stiffness, ..cfg.fluid };
    let tableau = SdirkTableau::sdirk2();
    let mut curves = Vec::new();
    for &dt in &st.dts {
        for &method in &cfg.accelerators {
            let mut p = problem::build(&cfg.structure, &fluid)?;
            let theta0 = p.structure.interface_temperature();
            // relative threshold that equals the absolute target
            let tol = 5.0 * st.residual_target / norm2(&theta0);
            let coupling = CouplingConfig {
                max_iterations: st.max_iterations,
                window: cfg.window,
                ..CouplingConfig::new(tol).with_accelerator(method)
            };
            let ctx = StageContext::new(&tableau, 1, 0.0, dt, None, coupling.inner_tol())?;
            p.fluid.begin_stage(&tableau, &ctx)?;
            p.structure.begin_stage(&tableau, &ctx)?;
            let guess = InterfaceVector::new(p.structure.starting_interface()?)?;
            let trace = gauss_seidel_stage_trace(&mut p.fluid, &mut p.structure, &ctx, &guess, &coupling)?;
            curves.push(StageCurve {
                dt,
                method,
                converged: trace.theta.is_some(),
                residual_norms: trace.residual_norms,
            });
        }
    }
    Ok(curves)
}

/// One cell of the iteration-count matrix; counts are `None` for runs that
/// did not finish.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub method: String,
    pub tol: f64,
    pub total_iterations: Option<usize>,
    pub steps: Option<usize>,
    pub rejections: Option<usize>,
    pub end_error: Option<f64>,
}

impl MatrixRow {
    pub fn is_dnf(&self) -> bool {
        self.total_iterations.is_none()
    }

    pub fn from_record(method: String, tol: f64, rec: &RunRecord, reference: Option<&[f64]>) -> Result<Self> {
        let end_error = reference.map(|r| relative_error(&rec.structure_field, r)).transpose()?;
        Ok(Self {
            method,
            tol,
            total_iterations: Some(rec.total_iterations()),
            steps: Some(rec.accepted_steps()),
            rejections: Some(rec.rejections()),
            end_error,
        })
    }

    pub fn dnf(method: String, tol: f64) -> Self {
        Self { method, tol, total_iterations: None, steps: None, rejections: None, end_error: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixCell {
    pub tol: f64,
    pub accelerator: Accelerator,
    pub predictor: Predictor,
}

/// Cells in report order: tolerances descending, then predictors, then
/// accelerators.
pub fn matrix_cells(cfg: &ExperimentConfig) -> Vec<MatrixCell> {
    let mut cells = Vec::new();
    for tol in cfg.sorted_tols() {
        for &predictor in &cfg.predictors {
            for &accelerator in &cfg.accelerators {
                cells.push(MatrixCell { tol, accelerator, predictor });
            }
        }
    }
    cells
}

/// Runs one cell. Failures of the run itself become DNF rows.
pub fn run_cell(cfg: &ExperimentConfig, cell: MatrixCell, reference: Option<&[f64]>) -> Result<(MatrixRow, Option<RunRecord>)> {
    let name = method_name(cell.accelerator, cell.predictor);
    let sim = problem::simulation(cfg, cell.tol, cell.accelerator, cell.predictor);
    match problem::run(cfg, &sim) {
        Ok(rec) => Ok((MatrixRow::from_record(name, cell.tol, &rec, reference)?, Some(rec))),
        Err(FsiError::Config(m)) => Err(FsiError::Config(m)),
        Err(_) => Ok((MatrixRow::dnf(name, cell.tol), None)),
    }
}

/// Sequential iteration-count matrix.
pub fn run_iteration_count_matrix(cfg: &ExperimentConfig) -> Result<Vec<MatrixRow>> {
    cfg.validate()?;
    let reference = optional_reference(cfg)?;
    matrix_cells(cfg).into_iter().map(|c| run_cell(cfg, c, reference.as_deref()).map(|r| r.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedVsAdaptiveRow {
    pub tol: f64,
    pub adaptive_iterations: usize,
    pub adaptive_steps: usize,
    pub adaptive_error: f64,
    pub fixed_dt: f64,
    pub fixed_steps: usize,
    pub fixed_iterations: usize,
    pub fixed_error: f64,
}

impl FixedVsAdaptiveRow {
    /// Fixed-step iterations per adaptive iteration.
    pub fn ratio(&self) -> f64 {
        self.fixed_iterations as f64 / self.adaptive_iterations as f64
    }
}

/// Largest number of fixed steps tried when matching accuracy.
pub const MAX_FIXED_STEPS: usize = 1 << 16;

fn fixed_run(cfg: &ExperimentConfig, tol: f64, steps: usize, reference: &[(f64, Vec<f64>)]) -> Result<(RunRecord, f64)> {
    let mut sim = problem::simulation(cfg, tol, Accelerator::None, Predictor::None).fixed();
    sim.dt0 = cfg.end_time / steps as f64;
    let rec = problem::run(cfg, &sim)?;
    let err = trajectory_error(&rec.interface_trace, reference)?;
    Ok((rec, err))
}

/// Compares each adaptive run with the coarsest fixed step (`T/n`, smallest
/// `n` found by doubling and bisection) whose global error is within a
/// factor two of the adaptive run's error. The global error is the largest
/// interface temperature deviation from the reference run over the run's
/// time points, so the start-up transient counts as much as the end state.
pub fn run_fixed_vs_adaptive(cfg: &ExperimentConfig) -> Result<Vec<FixedVsAdaptiveRow>> {
    cfg.validate()?;
    let reference = reference_run(cfg)?.interface_trace;
    let mut rows = Vec::new();
    for tol in cfg.sorted_fixed_tols() {
        let sim = problem::simulation(cfg, tol, Accelerator::None, Predictor::None);
        let adaptive = problem::run(cfg, &sim)?;
        let adaptive_error = trajectory_error(&adaptive.interface_trace, &reference)?;
        let target = 2.0 * adaptive_error;
        let mut hi = 1;
        let mut hi_run = fixed_run(cfg, tol, hi, &reference)?;
        while hi_run.1 > target {
            if hi >= MAX_FIXED_STEPS {
                return Err(FsiError::Contract(format!(
                    "no fixed step size up to {MAX_FIXED_STEPS} steps matches error {adaptive_error:e}"
                )));
            }
            hi *= 2;
            hi_run = fixed_run(cfg, tol, hi, &reference)?;
        }
        // bisect to within 2% of the step count; a finer match would not
        // change the ratio beyond that
        let mut lo = hi / 2;
        while hi - lo > (hi / 50).max(1) {
            let mid = (lo + hi) / 2;
            let r = fixed_run(cfg, tol, mid, &reference)?;
            if r.1 <= target {
                hi = mid;
                hi_run = r;
            } else {
                lo = mid;
            }
        }
        let (fixed, fixed_error) = hi_run;
        rows.push(FixedVsAdaptiveRow {
            tol,
            adaptive_iterations: adaptive.total_iterations(),
            adaptive_steps: adaptive.accepted_steps(),
            adaptive_error,
            fixed_dt: cfg.end_time / hi as f64,
            fixed_steps: fixed.accepted_steps(),
            fixed_iterations: fixed.total_iterations(),
            fixed_error,
        });
    }
    Ok(rows)
}
