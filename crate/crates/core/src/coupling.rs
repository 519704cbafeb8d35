//! Dirichlet-Neumann fixed-point coupling of two subsolvers.

use std::ops::Deref;

use crate::acceleration::{Accelerator, AcceleratorState, IterationHistory};
use crate::error::{FsiError, Result};
use crate::linalg::norm2;
use crate::predictors::Predictor;
use crate::time::{SdirkTableau, StageContext};

/// Temperatures (K) at the coupling interface nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceVector(Vec<f64>);

impl InterfaceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FsiError::Contract("interface vector must not be empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(FsiError::Contract(format!(
                "interface temperatures must be finite and positive, got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

impl Deref for InterfaceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Difference of two interface iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingResidual(Vec<f64>);

impl CouplingResidual {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    /// Time-integration tolerance TOL.
    pub tol: f64,
    /// The fixed-point tolerance is `tol / divisor` relative to the initial iterate.
    pub divisor: f64,
    pub max_iterations: usize,
    pub accelerator: Accelerator,
    pub predictor: Predictor,
    /// Optional history window for MPE/RRE; `None` keeps the whole stage.
    pub window: Option<usize>,
}

impl CouplingConfig {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            divisor: 5.0,
            max_iterations: 100,
            accelerator: Accelerator::None,
            predictor: Predictor::None,
            window: None,
        }
    }

    pub fn with_accelerator(mut self, a: Accelerator) -> Self {
        self.accelerator = a;
        self
    }

    pub fn with_predictor(mut self, p: Predictor) -> Self {
        self.predictor = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(FsiError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.divisor > 0.0) {
            return Err(FsiError::Config(format!("divisor must be positive, got {}", self.divisor)));
        }
        if self.max_iterations < 2 {
            return Err(FsiError::Config("max_iterations must be at least 2".into()));
        }
        Ok(())
    }

    /// Inner tolerance handed to the subsolvers.
    pub fn inner_tol(&self) -> f64 {
        self.tol / 100.0
    }
}

/// A single-physics solver driven by the coupling master.
///
/// The Dirichlet partner maps interface temperatures to interface heat
/// fluxes (positive flux heats the Neumann partner); the Neumann partner maps
/// heat fluxes to interface temperatures.
pub trait Subsolver {
    fn name(&self) -> &str;

    fn interface_len(&self) -> usize;

    /// Smallest and largest thermal conductivity over the operating range.
    fn conductivity_range(&self) -> (f64, f64);

    /// Interface temperatures of the solution at the last accepted time.
    fn interface_temperature(&self) -> Vec<f64>;

    /// Full field unknowns at the last accepted time.
    fn field(&self) -> &[f64];

    /// Computes the starting vector for `ctx.stage`.
    fn begin_stage(&mut self, tableau: &SdirkTableau, ctx: &StageContext) -> Result<()>;

    /// Interface temperatures of the current starting vector.
    fn starting_interface(&self) -> Result<Vec<f64>>;

    /// Solves the stage system with the given interface data.
    fn solve_stage(&mut self, interface_data: &[f64], ctx: &StageContext) -> Result<Vec<f64>>;

    /// Stores the stage value and derivative of the last stage solve.
    fn finish_stage(&mut self, ctx: &StageContext) -> Result<()>;

    fn local_error(&self, tableau: &SdirkTableau, dt: f64) -> Result<f64>;

    fn accept_step(&mut self) -> Result<()>;

    fn backup(&mut self);

    fn restore(&mut self) -> Result<()>;
}

/// Rejects role assignments where the Dirichlet side does not have the
/// strictly smaller conductivity.
pub fn check_roles(dirichlet: &dyn Subsolver, neumann: &dyn Subsolver) -> Result<()> {
    let (_, d_max) = dirichlet.conductivity_range();
    let (n_min, _) = neumann.conductivity_range();
    if !(d_max < n_min) {
        return Err(FsiError::Config(format!(
            "temperature must be prescribed on the side with smaller conductivity: \
             {} has up to {d_max}, {} has down to {n_min}",
            dirichlet.name(),
            neumann.name()
        )));
    }
    if dirichlet.interface_len() != neumann.interface_len() {
        return Err(FsiError::Dimension {
            expected: neumann.interface_len(),
            got: dirichlet.interface_len(),
        });
    }
    Ok(())
}

pub fn interface_residual(theta_new: &[f64], theta_old: &[f64]) -> Result<CouplingResidual> {
    if theta_new.len() != theta_old.len() {
        return Err(FsiError::Dimension { expected: theta_old.len(), got: theta_new.len() });
    }
    Ok(CouplingResidual(theta_new.iter().zip(theta_old).map(|(a, b)| a - b).collect()))
}

/// `|r|_2 <= (tol / divisor) * |theta0|_2`.
pub fn termination_check(r: &CouplingResidual, theta0: &[f64], cfg: &CouplingConfig) -> Result<bool> {
    let scale = norm2(theta0);
    if scale == 0.0 {
        return Err(FsiError::DegenerateScaling);
    }
    Ok(r.norm() <= cfg.tol / cfg.divisor * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolve {
    pub theta: InterfaceVector,
    /// Number of Dirichlet + Neumann solve pairs.
    pub iterations: usize,
    /// `|r|_2` after each iteration.
    pub residual_norms: Vec<f64>,
}

/// Outcome of a stage iteration that keeps going until convergence or the
/// iteration limit, without treating the latter as an error.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    /// Converged interface temperature, `None` if the limit was reached.
    pub theta: Option<InterfaceVector>,
    /// `|r|_2` after each iteration.
    pub residual_norms: Vec<f64>,
}

/// Nonlinear Gauss-Seidel iteration for one stage.
///
/// Each iteration prescribes the current interface temperature on the
/// Dirichlet side, hands the resulting flux to the Neumann side and compares
/// the returned temperature with the one that was prescribed. On convergence
/// the returned temperature is the Neumann side's output, so it matches the
/// subsolver states. Otherwise the accelerator picks the next prescribed
/// temperature.
pub fn gauss_seidel_stage_solve(
    dirichlet: &mut dyn Subsolver,
    neumann: &mut dyn Subsolver,
    ctx: &StageContext,
    initial_guess: &InterfaceVector,
    cfg: &CouplingConfig,
) -> Result<StageSolve> {
    let trace = gauss_seidel_stage_trace(dirichlet, neumann, ctx, initial_guess, cfg)?;
    match trace.theta {
        Some(theta) => Ok(StageSolve { theta, iterations: trace.residual_norms.len(), residual_norms: trace.residual_norms }),
        None => Err(FsiError::NonConvergence {
            iterations: cfg.max_iterations,
            residual: trace.residual_norms.last().copied().unwrap_or(f64::NAN),
        }),
    }
}

/// Same iteration as [`gauss_seidel_stage_solve`], reporting the residual
/// history even when the iteration limit is hit.
pub fn gauss_seidel_stage_trace(
    dirichlet: &mut dyn Subsolver,
    neumann: &mut dyn Subsolver,
    ctx: &StageContext,
    initial_guess: &InterfaceVector,
    cfg: &CouplingConfig,
) -> Result<StageTrace> {
    cfg.validate()?;
    let theta0 = initial_guess.as_slice();
    if theta0.len() != neumann.interface_len() {
        return Err(FsiError::Dimension { expected: neumann.interface_len(), got: theta0.len() });
    }
    if norm2(theta0) == 0.0 {
        return Err(FsiError::DegenerateScaling);
    }
    let mut history = match cfg.window {
        Some(w) => IterationHistory::with_window(w),
        None => IterationHistory::new(),
    };
    let mut accel = AcceleratorState::new(cfg.accelerator);
    let mut x = theta0.to_vec();
    let mut norms = Vec::new();
    for _ in 0..cfg.max_iterations {
        let flux = dirichlet.solve_stage(&x, ctx)?;
        let out = neumann.solve_stage(&flux, ctx)?;
        let r = interface_residual(&out, &x)?;
        norms.push(r.norm());
        if termination_check(&r, theta0, cfg)? {
            let theta = InterfaceVector::new(out).map_err(|e| FsiError::SubsolverFailure {
                solver: neumann.name().to_string(),
                reason: e.to_string(),
            })?;
            return Ok(StageTrace { theta: Some(theta), residual_norms: norms });
        }
        history.push(x, out.clone())?;
        let next = accel.next_iterate(&history)?;
        x = if next.iter().all(|v| v.is_finite() && *v > 0.0) { next } else { out };
    }
    Ok(StageTrace { theta: None, residual_norms: norms })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Linear scalar test partners: flux = -h (T - T_inf), T = T_s + g * flux.
    struct LinDirichlet {
        h: f64,
        t_inf: f64,
        lambda: f64,
    }
    struct LinNeumann {
        base: f64,
        gain: f64,
        lambda: f64,
        field: Vec<f64>,
    }

    impl Subsolver for LinDirichlet {
        fn name(&self) -> &str {
            "lin-dirichlet"
        }
        fn interface_len(&self) -> usize {
            1
        }
        fn conductivity_range(&self) -> (f64, f64) {
            (self.lambda, self.lambda)
        }
        fn interface_temperature(&self) -> Vec<f64> {
            vec![self.t_inf]
        }
        fn field(&self) -> &[f64] {
            &[]
        }
        fn begin_stage(&mut self, _: &SdirkTableau, _: &StageContext) -> Result<()> {
            Ok(())
        }
        fn starting_interface(&self) -> Result<Vec<f64>> {
            Ok(vec![self.t_inf])
        }
        fn solve_stage(&mut self, d: &[f64], _: &StageContext) -> Result<Vec<f64>> {
            Ok(vec![-self.h * (d[0] - self.t_inf)])
        }
        fn finish_stage(&mut self, _: &StageContext) -> Result<()> {
            Ok(())
        }
        fn local_error(&self, _: &SdirkTableau, _: f64) -> Result<f64> {
            Ok(0.0)
        }
        fn accept_step(&mut self) -> Result<()> {
            Ok(())
        }
        fn backup(&mut self) {}
        fn restore(&mut self) -> Result<()> {
            Ok(())
        }
    }

    impl Subsolver for LinNeumann {
        fn name(&self) -> &str {
            "lin-neumann"
        }
        fn interface_len(&self) -> usize {
            1
        }
        fn conductivity_range(&self) -> (f64, f64) {
            (self.lambda, self.lambda)
        }
        fn interface_temperature(&self) -> Vec<f64> {
            vec![self.base]
        }
        fn field(&self) -> &[f64] {
            &self.field
        }
        fn begin_stage(&mut self, _: &SdirkTableau, _: &StageContext) -> Result<()> {
            Ok(())
        }
        fn starting_interface(&self) -> Result<Vec<f64>> {
            Ok(vec![self.base])
        }
        fn solve_stage(&mut self, q: &[f64], _: &StageContext) -> Result<Vec<f64>> {
            Ok(vec![self.base + self.gain * q[0]])
        }
        fn finish_stage(&mut self, _: &StageContext) -> Result<()> {
            Ok(())
        }
        fn local_error(&self, _: &SdirkTableau, _: f64) -> Result<f64> {
            Ok(0.0)
        }
        fn accept_step(&mut self) -> Result<()> {
            Ok(())
        }
        fn backup(&mut self) {}
        fn restore(&mut self) -> Result<()> {
            Ok(())
        }
    }

    fn ctx() -> StageContext {
        StageContext::new(&SdirkTableau::sdirk2(), 1, 0.0, 1.0, None, 1e-8).unwrap()
    }

    // contraction factor = h * gain
    fn pair(h: f64, gain: f64) -> (LinDirichlet, LinNeumann) {
        (
            LinDirichlet { h, t_inf: 300.0, lambda: 0.1 },
            LinNeumann { base: 900.0, gain, lambda: 40.0, field: vec![] },
        )
    }

    fn fixed_point(h: f64, gain: f64) -> f64 {
        // T = 900 - g h (T - 300)
        (900.0 + gain * h * 300.0) / (1.0 + gain * h)
    }

    #[test]
    fn residual_examples() {
        assert_eq!(interface_residual(&[900.0, 900.0], &[900.0, 900.0]).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(
            interface_residual(&[880.0, 890.0], &[900.0, 900.0]).unwrap().values(),
            &[-20.0, -10.0]
        );
        let a = [1.0, 5.0, -2.0];
        let b = [0.5, 7.0, 3.0];
        let ab = interface_residual(&a, &b).unwrap();
        let ba = interface_residual(&b, &a).unwrap();
        assert!(ab.values().iter().zip(ba.values()).all(|(x, y)| *x == -*y));
        assert!(matches!(interface_residual(&a, &[1.0]), Err(FsiError::Dimension { .. })));
    }

    #[test]
    fn termination_examples() {
        let cfg = CouplingConfig::new(1e-4);
        let theta0 = [10.0];
        assert!(termination_check(&CouplingResidual(vec![1e-5]), &theta0, &cfg).unwrap());
        assert!(!termination_check(&CouplingResidual(vec![3e-4]), &theta0, &cfg).unwrap());
        assert!(termination_check(&CouplingResidual(vec![0.0, 0.0]), &[1.0, 2.0], &cfg).unwrap());
        assert_eq!(
            termination_check(&CouplingResidual(vec![0.0]), &[0.0], &cfg),
            Err(FsiError::DegenerateScaling)
        );
    }

    #[test]
    fn interface_vector_invariants() {
        assert!(InterfaceVector::new(vec![]).is_err());
        assert!(InterfaceVector::new(vec![1.0, -2.0]).is_err());
        assert!(InterfaceVector::new(vec![f64::NAN]).is_err());
        assert!(InterfaceVector::new(vec![273.15]).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(CouplingConfig::new(0.0).validate().is_err());
        let mut c = CouplingConfig::new(1e-3);
        c.max_iterations = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn roles_are_checked() {
        let (d, n) = pair(1.0, 0.1);
        assert!(check_roles(&d, &n).is_ok());
        assert!(check_roles(&n, &d).is_err());
    }

    #[test]
    fn already_at_fixed_point_takes_one_iteration() {
        let (mut d, mut n) = pair(0.01, 0.5);
        let fp = fixed_point(0.01, 0.5);
        let guess = InterfaceVector::new(vec![fp]).unwrap();
        let res = gauss_seidel_stage_solve(&mut d, &mut n, &ctx(), &guess, &CouplingConfig::new(1e-4)).unwrap();
        assert_eq!(res.iterations, 1);
        assert!((res.theta[0] - fp).abs() < 1e-12);
    }

    #[test]
    fn plain_iteration_decays_monotonically() {
        let (mut d, mut n) = pair(1.0, 0.6);
        let guess = InterfaceVector::new(vec![900.0]).unwrap();
        let res = gauss_seidel_stage_solve(&mut d, &mut n, &ctx(), &guess, &CouplingConfig::new(1e-4)).unwrap();
        assert!(res.residual_norms.windows(2).all(|w| w[1] < w[0]));
        for w in res.residual_norms.windows(2) {
            assert!((w[1] / w[0] - 0.6).abs() < 1e-9);
        }
        let fp = fixed_point(1.0, 0.6);
        assert!((res.theta[0] - fp).abs() <= 1e-4 / 5.0 * 900.0 / 0.4 + 1e-9);
    }

    #[test]
    fn aitken_never_worse_at_tight_tolerance() {
        let guess = InterfaceVector::new(vec![900.0]).unwrap();
        let mut counts = Vec::new();
        for a in [Accelerator::None, Accelerator::Aitken] {
            let (mut d, mut n) = pair(1.0, 0.6);
            let cfg = CouplingConfig::new(1e-8).with_accelerator(a);
            counts.push(gauss_seidel_stage_solve(&mut d, &mut n, &ctx(), &guess, &cfg).unwrap().iterations);
        }
        assert!(counts[1] <= counts[0], "{counts:?}");
    }

    #[test]
    fn nonconvergence_is_reported() {
        // divergent: factor 1.5
        let (mut d, mut n) = pair(1.0, 1.5);
        let guess = InterfaceVector::new(vec![600.0]).unwrap();
        let mut cfg = CouplingConfig::new(1e-4);
        cfg.max_iterations = 10;
        match gauss_seidel_stage_solve(&mut d, &mut n, &ctx(), &guess, &cfg) {
            Err(FsiError::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 10);
                assert!(residual > 0.0);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn accelerators_share_first_iterations() {
        let guess = InterfaceVector::new(vec![900.0]).unwrap();
        let runs: Vec<Vec<f64>> = [Accelerator::None, Accelerator::Mpe, Accelerator::Rre]
            .into_iter()
            .map(|a| {
                let (mut d, mut n) = pair(1.0, 0.6);
                let cfg = CouplingConfig::new(1e-10).with_accelerator(a);
                gauss_seidel_stage_solve(&mut d, &mut n, &ctx(), &guess, &cfg).unwrap().residual_norms
            })
            .collect();
        for r in &runs[1..] {
            assert_eq!(r[..2], runs[0][..2]);
        }
    }
}
