//! Partitioned adaptive SDIRK2 driver: runs the coupled stage iterations,
//! estimates the local error and steers the step size.

use crate::coupling::{check_roles, gauss_seidel_stage_solve, CouplingConfig, InterfaceVector, Subsolver};
use crate::error::{FsiError, Result};
use crate::predictors::TimeHistory;
use crate::time::{aggregate_error, SdirkTableau, StageContext, StepController};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub end_time: f64,
    pub dt0: f64,
    pub coupling: CouplingConfig,
    /// Error-controlled step sizes; otherwise every step uses `dt0`.
    pub adaptive: bool,
    pub controller: StepController,
    /// Upper bound on step attempts, accepted or not.
    pub max_attempts: usize,
}

impl SimulationConfig {
    pub fn new(end_time: f64, dt0: f64, tol: f64) -> Self {
        Self {
            end_time,
            dt0,
            coupling: CouplingConfig::new(tol),
            adaptive: true,
            controller: StepController::new(tol),
            max_attempts: 1_000_000,
        }
    }

    pub fn fixed(mut self) -> Self {
        self.adaptive = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return Err(FsiError::Config(format!("end time must be positive, got {}", self.end_time)));
        }
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return Err(FsiError::Config(format!("initial step must be positive, got {}", self.dt0)));
        }
        self.coupling.validate()?;
        self.controller.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub stages: Vec<StageLog>,
    /// `None` when a stage failed to converge.
    pub error_estimate: Option<f64>,
}

impl StepLog {
    pub fn iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub steps: Vec<StepLog>,
    pub final_time: f64,
    pub structure_field: Vec<f64>,
    pub fluid_field: Vec<f64>,
    /// Interface temperature after every accepted step, starting at `t = 0`.
    pub interface_trace: Vec<(f64, Vec<f64>)>,
}

impl RunRecord {
    /// Fixed-point iterations over all attempts, rejected ones included.
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(StepLog::iterations).sum()
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.accepted).count()
    }

    pub fn rejections(&self) -> usize {
        self.steps.iter().filter(|s| !s.accepted).count()
    }

    pub fn accepted_dts(&self) -> Vec<f64> {
        self.steps.iter().filter(|s| s.accepted).map(|s| s.dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub error_estimate: Option<f64>,
    pub dt_next: f64,
    pub log: StepLog,
}

/// Coupled problem: Dirichlet-side `fluid` and Neumann-side `structure`.
#[derive(Debug, Clone)]
pub struct Coupled<F: Subsolver, S: Subsolver> {
    pub fluid: F,
    pub structure: S,
    tableau: SdirkTableau,
    history: TimeHistory,
    t: f64,
    dt_prev: Option<f64>,
}

impl<F: Subsolver, S: Subsolver> Coupled<F, S> {
    pub fn new(fluid: F, structure: S) -> Result<Self> {
        check_roles(&fluid, &structure)?;
        let theta0 = structure.interface_temperature();
        Ok(Self {
            fluid,
            structure,
            tableau: SdirkTableau::sdirk2(),
            history: TimeHistory::cold(theta0, 0.0),
            t: 0.0,
            dt_prev: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dt_prev(&self) -> Option<f64> {
        self.dt_prev
    }

    pub fn history(&self) -> &TimeHistory {
        &self.history
    }

    fn stage_guess(&self, ctx: &StageContext, cfg: &SimulationConfig) -> Result<InterfaceVector> {
        let start = self.structure.starting_interface()?;
        let predicted = cfg.coupling.predictor.predict(ctx.stage, &self.history, ctx.c1)?;
        match predicted.map(InterfaceVector::new) {
            Some(Ok(p)) => Ok(p),
            _ => InterfaceVector::new(start),
        }
    }

    /// Rolls both subsolvers and the predictor history back to the start
    /// of the current attempt.
    fn discard(&mut self, history: TimeHistory) -> Result<()> {
        self.history = history;
        self.fluid.restore()?;
        self.structure.restore()
    }

    /// One SDIRK2 step attempt of size `dt` from the current time. Rejected
    /// attempts leave both subsolvers in their state at entry.
    pub fn step(&mut self, dt: f64, cfg: &SimulationConfig) -> Result<StepOutcome> {
        if !(dt >= cfg.controller.dt_min) {
            return Err(FsiError::StepTooSmall { t: self.t, dt, dt_min: cfg.controller.dt_min });
        }
        self.fluid.backup();
        self.structure.backup();
        let history = self.history.clone();
        self.history.start_step(dt);
        let mut log = StepLog { t: self.t, dt, accepted: false, stages: Vec::with_capacity(2), error_estimate: None };
        for stage in 1..=2 {
            let ctx = StageContext::new(&self.tableau, stage, self.t, dt, self.dt_prev, cfg.coupling.inner_tol())?;
            self.fluid.begin_stage(&self.tableau, &ctx)?;
            self.structure.begin_stage(&self.tableau, &ctx)?;
            let guess = self.stage_guess(&ctx, cfg)?;
            match gauss_seidel_stage_solve(&mut self.fluid, &mut self.structure, &ctx, &guess, &cfg.coupling) {
                Ok(sol) => {
                    log.stages.push(StageLog { iterations: sol.iterations, residual_norms: sol.residual_norms });
                    self.fluid.finish_stage(&ctx)?;
                    self.structure.finish_stage(&ctx)?;
                    if stage == 1 {
                        self.history.theta_stage1 = Some(sol.theta.into_inner());
                    }
                }
                Err(FsiError::NonConvergence { iterations, .. }) => {
                    log.stages.push(StageLog { iterations, residual_norms: Vec::new() });
                    return self.reject_failed(dt, log, history);
                }
                Err(FsiError::SubsolverFailure { .. }) => {
                    let iterations = 0;
                    log.stages.push(StageLog { iterations, residual_norms: Vec::new() });
                    return self.reject_failed(dt, log, history);
                }
                Err(e) => {
                    self.discard(history)?;
                    return Err(e);
                }
            }
        }
        let est = aggregate_error(
            self.fluid.local_error(&self.tableau, dt)?,
            self.structure.local_error(&self.tableau, dt)?,
        )?;
        log.error_estimate = Some(est);
        let (accepted, dt_next) = if cfg.adaptive {
            (est <= cfg.controller.tol, cfg.controller.next_step_size(est, dt))
        } else {
            (true, cfg.dt0)
        };
        log.accepted = accepted;
        if accepted {
            self.fluid.accept_step()?;
            self.structure.accept_step()?;
            self.t += dt;
            self.dt_prev = Some(dt);
            self.history.advance(self.structure.interface_temperature());
        } else {
            self.discard(history)?;
        }
        Ok(StepOutcome { accepted, error_estimate: Some(est), dt_next, log })
    }

    fn reject_failed(&mut self, dt: f64, log: StepLog, history: TimeHistory) -> Result<StepOutcome> {
        self.discard(history)?;
        Ok(StepOutcome { accepted: false, error_estimate: None, dt_next: 0.5 * dt, log })
    }

    /// Integrates up to `cfg.end_time`.
    pub fn run(&mut self, cfg: &SimulationConfig) -> Result<RunRecord> {
        cfg.validate()?;
        let mut rec = RunRecord {
            interface_trace: vec![(self.t, self.structure.interface_temperature())],
            ..Default::default()
        };
        let end = cfg.end_time;
        let eps = 1e-12 * end;
        let mut dt = cfg.dt0;
        let mut attempts = 0;
        while self.t < end - eps {
            attempts += 1;
            if attempts > cfg.max_attempts {
                return Err(FsiError::Contract(format!("exceeded {} step attempts", cfg.max_attempts)));
            }
            let remaining = end - self.t;
            let mut h = dt.min(cfg.controller.dt_max);
            // avoid a sliver step at the end
            if h >= remaining || remaining - h < 1e-6 * h {
                h = remaining;
            }
            let out = self.step(h, cfg)?;
            rec.steps.push(out.log);
            if out.accepted {
                rec.interface_trace.push((self.t, self.structure.interface_temperature()));
            }
            dt = out.dt_next;
        }
        rec.final_time = self.t;
        rec.structure_field = self.structure.field().to_vec();
        rec.fluid_field = self.fluid.field().to_vec();
        Ok(rec)
    }
}
