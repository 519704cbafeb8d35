//! Trivial subsolvers for exercising the time integrator in isolation.

use crate::coupling::Subsolver;
use crate::error::{FsiError, Result};
use crate::time::{RkState, SdirkTableau, StageContext};

/// Offset added to `y` on the interface so that the coupling loop, which
/// expects positive temperatures, accepts sign changes of the solution.
pub const INTERFACE_SHIFT: f64 = 10.0;

/// Decoupled linear ODE `y' = rate * y` acting as the Neumann side. The
/// prescribed flux is ignored and the interface output is
/// `y + INTERFACE_SHIFT`.
#[derive(Debug, Clone)]
pub struct LinearOde {
    rate: f64,
    rk: RkState,
    current: Option<Vec<f64>>,
}

impl LinearOde {
    pub fn new(rate: f64, y0: f64) -> Self {
        Self { rate, rk: RkState::new(vec![y0]), current: None }
    }

    pub fn value(&self) -> f64 {
        self.rk.solution()[0]
    }
}

impl Subsolver for LinearOde {
    fn name(&self) -> &str {
        "linear-ode"
    }

    fn interface_len(&self) -> usize {
        1
    }

    fn conductivity_range(&self) -> (f64, f64) {
        (1.0, 1.0)
    }

    fn interface_temperature(&self) -> Vec<f64> {
        vec![self.value() + INTERFACE_SHIFT]
    }

    fn field(&self) -> &[f64] {
        self.rk.solution()
    }

    fn begin_stage(&mut self, tableau: &SdirkTableau, ctx: &StageContext) -> Result<()> {
        self.current = None;
        self.rk.begin_stage(tableau, ctx)?;
        Ok(())
    }

    fn starting_interface(&self) -> Result<Vec<f64>> {
        Ok(vec![self.rk.starting()?[0] + INTERFACE_SHIFT])
    }

    fn solve_stage(&mut self, _flux: &[f64], ctx: &StageContext) -> Result<Vec<f64>> {
        let s = self.rk.starting()?[0];
        let denom = 1.0 - ctx.implicit_step() * self.rate;
        if denom == 0.0 {
            return Err(FsiError::SubsolverFailure { solver: self.name().into(), reason: "singular stage".into() });
        }
        let y = s / denom;
        self.current = Some(vec![y]);
        Ok(vec![y + INTERFACE_SHIFT])
    }

    fn finish_stage(&mut self, ctx: &StageContext) -> Result<()> {
        let v = self.current.take().ok_or_else(|| FsiError::Sequencing("stage finished without a solve".into()))?;
        self.rk.finish_stage(ctx, v)
    }

    fn local_error(&self, tableau: &SdirkTableau, dt: f64) -> Result<f64> {
        self.rk.local_error(tableau, dt)
    }

    fn accept_step(&mut self) -> Result<()> {
        self.rk.accept()
    }

    fn backup(&mut self) {
        self.rk.backup();
    }

    fn restore(&mut self) -> Result<()> {
        self.current = None;
        self.rk.restore()
    }
}

/// Dirichlet partner with no dynamics: zero flux, zero error.
#[derive(Debug, Clone, Default)]
pub struct Passive {
    last: Vec<f64>,
}

impl Subsolver for Passive {
    fn name(&self) -> &str {
        "passive"
    }

    fn interface_len(&self) -> usize {
        1
    }

    fn conductivity_range(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn interface_temperature(&self) -> Vec<f64> {
        self.last.clone()
    }

    fn field(&self) -> &[f64] {
        &[]
    }

    fn begin_stage(&mut self, _: &SdirkTableau, _: &StageContext) -> Result<()> {
        Ok(())
    }

    fn starting_interface(&self) -> Result<Vec<f64>> {
        Ok(self.last.clone())
    }

    fn solve_stage(&mut self, interface_data: &[f64], _: &StageContext) -> Result<Vec<f64>> {
        self.last = interface_data.to_vec();
        Ok(vec![0.0; interface_data.len()])
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
