//! SDIRK2 building blocks shared by the master loop and the subsolvers.

use crate::error::{FsiError, Result};

/// Two-stage, stiffly accurate SDIRK method of order 2 with an embedded
/// first-order companion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdirkTableau {
    /// Diagonal coefficient `a_ii`.
    pub alpha: f64,
    pub c: [f64; 2],
    pub a21: f64,
    pub b: [f64; 2],
    pub b_hat: [f64; 2],
}

impl SdirkTableau {
    pub fn sdirk2() -> Self {
        let alpha = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        let alpha_hat = 2.0 - 1.25 * std::f64::consts::SQRT_2;
        Self {
            alpha,
            c: [alpha, 1.0],
            a21: 1.0 - alpha,
            b: [1.0 - alpha, alpha],
            b_hat: [1.0 - alpha_hat, alpha_hat],
        }
    }

    /// Coefficient `a_ij` of the Butcher matrix, 1-based like the stages.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (1, 1) | (2, 2) => self.alpha,
            (2, 1) => self.a21,
            _ => 0.0,
        }
    }

    pub fn c1(&self) -> f64 {
        self.c[0]
    }

    pub fn is_stiffly_accurate(&self) -> bool {
        self.b[0] == self.a(2, 1) && self.b[1] == self.a(2, 2)
    }

    /// Stability function `R(z)` of the method.
    pub fn stability(&self, z: f64) -> f64 {
        let a = self.alpha;
        (1.0 + z * (1.0 - 2.0 * a) + z * z * (a * a - 2.0 * a + 0.5)) / (1.0 - a * z).powi(2)
    }
}

impl Default for SdirkTableau {
    fn default() -> Self {
        Self::sdirk2()
    }
}

/// Everything a subsolver needs to set up one stage system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageContext {
    /// 1 or 2.
    pub stage: usize,
    pub t_n: f64,
    pub t_stage: f64,
    pub dt: f64,
    /// Previous accepted step size, if any.
    pub dt_prev: Option<f64>,
    pub a_ii: f64,
    pub c1: f64,
    /// Inner (subsolver) relative tolerance.
    pub inner_tol: f64,
}

impl StageContext {
    pub fn new(
        tableau: &SdirkTableau,
        stage: usize,
        t_n: f64,
        dt: f64,
        dt_prev: Option<f64>,
        inner_tol: f64,
    ) -> Result<Self> {
        if !(1..=2).contains(&stage) {
            return Err(FsiError::Sequencing(format!("invalid stage index {stage}")));
        }
        if !(dt > 0.0) {
            return Err(FsiError::Contract(format!("step size must be positive, got {dt}")));
        }
        Ok(Self {
            stage,
            t_n,
            t_stage: t_n + tableau.c[stage - 1] * dt,
            dt,
            dt_prev,
            a_ii: tableau.alpha,
            c1: tableau.c1(),
            inner_tol,
        })
    }

    /// `dt * a_ii`, the effective backward Euler step of the stage.
    pub fn implicit_step(&self) -> f64 {
        self.dt * self.a_ii
    }
}

/// Starting vector `s_i = u_n + dt * sum_{j<i} a_ij k_j`.
pub fn starting_vector(
    u_n: &[f64],
    stage_derivatives: &[Vec<f64>],
    tableau: &SdirkTableau,
    stage: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    if !(1..=2).contains(&stage) {
        return Err(FsiError::Sequencing(format!("invalid stage index {stage}")));
    }
    if stage_derivatives.len() < stage - 1 {
        return Err(FsiError::Sequencing(format!(
            "stage {stage} needs {} stored stage derivative(s), found {}",
            stage - 1,
            stage_derivatives.len()
        )));
    }
    let mut s = u_n.to_vec();
    for (j, k) in stage_derivatives.iter().take(stage - 1).enumerate() {
        if k.len() != s.len() {
            return Err(FsiError::Dimension { expected: s.len(), got: k.len() });
        }
        let w = dt * tableau.a(stage, j + 1);
        for (si, ki) in s.iter_mut().zip(k) {
            *si += w * ki;
        }
    }
    Ok(s)
}

/// Scaled RMS norm used for local error estimates: each component is
/// weighted by `1 / (1 + |y_i|)`, i.e. atol = rtol = TOL once compared
/// against TOL.
pub fn scaled_rms(err: &[f64], y: &[f64]) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let s: f64 = err.iter().zip(y).map(|(e, yi)| (e / (1.0 + yi.abs())).powi(2)).sum();
    (s / err.len() as f64).sqrt()
}

/// Per-subsolver Runge-Kutta bookkeeping: solution at `t_n`, the current
/// starting vector, stage values and derivatives, and a backup for step
/// rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct RkState {
    u: Vec<f64>,
    start: Option<Vec<f64>>,
    stage_values: [Option<Vec<f64>>; 2],
    derivatives: [Option<Vec<f64>>; 2],
    backup: Option<Vec<f64>>,
}

impl RkState {
    pub fn new(u0: Vec<f64>) -> Self {
        Self { u: u0, start: None, stage_values: [None, None], derivatives: [None, None], backup: None }
    }

    /// Solution at the last accepted time.
    pub fn solution(&self) -> &[f64] {
        &self.u
    }

    pub fn starting(&self) -> Result<&[f64]> {
        self.start.as_deref().ok_or_else(|| FsiError::Sequencing("no active stage".into()))
    }

    pub fn stage_value(&self, stage: usize) -> Option<&[f64]> {
        self.stage_values.get(stage.wrapping_sub(1))?.as_deref()
    }

    pub fn derivative(&self, stage: usize) -> Option<&[f64]> {
        self.derivatives.get(stage.wrapping_sub(1))?.as_deref()
    }

    /// Computes and stores the starting vector of `ctx.stage`.
    pub fn begin_stage(&mut self, tableau: &SdirkTableau, ctx: &StageContext) -> Result<&[f64]> {
        let prior: Vec<Vec<f64>> = (1..ctx.stage)
            .map(|j| {
                self.derivatives[j - 1].clone().ok_or_else(|| {
                    FsiError::Sequencing(format!("missing stage derivative k{j}"))
                })
            })
            .collect::<Result<_>>()?;
        let s = starting_vector(&self.u, &prior, tableau, ctx.stage, ctx.dt)?;
        if ctx.stage == 1 {
            self.stage_values = [None, None];
            self.derivatives = [None, None];
        }
        self.start = Some(s);
        Ok(self.start.as_deref().unwrap())
    }

    /// Records the converged stage value and its derivative
    /// `k_i = (u_i - s_i) / (dt a_ii)`.
    pub fn finish_stage(&mut self, ctx: &StageContext, value: Vec<f64>) -> Result<()> {
        let s = self.starting()?;
        if s.len() != value.len() {
            return Err(FsiError::Dimension { expected: s.len(), got: value.len() });
        }
        let h = ctx.implicit_step();
        let k = value.iter().zip(s).map(|(u, s)| (u - s) / h).collect();
        self.derivatives[ctx.stage - 1] = Some(k);
        self.stage_values[ctx.stage - 1] = Some(value);
        Ok(())
    }

    /// Scaled norm of `dt * sum_j (b_j - b_hat_j) k_j`.
    pub fn local_error(&self, tableau: &SdirkTableau, dt: f64) -> Result<f64> {
        let (k1, k2) = match (&self.derivatives[0], &self.derivatives[1]) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(FsiError::Sequencing("local error needs both stage derivatives".into())),
        };
        let w1 = tableau.b[0] - tableau.b_hat[0];
        let w2 = tableau.b[1] - tableau.b_hat[1];
        let err: Vec<f64> = k1.iter().zip(k2).map(|(a, b)| dt * (w1 * a + w2 * b)).collect();
        let y = self.stage_values[1].as_deref().unwrap_or(&self.u);
        Ok(scaled_rms(&err, y))
    }

    /// Makes the last stage value the new solution (stiff accuracy).
    pub fn accept(&mut self) -> Result<()> {
        let y = self.stage_values[1]
            .take()
            .ok_or_else(|| FsiError::Sequencing("accept before stage 2 finished".into()))?;
        self.u = y;
        self.start = None;
        self.stage_values = [None, None];
        self.derivatives = [None, None];
        Ok(())
    }

    pub fn backup(&mut self) {
        self.backup = Some(self.u.clone());
    }

    pub fn restore(&mut self) -> Result<()> {
        let b = self.backup.clone().ok_or_else(|| FsiError::Sequencing("no backup stored".into()))?;
        self.u = b;
        self.start = None;
        self.stage_values = [None, None];
        self.derivatives = [None, None];
        Ok(())
    }
}

/// Combines the subsolvers' local error estimates (maximum).
pub fn aggregate_error(est_fluid: f64, est_structure: f64) -> Result<f64> {
    if !(est_fluid >= 0.0) || !(est_structure >= 0.0) {
        return Err(FsiError::Contract(format!(
            "error estimates must be nonnegative, got {est_fluid} and {est_structure}"
        )));
    }
    Ok(est_fluid.max(est_structure))
}

/// Elementary I-controller with safety factor and growth limiter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepController {
    pub tol: f64,
    pub safety: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl StepController {
    pub fn new(tol: f64) -> Self {
        Self { tol, safety: 0.9, f_min: 0.2, f_max: 5.0, dt_min: 1e-12, dt_max: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && 0.0 < self.f_min
            && self.f_min < 1.0
            && 1.0 < self.f_max
            && self.safety > 0.0
            && self.safety <= 1.0
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_max;
        if ok {
            Ok(())
        } else {
            Err(FsiError::Config(format!("invalid step controller {self:?}")))
        }
    }

    /// `dt * min(f_max, max(f_min, safety * (tol/est)^(1/2)))`, clamped to
    /// `[dt_min, dt_max]`.
    pub fn next_step_size(&self, est: f64, dt: f64) -> f64 {
        let factor = if est <= 0.0 {
            self.f_max
        } else {
            (self.safety * (self.tol / est).sqrt()).clamp(self.f_min, self.f_max)
        };
        (dt * factor).clamp(self.dt_min, self.dt_max)
    }
}
