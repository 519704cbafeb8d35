//! Convergence accelerators for the interface fixed-point iteration.
//!
//! All methods work on an [`IterationHistory`] of (input, output) pairs of
//! the fixed-point map `G`: the input is the interface temperature handed to
//! the Dirichlet subsolver, the output is the interface temperature returned
//! by the Neumann subsolver. The residual of pair `j` is `output_j - input_j`.
//! For a plain (unaccelerated) iteration the inputs are the previous outputs,
//! so the residuals are differences of consecutive iterates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{FsiError, Result};
use crate::linalg::{dot, least_squares};

/// Initial Aitken relaxation factor.
pub const AITKEN_OMEGA_INIT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Accelerator {
    #[default]
    None,
    Aitken,
    Mpe,
    Rre,
}

impl Accelerator {
    pub const ALL: [Accelerator; 4] =
        [Accelerator::None, Accelerator::Aitken, Accelerator::Mpe, Accelerator::Rre];

    pub fn as_str(&self) -> &'static str {
        match self {
            Accelerator::None => "none",
            Accelerator::Aitken => "aitken",
            Accelerator::Mpe => "mpe",
            Accelerator::Rre => "rre",
        }
    }
}

impl fmt::Display for Accelerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Accelerator {
    type Err = FsiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Accelerator::None),
            "aitken" => Ok(Accelerator::Aitken),
            "mpe" => Ok(Accelerator::Mpe),
            "rre" => Ok(Accelerator::Rre),
            other => Err(FsiError::Config(format!("unknown accelerator '{other}'"))),
        }
    }
}

/// Ordered record of fixed-point evaluations within one stage solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationHistory {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    window: Option<usize>,
}

impl IterationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// History that keeps only the newest `window` pairs (at least 2).
    pub fn with_window(window: usize) -> Self {
        Self { window: Some(window.max(2)), ..Self::default() }
    }

    /// Builds the history of a plain fixed-point sequence `x_0, x_1, ...`,
    /// where `x_{j+1} = G(x_j)`.
    pub fn from_sequence(iterates: &[Vec<f64>]) -> Result<Self> {
        let mut h = Self::new();
        for w in iterates.windows(2) {
            h.push(w[0].clone(), w[1].clone())?;
        }
        Ok(h)
    }

    pub fn push(&mut self, input: Vec<f64>, output: Vec<f64>) -> Result<()> {
        if input.len() != output.len() {
            return Err(FsiError::Dimension { expected: input.len(), got: output.len() });
        }
        if let Some(first) = self.inputs.first() {
            if first.len() != input.len() {
                return Err(FsiError::Dimension { expected: first.len(), got: input.len() });
            }
        }
        self.inputs.push(input);
        self.outputs.push(output);
        if let Some(w) = self.window {
            while self.inputs.len() > w {
                self.inputs.remove(0);
                self.outputs.remove(0);
            }
        }
        Ok(())
    }

    /// Number of stored residuals.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn residual(&self, j: usize) -> Vec<f64> {
        self.outputs[j].iter().zip(&self.inputs[j]).map(|(o, i)| o - i).collect()
    }

    pub fn residuals(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.residual(j)).collect()
    }

    pub fn last_output(&self) -> Option<&Vec<f64>> {
        self.outputs.last()
    }

    fn require(&self, n: usize) -> Result<()> {
        if self.len() < n {
            return Err(FsiError::Contract(format!(
                "accelerator needs {n} residual(s), history has {}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AitkenState {
    pub omega: f64,
}

impl Default for AitkenState {
    fn default() -> Self {
        Self { omega: AITKEN_OMEGA_INIT }
    }
}

/// Aitken relaxation with the residual recursion for the relaxation factor.
///
/// With a single residual the newest output is relaxed with the current
/// factor. From two residuals on the factor is updated first:
/// `omega' = -omega * r_old . (r_new - r_old) / |r_new - r_old|^2`.
/// A vanishing residual difference leaves the output and the factor untouched.
pub fn aitken_update(
    history: &IterationHistory,
    state: AitkenState,
) -> Result<(Vec<f64>, AitkenState)> {
    history.require(1)?;
    let n = history.len();
    let input = &history.inputs[n - 1];
    let output = &history.outputs[n - 1];
    let relax = |omega: f64| -> Vec<f64> {
        output.iter().zip(input).map(|(o, i)| omega * o + (1.0 - omega) * i).collect()
    };
    if n == 1 {
        return Ok((relax(state.omega), state));
    }
    let r_old = history.residual(n - 2);
    let r_new = history.residual(n - 1);
    let diff: Vec<f64> = r_new.iter().zip(&r_old).map(|(a, b)| a - b).collect();
    let denom = dot(&diff, &diff);
    if denom == 0.0 || !denom.is_finite() {
        return Ok((output.clone(), state));
    }
    let omega = -state.omega * dot(&r_old, &diff) / denom;
    if !omega.is_finite() {
        return Ok((output.clone(), state));
    }
    Ok((relax(omega), AitkenState { omega }))
}

/// MPE coefficients `gamma_j` for the stored residuals, or `None` when the
/// normalization sum vanishes.
pub fn mpe_weights(history: &IterationHistory) -> Result<Option<Vec<f64>>> {
    history.require(1)?;
    let res = history.residuals();
    let k = res.len() - 1;
    let mut c = if k == 0 {
        Vec::new()
    } else {
        let u = DMatrix::from_fn(res[k].len(), k, |i, j| res[j][i]);
        let rhs = DVector::from_iterator(res[k].len(), res[k].iter().map(|x| -x));
        least_squares(&u, &rhs).iter().copied().collect()
    };
    c.push(1.0);
    let sum: f64 = c.iter().sum();
    let scale: f64 = c.iter().map(|x| x.abs()).sum();
    if !sum.is_finite() || sum.abs() <= 1e-14 * scale {
        return Ok(None);
    }
    Ok(Some(c.into_iter().map(|x| x / sum).collect()))
}

/// RRE coefficients: minimize `|sum_j gamma_j r_j|` subject to
/// `sum_j gamma_j = 1`, eliminating the last coefficient.
pub fn rre_weights(history: &IterationHistory) -> Result<Vec<f64>> {
    history.require(1)?;
    let res = history.residuals();
    let k = res.len() - 1;
    if k == 0 {
        return Ok(vec![1.0]);
    }
    let last = &res[k];
    let d = DMatrix::from_fn(last.len(), k, |i, j| res[j][i] - last[i]);
    let rhs = DVector::from_iterator(last.len(), last.iter().map(|x| -x));
    let mut g: Vec<f64> = least_squares(&d, &rhs).iter().copied().collect();
    let head: f64 = g.iter().sum();
    g.push(1.0 - head);
    Ok(g)
}

fn combine(history: &IterationHistory, gamma: &[f64]) -> Vec<f64> {
    let m = history.inputs[0].len();
    let mut out = vec![0.0; m];
    for (g, x) in gamma.iter().zip(&history.inputs) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o += g * xi;
        }
    }
    out
}

/// Minimal polynomial extrapolation over the stored history.
///
/// Falls back to the newest output when the coefficient normalization
/// degenerates.
pub fn mpe_extrapolate(history: &IterationHistory) -> Result<Vec<f64>> {
    match mpe_weights(history)? {
        Some(gamma) => Ok(combine(history, &gamma)),
        None => Ok(history.outputs[history.len() - 1].clone()),
    }
}

/// Reduced rank extrapolation over the stored history.
pub fn rre_extrapolate(history: &IterationHistory) -> Result<Vec<f64>> {
    let gamma = rre_weights(history)?;
    Ok(combine(history, &gamma))
}

/// Per-stage accelerator driver used by the coupling loop.
///
/// Every method returns the plain fixed-point output until its history is
/// long enough to start: Aitken relaxes from the first residual on, the
/// polynomial methods need two residuals.
#[derive(Debug, Clone)]
pub struct AcceleratorState {
    kind: Accelerator,
    aitken: AitkenState,
}

impl AcceleratorState {
    pub fn new(kind: Accelerator) -> Self {
        Self { kind, aitken: AitkenState::default() }
    }

    pub fn kind(&self) -> Accelerator {
        self.kind
    }

    pub fn next_iterate(&mut self, history: &IterationHistory) -> Result<Vec<f64>> {
        history.require(1)?;
        let raw = history.outputs[history.len() - 1].clone();
        match self.kind {
            Accelerator::None => Ok(raw),
            Accelerator::Aitken => {
                let (x, st) = aitken_update(history, self.aitken)?;
                self.aitken = st;
                Ok(x)
            }
            Accelerator::Mpe if history.len() >= 2 => mpe_extrapolate(history),
            Accelerator::Rre if history.len() >= 2 => rre_extrapolate(history),
            _ => Ok(raw),
        }
    }
}
