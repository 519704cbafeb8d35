//! Interface temperature predictors built from the time history.
//!
//! Every prediction is a weighted combination of stored interface vectors,
//! with weights from Lagrange interpolation through the participating time
//! nodes (taken relative to `t_n`). The weights therefore sum to one and
//! reproduce polynomials of the predictor's degree exactly.

use std::fmt;
use std::str::FromStr;

use crate::error::{FsiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Predictor {
    #[default]
    None,
    Linear,
    Quadratic,
}

impl Predictor {
    pub const ALL: [Predictor; 3] = [Predictor::None, Predictor::Linear, Predictor::Quadratic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Predictor::None => "none",
            Predictor::Linear => "linear",
            Predictor::Quadratic => "quadratic",
        }
    }

    /// Initial guess for `stage`, or `None` when the stage should start from
    /// the starting vector.
    pub fn predict(&self, stage: usize, h: &TimeHistory, c1: f64) -> Result<Option<Vec<f64>>> {
        let p = match (self, stage) {
            (Predictor::None, _) => return Ok(None),
            (Predictor::Linear, 1) => predict_stage1_linear(h, c1),
            (Predictor::Quadratic, 1) => predict_stage1_quadratic(h, c1),
            (Predictor::Linear, 2) => predict_stage2_linear(h, c1)?,
            (Predictor::Quadratic, 2) => predict_stage2_quadratic(h, c1)?,
            _ => return Err(FsiError::Sequencing(format!("invalid stage index {stage}"))),
        };
        Ok(Some(p))
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predictor {
    type Err = FsiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Predictor::None),
            "linear" | "lin" => Ok(Predictor::Linear),
            "quadratic" | "quad" => Ok(Predictor::Quadratic),
            other => Err(FsiError::Config(format!("unknown predictor '{other}'"))),
        }
    }
}

/// Interface temperatures of the last accepted steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistory {
    /// Value at `t_{n-1}`.
    pub theta_prev: Option<Vec<f64>>,
    /// Stage-1 value of the previous step, at `t_{n-1} + c1 dt_{n-1}`.
    pub theta_half_prev: Option<Vec<f64>>,
    /// Value at `t_n`.
    pub theta_n: Vec<f64>,
    pub dt_prev: Option<f64>,
    pub dt_n: f64,
    /// Converged stage-1 value of the current step.
    pub theta_stage1: Option<Vec<f64>>,
}

impl TimeHistory {
    /// History at the first time step.
    pub fn cold(theta_n: Vec<f64>, dt_n: f64) -> Self {
        Self { theta_prev: None, theta_half_prev: None, theta_n, dt_prev: None, dt_n, theta_stage1: None }
    }

    /// Shifts the history after an accepted step of size `self.dt_n`.
    pub fn advance(&mut self, theta_new: Vec<f64>) {
        let old = std::mem::replace(&mut self.theta_n, theta_new);
        self.theta_prev = Some(old);
        self.theta_half_prev = self.theta_stage1.take();
        self.dt_prev = Some(self.dt_n);
    }

    /// Prepares a new step attempt of size `dt`; stage data of earlier
    /// attempts is discarded.
    pub fn start_step(&mut self, dt: f64) {
        self.dt_n = dt;
        self.theta_stage1 = None;
    }
}

/// Lagrange basis weights of `nodes` evaluated at `t`.
pub fn lagrange_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &xj)| (t - xj) / (xi - xj))
                .product()
        })
        .collect()
}

fn combine(weights: &[f64], values: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; values[0].len()];
    for (w, v) in weights.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    out
}

/// Weights for `(theta_prev, theta_n)` at `t_n + c1 dt_n`.
pub fn stage1_linear_weights(dt_prev: f64, dt_n: f64, c1: f64) -> Vec<f64> {
    lagrange_weights(&[-dt_prev, 0.0], c1 * dt_n)
}

/// Weights for `(theta_prev, theta_half_prev, theta_n)` at `t_n + c1 dt_n`.
pub fn stage1_quadratic_weights(dt_prev: f64, dt_n: f64, c1: f64) -> Vec<f64> {
    lagrange_weights(&[-dt_prev, -dt_prev + c1 * dt_prev, 0.0], c1 * dt_n)
}

/// Weights for `(theta_n, theta_stage1)` at `t_n + dt_n`.
pub fn stage2_linear_weights(dt_n: f64, c1: f64) -> Vec<f64> {
    lagrange_weights(&[0.0, c1 * dt_n], dt_n)
}

/// Weights for `(theta_prev, theta_n, theta_stage1)` at `t_n + dt_n`.
pub fn stage2_quadratic_weights(dt_prev: f64, dt_n: f64, c1: f64) -> Vec<f64> {
    lagrange_weights(&[-dt_prev, 0.0, c1 * dt_n], dt_n)
}

/// Linear extrapolation from `t_{n-1}` and `t_n`; the constant `theta_n` at
/// the first step.
pub fn predict_stage1_linear(h: &TimeHistory, c1: f64) -> Vec<f64> {
    match (&h.theta_prev, h.dt_prev) {
        (Some(prev), Some(dp)) => {
            combine(&stage1_linear_weights(dp, h.dt_n, c1), &[prev.as_slice(), h.theta_n.as_slice()])
        }
        _ => h.theta_n.clone(),
    }
}

/// Quadratic through `t_{n-1}`, the previous stage-1 time and `t_n`;
/// falls back to linear, then constant.
pub fn predict_stage1_quadratic(h: &TimeHistory, c1: f64) -> Vec<f64> {
    match (&h.theta_prev, &h.theta_half_prev, h.dt_prev) {
        (Some(prev), Some(half), Some(dp)) => combine(
            &stage1_quadratic_weights(dp, h.dt_n, c1),
            &[prev.as_slice(), half.as_slice(), h.theta_n.as_slice()],
        ),
        _ => predict_stage1_linear(h, c1),
    }
}

fn stage1_value(h: &TimeHistory) -> Result<&[f64]> {
    h.theta_stage1
        .as_deref()
        .ok_or_else(|| FsiError::Sequencing("stage-2 prediction needs the stage-1 value".into()))
}

pub fn predict_stage2_linear(h: &TimeHistory, c1: f64) -> Result<Vec<f64>> {
    let s1 = stage1_value(h)?;
    Ok(combine(&stage2_linear_weights(h.dt_n, c1), &[h.theta_n.as_slice(), s1]))
}

/// Quadratic through `t_{n-1}`, `t_n` and the stage-1 time; falls back to
/// linear at the first step.
pub fn predict_stage2_quadratic(h: &TimeHistory, c1: f64) -> Result<Vec<f64>> {
    let s1 = stage1_value(h)?;
    match (&h.theta_prev, h.dt_prev) {
        (Some(prev), Some(dp)) => Ok(combine(
            &stage2_quadratic_weights(dp, h.dt_n, c1),
            &[prev.as_slice(), h.theta_n.as_slice(), s1],
        )),
        _ => predict_stage2_linear(h, c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C1: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

    fn hist(prev: f64, half: f64, n: f64, s1: f64, dp: f64, dn: f64) -> TimeHistory {
        TimeHistory {
            theta_prev: Some(vec![prev]),
            theta_half_prev: Some(vec![half]),
            theta_n: vec![n],
            dt_prev: Some(dp),
            dt_n: dn,
            theta_stage1: Some(vec![s1]),
        }
    }

    #[test]
    fn constant_history_is_preserved() {
        let h = hist(700.0, 700.0, 700.0, 700.0, 0.3, 1.7);
        for p in [
            predict_stage1_linear(&h, C1),
            predict_stage1_quadratic(&h, C1),
            predict_stage2_linear(&h, C1).unwrap(),
            predict_stage2_quadratic(&h, C1).unwrap(),
        ] {
            assert!((p[0] - 700.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stage1_linear_example() {
        let h = hist(900.0, 0.0, 890.0, 0.0, 1.0, 1.0);
        let p = predict_stage1_linear(&h, C1);
        assert!((p[0] - (890.0 - C1 * 10.0)).abs() < 1e-12);
        assert!((p[0] - 887.0711).abs() < 1e-4);
    }

    #[test]
    fn stage2_linear_example() {
        let h = hist(0.0, 0.0, 1.0, 2.0, 1.0, 1.0);
        let p = predict_stage2_linear(&h, C1).unwrap();
        assert!((p[0] - ((1.0 - 1.0 / C1) + 2.0 / C1)).abs() < 1e-12);
        assert!((p[0] - 4.41421).abs() < 1e-5);
    }

    #[test]
    fn quadratic_reproduces_square() {
        // theta(t) = t^2, t_{n-1} = 0, t_n = 1, dt = 1
        let h = hist(0.0, C1 * C1, 1.0, (1.0 + C1).powi(2), 1.0, 1.0);
        let p1 = predict_stage1_quadratic(&h, C1);
        assert!((p1[0] - (1.0 + C1).powi(2)).abs() < 1e-12);
        let p2 = predict_stage2_quadratic(&h, C1).unwrap();
        assert!((p2[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cold_start_fallbacks() {
        let mut h = TimeHistory::cold(vec![900.0], 0.5);
        assert_eq!(predict_stage1_linear(&h, C1), vec![900.0]);
        assert_eq!(predict_stage1_quadratic(&h, C1), vec![900.0]);
        assert!(predict_stage2_linear(&h, C1).is_err());
        h.theta_stage1 = Some(vec![899.0]);
        assert_eq!(predict_stage2_quadratic(&h, C1).unwrap(), predict_stage2_linear(&h, C1).unwrap());
        assert_eq!(Predictor::None.predict(1, &h, C1).unwrap(), None);
    }

    #[test]
    fn history_shift() {
        let mut h = TimeHistory::cold(vec![900.0], 0.5);
        h.theta_stage1 = Some(vec![899.0]);
        h.advance(vec![898.0]);
        assert_eq!(h.theta_prev, Some(vec![900.0]));
        assert_eq!(h.theta_half_prev, Some(vec![899.0]));
        assert_eq!(h.theta_n, vec![898.0]);
        assert_eq!(h.dt_prev, Some(0.5));
        h.start_step(1.0);
        assert_eq!(h.theta_stage1, None);
        assert_eq!(h.dt_n, 1.0);
    }

    #[test]
    fn names_round_trip() {
        for p in Predictor::ALL {
            assert_eq!(p.as_str().parse::<Predictor>().unwrap(), p);
        }
        assert!("cubic".parse::<Predictor>().is_err());
    }
}
