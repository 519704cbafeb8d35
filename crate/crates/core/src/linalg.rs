//! Small dense/banded linear algebra used by the subsolvers and the
//! extrapolation methods.

use nalgebra::{DMatrix, DVector};

use crate::error::{FsiError, Result};

/// Square band matrix with equal lower and upper half-bandwidth.
///
/// Row `i` stores the entries of columns `i - hb ..= i + hb`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    hb: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        Self { n, hb: half_bandwidth, data: vec![0.0; n * (2 * half_bandwidth + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hb
    }

    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.hb {
            return None;
        }
        Some(i * (2 * self.hb + 1) + (j + self.hb - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry (i, j). Panics when the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.hb);
                let hi = (i + self.hb).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Solves `A x = b` by banded Gaussian elimination without pivoting.
    ///
    /// The systems assembled here are (perturbations of) symmetric positive
    /// definite matrices, for which elimination without pivoting is stable.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(FsiError::Dimension { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let hb = self.hb;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let pivot = a.get(k, k);
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(FsiError::Singular(k));
            }
            let last = (k + hb).min(n - 1);
            for i in k + 1..=last {
                let f = a.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last {
                    let akj = a.get(k, j);
                    if akj != 0.0 {
                        a.add(i, j, -f * akj);
                    }
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + hb).min(n - 1);
            let s: f64 = (k + 1..=last).map(|j| a.get(k, j) * x[j]).sum();
            x[k] = (x[k] - s) / a.get(k, k);
        }
        Ok(x)
    }
}

/// Condition estimate above which the Householder path hands over to the
/// minimum-norm SVD solve.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Least-squares solution of `min ||A x - b||_2`.
///
/// Full column rank, well-conditioned problems are solved with Householder
/// QR. Underdetermined or rank-deficient problems (diagonal ratio of R above
/// [`CONDITION_LIMIT`]) return the minimum-norm solution.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "least_squares: row mismatch");
    if n == 0 {
        return DVector::zeros(0);
    }
    if m >= n {
        if let Some(x) = householder_solve(a, b) {
            return x;
        }
    }
    min_norm_svd(a, b)
}

fn householder_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut y = b.clone();
    for k in 0..n {
        let norm_x = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            return None;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm_x } else { norm_x };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            y[i] -= f * v[i - k];
        }
    }
    let diag_max = (0..n).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let diag_min = (0..n).map(|k| r[(k, k)].abs()).fold(f64::INFINITY, f64::min);
    if diag_min == 0.0 || diag_max / diag_min > CONDITION_LIMIT {
        return None;
    }
    let mut x = DVector::zeros(n);
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| r[(k, j)] * x[j]).sum();
        x[k] = (y[k] - s) / r[(k, k)];
    }
    Some(x)
}

fn min_norm_svd(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    let eps = smax / CONDITION_LIMIT;
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
