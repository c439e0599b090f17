//! Least squares through a column-pivoted Householder QR factorization.

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Default ridge, relative to the standardized column scale.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Pivots below this fraction of the largest one count as rank deficiency.
const RANK_TOL: f64 = 1e-10;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.rows + i] = value;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

/// Minimum-residual solution of `A x ≈ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    /// Zero on columns found to be dependent on earlier pivots.
    pub x: Vec<f64>,
    pub rank: usize,
}

/// Solves `min ‖A x − b‖` by Householder QR with column pivoting. Reflector
/// application is spread over columns when `exec` is parallel; the
/// arithmetic per column is the same either way, so results are identical.
pub fn lstsq_qr(mut a: ColMatrix, mut b: Vec<f64>, exec: Execution) -> LstsqSolution {
    let (m, p) = (a.rows, a.cols);
    assert_eq!(
        b.len(),
        m,
        "right-hand side length must match the row count"
    );
    let mut perm: Vec<usize> = (0..p).collect();
    let mut diag = Vec::with_capacity(p.min(m));
    let mut rank = 0;
    for k in 0..p.min(m) {
        let tail_norms = exec.map(p - k, |j| {
            a.col(k + j)[k..].iter().map(|x| x * x).sum::<f64>()
        });
        let (jmax, &best) = tail_norms
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("at least one column remains");
        let pivot = k + jmax;
        if pivot != k {
            for i in 0..m {
                a.data.swap(k * m + i, pivot * m + i);
            }
            perm.swap(k, pivot);
        }
        let norm = best.sqrt();
        if norm == 0.0
            || diag
                .first()
                .is_some_and(|&r0: &f64| norm <= RANK_TOL * r0.abs())
        {
            break;
        }
        let x0 = a.get(k, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a.col(k)[k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        diag.push(alpha);
        rank += 1;
        let reflect = |col: &mut [f64]| {
            let tail = &mut col[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
            let s = 2.0 * dot / vtv;
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        };
        exec.for_each_chunk_mut(&mut a.data[(k + 1) * m..], m, |_, col| reflect(col));
        reflect(&mut b);
        a.set(k, k, alpha);
    }

    // Back substitution on the leading rank × rank triangle.
    let mut z = vec![0.0; p];
    for i in (0..rank).rev() {
        let s: f64 = (i + 1..rank).map(|j| a.get(i, j) * z[j]).sum();
        z[i] = (b[i] - s) / a.get(i, i);
    }
    let mut x = vec![0.0; p];
    for (k, &col) in perm.iter().enumerate() {
        x[col] = z[k];
    }
    LstsqSolution { x, rank }
}

/// An affine predictor `y = intercept + weights · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Numerical rank of the standardized (and penalized) design.
    pub rank: usize,
    /// Columns that varied over the training rows; constant ones get weight 0.
    pub active: usize,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Least squares with an intercept.
///
/// Columns are standardized first; constant columns are dropped. A positive
/// `ridge` adds the penalty `ridge · m · ‖w‖²` in standardized coordinates
/// (`m` rows), i.e. it is relative to the columns' own scale. With `ridge = 0`
/// dependent columns are handled by the rank-revealing factorization.
pub fn fit_ols(rows: &[Vec<f64>], y: &[f64], ridge: f64, exec: Execution) -> Result<OlsFit> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::Estimation("no training rows".into()));
    }
    if y.len() != m {
        return Err(Error::Estimation(format!(
            "{m} rows but {} targets",
            y.len()
        )));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Estimation("rows differ in length".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Estimation(format!(
            "ridge must be finite and nonnegative, got {ridge}"
        )));
    }
    if y.iter()
        .chain(rows.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::Estimation(
            "non-finite value in the design or targets".into(),
        ));
    }

    let mf = m as f64;
    let y_mean = y.iter().sum::<f64>() / mf;
    let stats: Vec<(f64, f64)> = exec.map(p, |j| {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / mf;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / mf;
        (mean, var.sqrt())
    });
    let active: Vec<usize> = (0..p)
        .filter(|&j| stats[j].1 > 1e-12 * stats[j].0.abs().max(1.0))
        .collect();
    let pa = active.len();
    let mut weights = vec![0.0; p];
    let mut rank = 0;
    if pa > 0 {
        let extra = if ridge > 0.0 { pa } else { 0 };
        let total = m + extra;
        let mut z = ColMatrix::zeros(total, pa);
        let penalty = (ridge * mf).sqrt();
        exec.for_each_chunk_mut(&mut z.data, total, |c, col| {
            let j = active[c];
            let (mean, sd) = stats[j];
            for (i, r) in rows.iter().enumerate() {
                col[i] = (r[j] - mean) / sd;
            }
            if extra > 0 {
                col[m + c] = penalty;
            }
        });
        let mut rhs: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        rhs.resize(total, 0.0);
        let sol = lstsq_qr(z, rhs, exec);
        rank = sol.rank;
        for (c, &j) in active.iter().enumerate() {
            weights[j] = sol.x[c] / stats[j].1;
        }
    }
    let intercept = y_mean
        - weights
            .iter()
            .zip(&stats)
            .map(|(w, s)| w * s.0)
            .sum::<f64>();
    Ok(OlsFit {
        weights,
        intercept,
        rank,
        active: pa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i) * 0.37 - 2.0]).collect();
        let y = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        (x, y)
    }

    #[test]
    fn exact_line_without_ridge() {
        let (x, y) = line();
        let fit = fit_ols(&x, &y, 0.0, Execution::Serial).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-9);
        assert!((fit.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn default_ridge_bias_is_relative() {
        let (x, y) = line();
        let fit = fit_ols(&x, &y, DEFAULT_RIDGE, Execution::Serial).unwrap();
        // Shrinkage factor 1 / (1 + ridge) on a standardized column.
        assert!((fit.weights[0] - 2.0 / (1.0 + DEFAULT_RIDGE)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column() {
        let (x, y) = line();
        let dup: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[0]]).collect();
        for ridge in [0.0, DEFAULT_RIDGE] {
            let fit = fit_ols(&dup, &y, ridge, Execution::Serial).unwrap();
            assert!(fit.weights.iter().all(|w| w.is_finite()));
            for (r, t) in dup.iter().zip(&y) {
                assert!((fit.predict(r) - t).abs() < 1e-6);
            }
        }
        let fit = fit_ols(&dup, &y, 0.0, Execution::Serial).unwrap();
        assert_eq!(fit.rank, 1);
        let ridged = fit_ols(&dup, &y, DEFAULT_RIDGE, Execution::Serial).unwrap();
        assert_eq!(ridged.rank, 2);
        assert!((ridged.weights[0] - ridged.weights[1]).abs() < 1e-9);
    }

    #[test]
    fn constant_columns_get_zero_weight() {
        let (x, y) = line();
        let padded: Vec<Vec<f64>> = x.iter().map(|r| vec![5.0, r[0]]).collect();
        let fit = fit_ols(&padded, &y, 0.0, Execution::Serial).unwrap();
        assert_eq!(fit.weights[0], 0.0);
        assert_eq!(fit.active, 1);
        assert!((fit.predict(&[5.0, 1.0]) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn serial_and_parallel_agree_exactly() {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                (0..7)
                    .map(|j| ((i * 7 + j * 13) % 17) as f64 + (i as f64).sqrt())
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let a = fit_ols(&x, &y, DEFAULT_RIDGE, Execution::Serial).unwrap();
        let b = fit_ols(&x, &y, DEFAULT_RIDGE, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_input() {
        let (x, mut y) = line();
        assert!(fit_ols(&[], &[], 0.0, Execution::Serial).is_err());
        assert!(fit_ols(&x, &y[1..], 0.0, Execution::Serial).is_err());
        assert!(fit_ols(&x, &y, -1.0, Execution::Serial).is_err());
        y[3] = f64::NAN;
        assert!(fit_ols(&x, &y, 0.0, Execution::Serial).is_err());
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(fit_ols(&ragged, &[0.0, 1.0], 0.0, Execution::Serial).is_err());
    }

    #[test]
    fn single_row() {
        let fit = fit_ols(&[vec![1.0, 2.0]], &[3.0], DEFAULT_RIDGE, Execution::Serial).unwrap();
        assert_eq!(fit.predict(&[1.0, 2.0]), 3.0);
    }
}
