use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

pub const BANDWIDTH_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 2.0];
pub const RIDGE_GRID: [f64; 3] = [1e-4, 1e-2, 1.0];
pub const CV_FOLDS: usize = 5;
/// Larger training sets are subsampled to this many points.
pub const MAX_FIT_POINTS: usize = 1000;

/// RBF kernel ridge regression `f(x) = ȳ + Σᵢ aᵢ exp(−‖x−xᵢ‖²/(2h²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRidge {
    pub points: Matrix,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub bandwidth: f64,
    pub ridge: f64,
}

fn kernel(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * bandwidth * bandwidth)).exp()
}

impl KernelRidge {
    pub fn fit(x: &Matrix, y: &[f64], bandwidth: f64, ridge: f64) -> Result<Self> {
        let n = x.rows();
        if n == 0 || y.len() != n {
            return Err(Error::Shape {
                context: "kernel ridge data",
                expected: n.max(1),
                got: y.len(),
            });
        }
        let intercept = y.iter().sum::<f64>() / n as f64;
        let mut k = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(x.row(i), x.row(j), bandwidth);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += ridge;
        }
        let rhs = nalgebra::DVector::from_iterator(n, y.iter().map(|v| v - intercept));
        let coefficients = match k.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => k
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::NonFinite(format!("kernel ridge solve: {e}")))?,
        };
        Ok(Self {
            points: x.clone(),
            coefficients: coefficients.iter().copied().collect(),
            intercept,
            bandwidth,
            ridge,
        })
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .points
                .row_iter()
                .zip(&self.coefficients)
                .map(|(p, a)| a * kernel(x, p, self.bandwidth))
                .sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Median pairwise distance, or 1 when every pair coincides.
pub fn median_distance(x: &Matrix) -> f64 {
    let mut d = Vec::new();
    for i in 0..x.rows() {
        for j in 0..i {
            d.push(squared_distance(x.row(i), x.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Grid search over bandwidth × ridge by K-fold CV, then refit on all points.
pub fn fit_cv<R: Rng + ?Sized>(x: &Matrix, y: &[f64], rng: &mut R) -> Result<KernelRidge> {
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    idx.shuffle(rng);
    idx.truncate(MAX_FIT_POINTS);
    let x = x.select_rows(&idx);
    let y: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let n = x.rows();
    let base = median_distance(&x);
    let folds = CV_FOLDS.min(n);
    let mut best: Option<(f64, f64, f64)> = None;
    for &mult in &BANDWIDTH_MULTIPLIERS {
        for &ridge in &RIDGE_GRID {
            let h = mult * base;
            let score = if folds < 2 {
                0.0
            } else {
                let mut sse = 0.0;
                for f in 0..folds {
                    let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
                    let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
                    let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                    let m = KernelRidge::fit(&x.select_rows(&train), &ty, h, ridge)?;
                    sse += test
                        .iter()
                        .map(|&i| (m.predict_one(x.row(i)) - y[i]).powi(2))
                        .sum::<f64>();
                }
                sse / n as f64
            };
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, h, ridge));
            }
        }
    }
    let (_, h, ridge) = best.expect("grid is non-empty");
    KernelRidge::fit(&x, &y, h, ridge)
}
