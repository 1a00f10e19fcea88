//! Two-model ordinary least squares (OLS-2): one linear regression with
//! intercept per arm, effect = difference of the two fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearFit {
    /// Minimum-norm least squares via SVD, so rank-deficient designs still fit.
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n == 0 || y.len() != n {
            return Err(Error::Shape {
                context: "least squares",
                expected: n.max(1),
                got: y.len(),
            });
        }
        let design = DMatrix::from_fn(n, d + 1, |r, c| if c == d { 1.0 } else { x.get(r, c) });
        let svd = design.svd(true, true);
        let beta = svd
            .solve(&DVector::from_column_slice(y), 1e-10)
            .map_err(|e| Error::Degenerate(format!("least squares: {e}")))?;
        Ok(Self {
            coefficients: beta.as_slice()[..d].to_vec(),
            intercept: beta[d],
        })
    }

    pub fn predict_one(&self, row: &[f64]) -> f64 {
        dot(&self.coefficients, row) + self.intercept
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsTLearner {
    pub control: LinearFit,
    pub treated: LinearFit,
}

impl OlsTLearner {
    pub fn fit(dataset: &Dataset, idx: &[usize]) -> Result<Self> {
        let sub = dataset.subset(idx);
        sub.require_both_arms("OLS T-learner")?;
        let arm = |a: u8| {
            let rows = sub.arm_indices(a);
            let y: Vec<f64> = rows.iter().map(|&i| sub.y()[i]).collect();
            LinearFit::fit(&sub.x().select_rows(&rows), &y)
        };
        Ok(Self {
            control: arm(0)?,
            treated: arm(1)?,
        })
    }

    pub fn predict_tau(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter()
            .map(|r| self.treated.predict_one(r) - self.control.predict_one(r))
            .collect()
    }

    pub fn predict_outcomes(&self, x: &Matrix) -> (Vec<f64>, Vec<f64>) {
        x.row_iter()
            .map(|r| (self.control.predict_one(r), self.treated.predict_one(r)))
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_arms() {
        let rows: Vec<[f64; 2]> = (0..12).map(|i| [i as f64, ((i * 7) % 5) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = rows
            .iter()
            .zip(&t)
            .map(|(r, &a)| {
                if a == 1 {
                    3.0 * r[0] - r[1] + 2.0
                } else {
                    0.5 * r[0] + 1.0
                }
            })
            .collect();
        let d = Dataset::continuous(x.clone(), t, y).unwrap();
        let m = OlsTLearner::fit(&d, &(0..12).collect::<Vec<_>>()).unwrap();
        for (r, tau) in rows.iter().zip(m.predict_tau(&x)) {
            let want = 2.5 * r[0] - r[1] + 1.0;
            assert!((tau - want).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_columns_still_fit() {
        let rows: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64).collect();
        let f = LinearFit::fit(&x, &y).unwrap();
        assert!((f.predict_one(&[3.0, 3.0]) - 6.0).abs() < 1e-9);
    }
}
