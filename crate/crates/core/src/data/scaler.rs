use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Affine standardization of covariates and outcome.
///
/// Continuous and count columns are mapped to `(x − shift)/scale` with the
/// mean and population standard deviation of the fit rows; binary columns
/// keep `shift = 0, scale = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub x_shift: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_shift: f64,
    pub y_scale: f64,
    /// Columns whose variance was zero; their scale was clamped to 1.
    pub clamped_columns: Vec<usize>,
    /// Set when the outcome variance was zero.
    pub clamped_outcome: bool,
}

impl Scaler {
    pub fn identity(d: usize) -> Self {
        Self {
            x_shift: vec![0.0; d],
            x_scale: vec![1.0; d],
            y_shift: 0.0,
            y_scale: 1.0,
            clamped_columns: Vec::new(),
            clamped_outcome: false,
        }
    }

    pub fn fit(dataset: &Dataset, fit_indices: &[usize]) -> Result<Self> {
        if fit_indices.is_empty() {
            return Err(Error::InvalidArgument("standardize: fit_indices is empty".into()));
        }
        let d = dataset.d();
        let mut scaler = Self::identity(d);
        for (c, kind) in dataset.feature_kinds().iter().enumerate() {
            if *kind == FeatureKind::Binary {
                continue;
            }
            let col: Vec<f64> = fit_indices.iter().map(|&i| dataset.x().get(i, c)).collect();
            let (m, sd) = mean_sd(&col);
            scaler.x_shift[c] = m;
            if sd > 0.0 {
                scaler.x_scale[c] = sd;
            } else {
                scaler.clamped_columns.push(c);
            }
        }
        let ys: Vec<f64> = fit_indices.iter().map(|&i| dataset.y()[i]).collect();
        let (m, sd) = mean_sd(&ys);
        scaler.y_shift = m;
        if sd > 0.0 {
            scaler.y_scale = sd;
        } else {
            scaler.clamped_outcome = true;
        }
        Ok(scaler)
    }

    pub fn dim(&self) -> usize {
        self.x_shift.len()
    }

    pub fn has_warnings(&self) -> bool {
        !self.clamped_columns.is_empty() || self.clamped_outcome
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_shift.iter().zip(&self.x_scale))
            .map(|(v, (s, k))| (v - s) / k)
            .collect()
    }

    pub fn transform_x(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() > 0 && x.cols() != self.dim() {
            return Err(Error::Shape {
                context: "scaler input",
                expected: self.dim(),
                got: x.cols(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (v, (s, k)) in out.row_mut(r).iter_mut().zip(self.x_shift.iter().zip(&self.x_scale)) {
                *v = (*v - s) / k;
            }
        }
        Ok(out)
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        (y - self.y_shift) / self.y_scale
    }

    pub fn inverse_y(&self, y: f64) -> f64 {
        y * self.y_scale + self.y_shift
    }

    /// Converts a difference of standardized outcomes back to outcome units.
    pub fn inverse_effect(&self, effect: f64) -> f64 {
        effect * self.y_scale
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        let x = self.transform_x(dataset.x())?;
        let y = dataset.y().iter().map(|&v| self.transform_y(v)).collect();
        Ok(dataset.with_parts(x, y))
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Fits a [`Scaler`] on `fit_indices` and applies it to the whole dataset.
pub fn standardize(dataset: &Dataset, fit_indices: &[usize]) -> Result<(Scaler, Dataset)> {
    let scaler = Scaler::fit(dataset, fit_indices)?;
    let transformed = scaler.transform(dataset)?;
    Ok((scaler, transformed))
}
