use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Count,
}

/// Observational data: covariates, binary treatment flags and the single
/// observed outcome per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    t: Vec<u8>,
    y: Vec<f64>,
    feature_kinds: Vec<FeatureKind>,
}

impl Dataset {
    pub fn new(x: Matrix, t: Vec<u8>, y: Vec<f64>, feature_kinds: Vec<FeatureKind>) -> Result<Self> {
        let n = x.rows();
        if t.len() != n {
            return Err(Error::Shape {
                context: "treatment vector",
                expected: n,
                got: t.len(),
            });
        }
        if y.len() != n {
            return Err(Error::Shape {
                context: "outcome vector",
                expected: n,
                got: y.len(),
            });
        }
        if n > 0 && feature_kinds.len() != x.cols() {
            return Err(Error::Shape {
                context: "feature kinds",
                expected: x.cols(),
                got: feature_kinds.len(),
            });
        }
        if let Some(bad) = t.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "treatment flags must be 0 or 1, found {bad}"
            )));
        }
        ensure_finite(x.as_slice(), "covariates")?;
        ensure_finite(&y, "outcomes")?;
        Ok(Self { x, t, y, feature_kinds })
    }

    /// Dataset with every column tagged continuous.
    pub fn continuous(x: Matrix, t: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let kinds = vec![FeatureKind::Continuous; x.cols()];
        Self::new(x, t, y, kinds)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn n_control(&self) -> usize {
        self.t.iter().filter(|&&v| v == 0).count()
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&v| v == 1).count()
    }

    /// Indices of samples with treatment flag `arm`.
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.t[i] == arm).collect()
    }

    /// Fails unless both arms have at least one sample.
    pub fn require_both_arms(&self, context: &str) -> Result<()> {
        if self.n_control() == 0 || self.n_treated() == 0 {
            return Err(Error::Structure(format!(
                "{context}: both treatment arms must be non-empty (n0={}, n1={})",
                self.n_control(),
                self.n_treated()
            )));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            t: indices.iter().map(|&i| self.t[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_kinds: self.feature_kinds.clone(),
        }
    }

    pub(crate) fn with_parts(&self, x: Matrix, y: Vec<f64>) -> Dataset {
        Dataset {
            x,
            t: self.t.clone(),
            y,
            feature_kinds: self.feature_kinds.clone(),
        }
    }
}

/// Noiseless response surfaces for synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    mu0: Vec<f64>,
    mu1: Vec<f64>,
    tau: Vec<f64>,
    /// Generating propensity `P(T=1|x)`, when the generator knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    propensity: Option<Vec<f64>>,
}

impl GroundTruth {
    pub fn new(mu0: Vec<f64>, mu1: Vec<f64>) -> Result<Self> {
        if mu0.len() != mu1.len() {
            return Err(Error::Shape {
                context: "response surfaces",
                expected: mu0.len(),
                got: mu1.len(),
            });
        }
        ensure_finite(&mu0, "mu0")?;
        ensure_finite(&mu1, "mu1")?;
        let tau = mu0.iter().zip(&mu1).map(|(a, b)| b - a).collect();
        Ok(Self {
            mu0,
            mu1,
            tau,
            propensity: None,
        })
    }

    pub fn with_propensity(mut self, propensity: Vec<f64>) -> Result<Self> {
        if propensity.len() != self.mu0.len() {
            return Err(Error::Shape {
                context: "propensity",
                expected: self.mu0.len(),
                got: propensity.len(),
            });
        }
        self.propensity = Some(propensity);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.mu0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu0.is_empty()
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn propensity(&self) -> Option<&[f64]> {
        self.propensity.as_deref()
    }

    /// Noiseless potential outcome of arm `t` for sample `i`.
    pub fn mu(&self, t: u8, i: usize) -> f64 {
        if t == 1 {
            self.mu1[i]
        } else {
            self.mu0[i]
        }
    }

    pub fn subset(&self, indices: &[usize]) -> GroundTruth {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        GroundTruth {
            mu0: pick(&self.mu0),
            mu1: pick(&self.mu1),
            tau: pick(&self.tau),
            propensity: self.propensity.as_deref().map(pick),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_is_difference() {
        let g = GroundTruth::new(vec![1.0, 2.0], vec![4.0, 1.5]).unwrap();
        assert_eq!(g.tau(), &[3.0, -0.5]);
    }

    #[test]
    fn rejects_bad_flags_and_nan() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(Dataset::continuous(x.clone(), vec![0, 2], vec![0.0, 0.0]).is_err());
        assert!(Dataset::continuous(x, vec![0, 1], vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn arm_counts_and_subset() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let d = Dataset::continuous(x, vec![0, 1, 1], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!((d.n_control(), d.n_treated()), (1, 2));
        let s = d.subset(&[2, 0]);
        assert_eq!(s.t(), &[1, 0]);
        assert_eq!(s.y(), &[3.0, 1.0]);
        assert!(d.subset(&[1, 2]).require_both_arms("test").is_err());
    }
}
