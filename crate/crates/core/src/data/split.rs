use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

const MAX_RETRIES: u64 = 10;

/// Disjoint train/validation/test index lists covering `0..n`, each sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Training + validation indices, i.e. every sample whose treatment and
    /// factual outcome are used during fitting.
    pub fn within_sample(&self) -> Vec<usize> {
        let mut v = self.train.clone();
        v.extend_from_slice(&self.validation);
        v.sort_unstable();
        v
    }
}

/// Sizes produced by [`split`] for `n` samples: `|test| = round(n·test_fraction)`,
/// `|validation| = round((n − |test|)·val_fraction)`, the rest is train.
/// Rounding is half away from zero.
pub fn split_sizes(n: usize, test_fraction: f64, val_fraction: f64) -> (usize, usize, usize) {
    let test = ((n as f64) * test_fraction).round() as usize;
    let val = (((n - test) as f64) * val_fraction).round() as usize;
    (n - test - val, val, test)
}

/// Uniformly random split, deterministic per seed. Every part must contain
/// both treatment arms; otherwise the permutation is redrawn (up to 10 times).
pub fn split(dataset: &Dataset, test_fraction: f64, val_fraction: f64, seed: u64) -> Result<SplitIndices> {
    for (name, f) in [("test_fraction", test_fraction), ("val_fraction", val_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must lie in (0,1), got {f}")));
        }
    }
    let n = dataset.n();
    let (n_train, n_val, n_test) = split_sizes(n, test_fraction, val_fraction);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "fractions ({test_fraction}, {val_fraction}) leave an empty part for n = {n}"
        )));
    }
    let t = dataset.t();
    let has_both = |idx: &[usize]| idx.iter().any(|&i| t[i] == 0) && idx.iter().any(|&i| t[i] == 1);
    for k in 0..=MAX_RETRIES {
        let mut rng = rng_from_seed(if k == 0 {
            seed
        } else {
            derive_seed(seed, stream::RETRY, k)
        });
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut test = perm[..n_test].to_vec();
        let mut validation = perm[n_test..n_test + n_val].to_vec();
        let mut train = perm[n_test + n_val..].to_vec();
        if has_both(&train) && has_both(&validation) && has_both(&test) {
            train.sort_unstable();
            validation.sort_unstable();
            test.sort_unstable();
            return Ok(SplitIndices {
                train,
                validation,
                test,
            });
        }
    }
    Err(Error::Structure(format!(
        "no split with both arms in every part after {MAX_RETRIES} retries"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generators::{generate_ihdp_like, IhdpConfig};

    #[test]
    fn reference_sizes() {
        assert_eq!(split_sizes(747, 0.1, 0.3), (470, 202, 75));
    }

    #[test]
    fn partition_and_determinism() {
        let (data, _) = generate_ihdp_like(0, &IhdpConfig::default()).unwrap();
        let a = split(&data, 0.1, 0.3, 42).unwrap();
        let b = split(&data, 0.1, 0.3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (470, 202, 75));
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..747).collect::<Vec<_>>());
        assert_ne!(a, split(&data, 0.1, 0.3, 43).unwrap());
    }

    #[test]
    fn zero_fractions_rejected() {
        let (data, _) = generate_ihdp_like(0, &IhdpConfig::default()).unwrap();
        assert!(matches!(split(&data, 0.0, 0.0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn infeasible_arm_constraint_errors() {
        use crate::linalg::Matrix;
        let x = Matrix::from_rows(&vec![[0.0]; 30]).unwrap();
        let mut t = vec![0u8; 30];
        t[0] = 1;
        let data = crate::data::Dataset::continuous(x, t, vec![0.0; 30]).unwrap();
        assert!(matches!(split(&data, 0.2, 0.2, 0), Err(Error::Structure(_))));
    }
}
