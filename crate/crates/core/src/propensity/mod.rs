//! Propensity models `η̂(x) ≈ P(T=1 | X=x)`: class-balanced logistic
//! regression, k-nearest neighbours and a CART tree, with cross-validated
//! selection over a grid and a calibration table.

mod logistic;
mod tree;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use logistic::balanced_logistic_loss;
pub use tree::{TreeNode, MIN_LEAF};

use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Matrix};
use crate::rng::rng_from_seed;

/// Default clip applied to `η̂` (bounds inverse-propensity weights by 100).
pub const DEFAULT_CLIP: f64 = 0.01;

/// A grid member: model family plus its hyper-parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PropensitySpec {
    Logistic { l2: f64 },
    Knn { k: usize },
    Tree { max_depth: usize },
}

impl PropensitySpec {
    pub fn default_grid() -> Vec<PropensitySpec> {
        vec![
            PropensitySpec::Logistic { l2: 1e-3 },
            PropensitySpec::Logistic { l2: 1e-2 },
            PropensitySpec::Logistic { l2: 1e-1 },
            PropensitySpec::Knn { k: 10 },
            PropensitySpec::Knn { k: 30 },
            PropensitySpec::Tree { max_depth: 2 },
            PropensitySpec::Tree { max_depth: 3 },
            PropensitySpec::Tree { max_depth: 4 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PropensitySpec::Logistic { l2 } if !(l2.is_finite() && l2 >= 0.0) => {
                Err(Error::Config(format!("logistic l2 must be ≥ 0, got {l2}")))
            }
            PropensitySpec::Knn { k: 0 } => Err(Error::Config("knn k must be ≥ 1".into())),
            PropensitySpec::Tree { max_depth: 0 } => Err(Error::Config("tree max_depth must be ≥ 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PropensityVariant {
    Logistic { weights: Vec<f64>, bias: f64, l2: f64 },
    Knn { k: usize, points: Matrix, labels: Vec<u8> },
    Tree { max_depth: usize, nodes: Vec<TreeNode> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    /// Covariate standardization fitted on the training indices.
    pub scaler: Scaler,
    pub variant: PropensityVariant,
    /// Logistic fit classified every training sample correctly, so the
    /// unregularized objective has no minimizer; predictions rely on clipping.
    pub separation: bool,
}

impl PropensityModel {
    /// Logistic model with the given parameters on unscaled covariates.
    pub fn logistic(weights: Vec<f64>, bias: f64) -> Self {
        Self {
            scaler: Scaler::identity(weights.len()),
            variant: PropensityVariant::Logistic { weights, bias, l2: 0.0 },
            separation: false,
        }
    }

    pub fn spec(&self) -> PropensitySpec {
        match &self.variant {
            PropensityVariant::Logistic { l2, .. } => PropensitySpec::Logistic { l2: *l2 },
            PropensityVariant::Knn { k, .. } => PropensitySpec::Knn { k: *k },
            PropensityVariant::Tree { max_depth, .. } => PropensitySpec::Tree { max_depth: *max_depth },
        }
    }

    /// Unclipped probability for one raw covariate row.
    pub fn predict_raw_one(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform_row(x);
        match &self.variant {
            PropensityVariant::Logistic { weights, bias, .. } => 1.0 / (1.0 + (-(dot(weights, &z) + bias)).exp()),
            PropensityVariant::Knn { k, points, labels } => {
                let mut d: Vec<(f64, usize)> = (0..points.rows())
                    .map(|j| (squared_distance(&z, points.row(j)), j))
                    .collect();
                let k = (*k).min(d.len());
                d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d[..k].iter().map(|&(_, j)| labels[j] as f64).sum::<f64>() / k as f64
            }
            PropensityVariant::Tree { nodes, .. } => tree::predict(nodes, &z),
        }
    }

    pub fn predict_raw(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter().map(|r| self.predict_raw_one(r)).collect()
    }
}

/// `η̂(x)` clipped to `[clip, 1 − clip]`, one value per row.
pub fn predict_eta(model: &PropensityModel, x: &Matrix, clip: f64) -> Vec<f64> {
    model
        .predict_raw(x)
        .into_iter()
        .map(|p| p.clamp(clip, 1.0 - clip))
        .collect()
}

fn fit_scaler(dataset: &Dataset, indices: &[usize]) -> Result<(Scaler, Matrix, Vec<u8>)> {
    let scaler = Scaler::fit(dataset, indices)?;
    let x = scaler.transform_x(&dataset.x().select_rows(indices))?;
    let t = indices.iter().map(|&i| dataset.t()[i]).collect();
    Ok((scaler, x, t))
}

fn require_arms(dataset: &Dataset, indices: &[usize]) -> Result<()> {
    let n1 = indices.iter().filter(|&&i| dataset.t()[i] == 1).count();
    if n1 == 0 || n1 == indices.len() {
        return Err(Error::Structure(format!(
            "propensity fit needs both arms (n0={}, n1={n1})",
            indices.len() - n1
        )));
    }
    Ok(())
}

pub fn train_propensity_lr(dataset: &Dataset, indices: &[usize], l2: f64) -> Result<PropensityModel> {
    require_arms(dataset, indices)?;
    let (scaler, x, t) = fit_scaler(dataset, indices)?;
    let fit = logistic::fit(&x, &t, l2);
    let separation = x.row_iter().zip(&t).all(|(r, &ti)| {
        let s = dot(r, &fit.weights) + fit.bias;
        if ti == 1 {
            s > 0.0
        } else {
            s < 0.0
        }
    });
    Ok(PropensityModel {
        scaler,
        variant: PropensityVariant::Logistic {
            weights: fit.weights,
            bias: fit.bias,
            l2,
        },
        separation,
    })
}

/// Best-so-far objective values of the logistic fit, one per optimizer step.
pub fn logistic_fit_trace(dataset: &Dataset, indices: &[usize], l2: f64) -> Result<Vec<f64>> {
    require_arms(dataset, indices)?;
    let (_, x, t) = fit_scaler(dataset, indices)?;
    Ok(logistic::fit(&x, &t, l2).best_trace)
}

pub fn train_propensity_knn(dataset: &Dataset, indices: &[usize], k: usize) -> Result<PropensityModel> {
    require_arms(dataset, indices)?;
    let (scaler, points, labels) = fit_scaler(dataset, indices)?;
    Ok(PropensityModel {
        scaler,
        variant: PropensityVariant::Knn { k, points, labels },
        separation: false,
    })
}

pub fn train_propensity_tree(dataset: &Dataset, indices: &[usize], max_depth: usize) -> Result<PropensityModel> {
    require_arms(dataset, indices)?;
    let (scaler, x, t) = fit_scaler(dataset, indices)?;
    let all: Vec<usize> = (0..x.rows()).collect();
    Ok(PropensityModel {
        scaler,
        variant: PropensityVariant::Tree {
            max_depth,
            nodes: tree::grow(&x, &t, &all, max_depth, MIN_LEAF),
        },
        separation: false,
    })
}

pub fn train_propensity(dataset: &Dataset, indices: &[usize], spec: PropensitySpec) -> Result<PropensityModel> {
    spec.validate()?;
    match spec {
        PropensitySpec::Logistic { l2 } => train_propensity_lr(dataset, indices, l2),
        PropensitySpec::Knn { k } => train_propensity_knn(dataset, indices, k),
        PropensitySpec::Tree { max_depth } => train_propensity_tree(dataset, indices, max_depth),
    }
}

/// Class-balanced cross-entropy of clipped predictions over `indices`.
/// An arm absent from `indices` contributes nothing.
pub fn balanced_cross_entropy(model: &PropensityModel, dataset: &Dataset, indices: &[usize], clip: f64) -> f64 {
    let (mut s0, mut c0, mut s1, mut c1) = (0.0, 0usize, 0.0, 0usize);
    for &i in indices {
        let p = model.predict_raw_one(dataset.x().row(i)).clamp(clip, 1.0 - clip);
        if dataset.t()[i] == 1 {
            s1 -= p.ln();
            c1 += 1;
        } else {
            s0 -= (1.0 - p).ln();
            c0 += 1;
        }
    }
    let part = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    part(s0, c0) + part(s1, c1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub spec: PropensitySpec,
    pub mean_loss: f64,
}

/// Picks the grid member with the lowest mean held-out balanced
/// cross-entropy over `folds` folds (ties keep grid order) and refits it on
/// all of `indices`.
pub fn select_propensity(
    dataset: &Dataset,
    indices: &[usize],
    grid: &[PropensitySpec],
    folds: usize,
    seed: u64,
) -> Result<(PropensityModel, Vec<CvScore>)> {
    if grid.is_empty() {
        return Err(Error::Config("propensity grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::Config(format!(
            "propensity CV needs at least 2 folds, got {folds}"
        )));
    }
    require_arms(dataset, indices)?;
    for spec in grid {
        spec.validate()?;
    }
    if grid.len() == 1 {
        let model = train_propensity(dataset, indices, grid[0])?;
        return Ok((model, Vec::new()));
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut rng_from_seed(seed));
    let parts: Vec<Vec<usize>> = (0..folds)
        .map(|f| order.iter().skip(f).step_by(folds).copied().collect())
        .collect();

    let mut scores = Vec::with_capacity(grid.len());
    for spec in grid {
        let mut total = 0.0;
        let mut used = 0usize;
        for f in 0..folds {
            let train: Vec<usize> = (0..folds)
                .filter(|&g| g != f)
                .flat_map(|g| parts[g].iter().copied())
                .collect();
            if parts[f].is_empty() || require_arms(dataset, &train).is_err() {
                continue;
            }
            let model = train_propensity(dataset, &train, *spec)?;
            total += balanced_cross_entropy(&model, dataset, &parts[f], DEFAULT_CLIP);
            used += 1;
        }
        let mean_loss = if used == 0 { f64::INFINITY } else { total / used as f64 };
        scores.push(CvScore { spec: *spec, mean_loss });
    }
    let mut winner = 0;
    for (k, s) in scores.iter().enumerate() {
        if s.mean_loss < scores[winner].mean_loss {
            winner = k;
        }
    }
    let model = train_propensity(dataset, indices, grid[winner])?;
    Ok((model, scores))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_eta: Option<f64>,
    pub treated_rate: Option<f64>,
}

/// Equal-width reliability table over `[0, 1]` of clipped `η̂`.
pub fn calibration_table(
    model: &PropensityModel,
    dataset: &Dataset,
    indices: &[usize],
    bins: usize,
    clip: f64,
) -> Result<Vec<CalibrationBin>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least 2 bins, got {bins}"
        )));
    }
    let mut sums = vec![(0.0, 0.0, 0usize); bins];
    for &i in indices {
        let p = model.predict_raw_one(dataset.x().row(i)).clamp(clip, 1.0 - clip);
        let b = ((p * bins as f64) as usize).min(bins - 1);
        sums[b].0 += p;
        sums[b].1 += dataset.t()[i] as f64;
        sums[b].2 += 1;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(b, (p, t, c))| CalibrationBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            count: c,
            mean_eta: (c > 0).then(|| p / c as f64),
            treated_rate: (c > 0).then(|| t / c as f64),
        })
        .collect())
}
