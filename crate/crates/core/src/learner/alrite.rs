use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pipeline::{train_pipeline, Pipeline, PipelineHyperparams, Role, TrainReport};
use crate::propensity::{predict_eta, select_propensity, CvScore, PropensityModel, PropensitySpec, DEFAULT_CLIP};
use crate::rng::{derive_seed, stream};

/// Folds used when cross-validating the propensity grid.
pub const PROPENSITY_FOLDS: usize = 5;

/// Control-driven and treatment-driven pipelines combined through `η̂`:
/// `τ̂(x) = (1−η̂(x))·τ̂₀(x) + η̂(x)·τ̂₁(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlriteModel {
    pub p0: Pipeline,
    pub p1: Pipeline,
    pub eta: PropensityModel,
    pub clip: f64,
}

/// Per-row ingredients of the aggregated estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub tau0: Vec<f64>,
    pub tau1: Vec<f64>,
    pub eta: Vec<f64>,
}

impl AlriteModel {
    pub fn new(p0: Pipeline, p1: Pipeline, eta: PropensityModel, clip: f64) -> Result<Self> {
        if p0.role != Role::ControlDriven || p1.role != Role::TreatmentDriven {
            return Err(Error::Structure(
                "p0 must be control-driven and p1 treatment-driven".into(),
            ));
        }
        if !(0.0..0.5).contains(&clip) {
            return Err(Error::InvalidArgument(format!("clip must lie in [0, 0.5), got {clip}")));
        }
        Ok(Self { p0, p1, eta, clip })
    }

    pub fn components(&self, x: &Matrix) -> Result<Components> {
        Ok(Components {
            tau0: self.p0.predict_tau(x)?,
            tau1: self.p1.predict_tau(x)?,
            eta: predict_eta(&self.eta, x, self.clip),
        })
    }

    /// Factual predictions `μ̂ᵗ = (1−η̂)·h₀ᵗ∘φ₀ + η̂·h₁ᵗ∘φ₁`, so that `τ̂ = μ̂¹ − μ̂⁰`.
    pub fn predict_outcomes(&self, x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let eta = predict_eta(&self.eta, x, self.clip);
        let (a0, a1) = self.p0.predict_outcomes(x)?;
        let (b0, b1) = self.p1.predict_outcomes(x)?;
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            (0..eta.len()).map(|i| (1.0 - eta[i]) * a[i] + eta[i] * b[i]).collect()
        };
        Ok((mix(&a0, &b0), mix(&a1, &b1)))
    }
}

pub fn combine(c: &Components) -> Vec<f64> {
    (0..c.eta.len())
        .map(|i| (1.0 - c.eta[i]) * c.tau0[i] + c.eta[i] * c.tau1[i])
        .collect()
}

pub fn alrite_predict(model: &AlriteModel, x: &Matrix) -> Result<Vec<f64>> {
    Ok(combine(&model.components(x)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub control: TrainReport,
    pub treatment: TrainReport,
    pub propensity_scores: Vec<CvScore>,
}

/// Trains both pipelines and the propensity model on `split.train`
/// (pipelines retain their best validation epoch). The three fits are
/// independent and run concurrently with seeds derived from `seed`.
pub fn alrite_fit(
    dataset: &Dataset,
    split: &SplitIndices,
    hp0: &PipelineHyperparams,
    hp1: &PipelineHyperparams,
    propensity_grid: &[PropensitySpec],
    seed: u64,
) -> Result<(AlriteModel, FitReport)> {
    let s0 = derive_seed(seed, stream::CONTROL_PIPELINE, 0);
    let s1 = derive_seed(seed, stream::TREATMENT_PIPELINE, 0);
    let se = derive_seed(seed, stream::PROPENSITY, 0);
    let ((r0, r1), re) = rayon::join(
        || {
            rayon::join(
                || train_pipeline(dataset, split, Role::ControlDriven, hp0, s0),
                || train_pipeline(dataset, split, Role::TreatmentDriven, hp1, s1),
            )
        },
        || select_propensity(dataset, &split.train, propensity_grid, PROPENSITY_FOLDS, se),
    );
    let (p0, rep0) = r0?;
    let (p1, rep1) = r1?;
    let (eta, scores) = re?;
    let model = AlriteModel::new(p0, p1, eta, DEFAULT_CLIP)?;
    Ok((
        model,
        FitReport {
            control: rep0,
            treatment: rep1,
            propensity_scores: scores,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCheck {
    /// `‖τ̂ − τ̂_η‖`: distance to the estimate aggregated with the true propensity.
    pub lhs: f64,
    /// `‖η̂ − η‖·(‖τ̂₀ − τ‖ + ‖τ̂₁ − τ‖)`.
    pub rhs: f64,
}

impl SensitivityCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// Both sides of the propensity-error inequality, with Euclidean norms over
/// the rows of `x` (not averaged, so the product on the right keeps
/// dominating the left).
pub fn eta_sensitivity_check(
    model: &AlriteModel,
    x: &Matrix,
    true_eta: &[f64],
    true_tau: &[f64],
) -> Result<SensitivityCheck> {
    if true_eta.len() != x.rows() || true_tau.len() != x.rows() {
        return Err(Error::Shape {
            context: "sensitivity check truth",
            expected: x.rows(),
            got: true_eta.len().min(true_tau.len()),
        });
    }
    let c = model.components(x)?;
    let tau_hat = combine(&c);
    let with_truth = combine(&Components {
        eta: true_eta.to_vec(),
        ..c.clone()
    });
    let norm = |f: &dyn Fn(usize) -> f64| (0..x.rows()).map(|i| f(i).powi(2)).sum::<f64>().sqrt();
    let lhs = norm(&|i| tau_hat[i] - with_truth[i]);
    let rhs =
        norm(&|i| c.eta[i] - true_eta[i]) * (norm(&|i| c.tau0[i] - true_tau[i]) + norm(&|i| c.tau1[i] - true_tau[i]));
    Ok(SensitivityCheck { lhs, rhs })
}
