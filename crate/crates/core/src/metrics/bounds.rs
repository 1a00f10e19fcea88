//! Computable upper bounds on the within-sample PEHE of a single pipeline
//! (`m1`) and of a control/treatment pipeline pair (`m2`, `m3`).
//!
//! Twin distances are measured in latent space. The bounds are certified only
//! when the Lipschitz constant `L` of the true response surfaces (as functions
//! on the latent space) is known; otherwise every term is still reported but
//! no bound value is produced.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pipeline::{compound_loss, Pipeline, PipelineHyperparams};
use crate::twin::{cross_pipeline_twins, mirror_twins};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum LipschitzSource {
    Known(f64),
    Unknown,
}

impl LipschitzSource {
    fn value(self) -> Result<Option<f64>> {
        match self {
            LipschitzSource::Known(l) if l.is_finite() && l >= 0.0 => Ok(Some(l)),
            LipschitzSource::Known(l) => Err(Error::Hypothesis(format!(
                "Lipschitz constant must be finite and ≥ 0, got {l}"
            ))),
            LipschitzSource::Unknown => Ok(None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    M1,
    M2,
    M3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// `None` in report-only mode.
    pub bound: Option<f64>,
    /// The PEHE the bound applies to: the pipeline's within-sample PEHE for
    /// `m1`, the plug-in PEHE built from `τ̄ᵢ` for `m2`/`m3`.
    pub pehe: f64,
    pub slack: Option<f64>,
    pub lipschitz_truth: Option<f64>,
    pub lipschitz_heads: f64,
    pub terms: BTreeMap<String, f64>,
    /// True when `L` is known and the heads carry no output normalization,
    /// so that `lipschitz_heads` is a valid constant.
    pub certified: bool,
    pub n: usize,
}

fn head_lipschitz(p: &Pipeline, arm: u8) -> f64 {
    p.head(arm).lipschitz_upper_bound() * p.scaler.y_scale
}

fn heads_certifiable(pipes: &[&Pipeline]) -> bool {
    pipes
        .iter()
        .all(|p| !p.h0.output_normalization() && !p.h1.output_normalization())
}

fn require_truth(truth: &GroundTruth, dataset: &Dataset) -> Result<()> {
    if truth.len() != dataset.n() {
        return Err(Error::Shape {
            context: "ground truth rows",
            expected: dataset.n(),
            got: truth.len(),
        });
    }
    dataset.require_both_arms("bound evaluation")
}

fn twin_distance_sum(latent_rows: impl Iterator<Item = f64>) -> f64 {
    latent_rows.map(|d| d * d).sum()
}

fn finish(
    kind: BoundKind,
    pehe: f64,
    value: Option<f64>,
    l: Option<f64>,
    l_hat: f64,
    terms: BTreeMap<String, f64>,
    certifiable: bool,
    n: usize,
) -> BoundReport {
    BoundReport {
        kind,
        bound: value,
        pehe,
        slack: value.map(|b| b - pehe),
        lipschitz_truth: l,
        lipschitz_heads: l_hat,
        terms,
        certified: value.is_some() && certifiable,
        n,
    }
}

/// Single-embedding bound:
/// `M₁ = (4/n)[Σ(1+wᵢ)(ν̂^{tᵢ}(zᵢ)−yᵢ)² + (L²+L̂²)Σ‖zᵢ−zᵢᵐ‖²]`, with the heads
/// of `p` as `ν̂⁰, ν̂¹` and twins computed in `p`'s latent space.
pub fn bound_m1(
    p: &Pipeline,
    dataset: &Dataset,
    truth: &GroundTruth,
    lipschitz: LipschitzSource,
) -> Result<BoundReport> {
    require_truth(truth, dataset)?;
    let l = lipschitz.value()?;
    let n = dataset.n();
    let latent = p.latent(dataset.x())?;
    let twins = mirror_twins(&latent, dataset.t())?;
    let (m0, m1) = p.predict_outcomes(dataset.x())?;

    let mut factual = 0.0;
    for i in 0..n {
        let pred = if dataset.t()[i] == 1 { m1[i] } else { m0[i] };
        factual += (1.0 + twins.weight[i] as f64) * (pred - dataset.y()[i]).powi(2);
    }
    let distance = twin_distance_sum(twins.twin_distance.iter().copied());
    let l_hat = head_lipschitz(p, 0).max(head_lipschitz(p, 1));
    let tau_hat: Vec<f64> = m0.iter().zip(&m1).map(|(a, b)| b - a).collect();
    let pehe = super::pehe_values(&tau_hat, truth.tau())?;

    let value = l.map(|l| 4.0 / n as f64 * (factual + (l * l + l_hat * l_hat) * distance));
    let terms = BTreeMap::from([
        ("weighted_factual".to_string(), factual),
        ("twin_distance_sq_sum".to_string(), distance),
    ]);
    Ok(finish(
        BoundKind::M1,
        pehe,
        value,
        l,
        l_hat,
        terms,
        heads_certifiable(&[p]),
        n,
    ))
}

/// Quantities shared by `m2` and `m3`.
struct PairTerms {
    n0: f64,
    n1: f64,
    /// `Σ_{t=1} w (h₀¹∘φ₀ − y)²`
    cross_treated_weighted: f64,
    /// `Σ_{t=0} w (h₁⁰∘φ₁ − y)²`
    cross_control_weighted: f64,
    cross_treated: f64,
    cross_control: f64,
    own_control: f64,
    own_treated: f64,
    distance: f64,
    kappa_y: f64,
    plug_in_pehe: f64,
    l_hat: f64,
}

fn pair_terms(p0: &Pipeline, p1: &Pipeline, dataset: &Dataset, truth: &GroundTruth) -> Result<PairTerms> {
    require_truth(truth, dataset)?;
    let (x, t, y) = (dataset.x(), dataset.t(), dataset.y());
    let twins = cross_pipeline_twins(&p0.latent(x)?, &p1.latent(x)?, t)?;
    let (h00, h01) = p0.predict_outcomes(x)?;
    let (h10, h11) = p1.predict_outcomes(x)?;
    let mut s = PairTerms {
        n0: dataset.n_control() as f64,
        n1: dataset.n_treated() as f64,
        cross_treated_weighted: 0.0,
        cross_control_weighted: 0.0,
        cross_treated: 0.0,
        cross_control: 0.0,
        own_control: 0.0,
        own_treated: 0.0,
        distance: twin_distance_sum(twins.twin_distance.iter().copied()),
        kappa_y: 0.0,
        plug_in_pehe: 0.0,
        l_hat: head_lipschitz(p0, 1).max(head_lipschitz(p1, 0)),
    };
    for i in 0..dataset.n() {
        let w = twins.weight[i] as f64;
        let tau_bar = if t[i] == 0 {
            let cross = (h10[i] - y[i]).powi(2);
            s.cross_control_weighted += w * cross;
            s.cross_control += cross;
            s.own_control += (h00[i] - y[i]).powi(2);
            h01[i] - y[i]
        } else {
            let cross = (h01[i] - y[i]).powi(2);
            s.cross_treated_weighted += w * cross;
            s.cross_treated += cross;
            s.own_treated += (h11[i] - y[i]).powi(2);
            y[i] - h10[i]
        };
        s.kappa_y += (1.0 + w) * (y[i] - truth.mu(t[i], i)).powi(2);
        s.plug_in_pehe += (tau_bar - truth.tau()[i]).powi(2);
    }
    s.plug_in_pehe /= dataset.n() as f64;
    Ok(s)
}

/// Plug-in effects `τ̄ᵢ = (1−tᵢ)(h₀¹∘φ₀(xᵢ)−yᵢ) + tᵢ(yᵢ−h₁⁰∘φ₁(xᵢ))`.
pub fn plug_in_effects(p0: &Pipeline, p1: &Pipeline, dataset: &Dataset) -> Result<Vec<f64>> {
    let (_, h01) = p0.predict_outcomes(dataset.x())?;
    let (h10, _) = p1.predict_outcomes(dataset.x())?;
    Ok((0..dataset.n())
        .map(|i| {
            let y = dataset.y()[i];
            if dataset.t()[i] == 0 {
                h01[i] - y
            } else {
                y - h10[i]
            }
        })
        .collect())
}

/// Two-pipeline bound
/// `M₂ = (5/n)[Σ_{t=1}w(h₀¹∘φ₀−y)² + Σ_{t=0}w(h₁⁰∘φ₁−y)² + (L²+L̂²)Σ‖φ_{tᵢ}(xᵢ)−φ_{tᵢ}(xᵢᵐ)‖² + κ_Y]`
/// with cross-pipeline twins and `κ_Y = Σ(1+wᵢ)(yᵢ−μ^{tᵢ}(xᵢ))²`.
pub fn bound_m2(
    p0: &Pipeline,
    p1: &Pipeline,
    dataset: &Dataset,
    truth: &GroundTruth,
    lipschitz: LipschitzSource,
) -> Result<BoundReport> {
    let l = lipschitz.value()?;
    let s = pair_terms(p0, p1, dataset, truth)?;
    let n = dataset.n();
    let value = l.map(|l| {
        5.0 / n as f64
            * (s.cross_treated_weighted
                + s.cross_control_weighted
                + (l * l + s.l_hat * s.l_hat) * s.distance
                + s.kappa_y)
    });
    let terms = BTreeMap::from([
        ("cross_treated_weighted".to_string(), s.cross_treated_weighted),
        ("cross_control_weighted".to_string(), s.cross_control_weighted),
        ("twin_distance_sq_sum".to_string(), s.distance),
        ("kappa_y".to_string(), s.kappa_y),
    ]);
    Ok(finish(
        BoundKind::M2,
        s.plug_in_pehe,
        value,
        l,
        s.l_hat,
        terms,
        heads_certifiable(&[p0, p1]),
        n,
    ))
}

/// Loss hyper-parameters under which the loss-based bound holds:
/// `α₀ = (1−p)(L²+L̂²)`, `α₁ = p(L²+L̂²)`, `β₀ = β₁ = 1`, `p = n₁/n`.
pub fn m3_hyperparams(
    base0: &PipelineHyperparams,
    base1: &PipelineHyperparams,
    l: f64,
    l_hat: f64,
    n0: usize,
    n1: usize,
) -> (PipelineHyperparams, PipelineHyperparams) {
    let p = n1 as f64 / (n0 + n1) as f64;
    let c = l * l + l_hat * l_hat;
    let hp0 = PipelineHyperparams {
        alpha: (1.0 - p) * c,
        beta: 1.0,
        ..base0.clone()
    };
    let hp1 = PipelineHyperparams {
        alpha: p * c,
        beta: 1.0,
        ..base1.clone()
    };
    (hp0, hp1)
}

/// Loss-based bound
/// `M₃ = 5[ℒ(𝒫₀)+ℒ(𝒫₁) − γ₀‖𝒫₀‖² − γ₁‖𝒫₁‖² + κ_Y/n − (1/n₀)Σ_{t=0}(h₀⁰∘φ₀−y)²
///  − (1/n₁)Σ_{t=1}(h₁¹∘φ₁−y)² − (1/n)(Σ_{t=0}(h₁⁰∘φ₁−y)² + Σ_{t=1}(h₀¹∘φ₀−y)²)]`,
/// with both losses evaluated (in outcome units) at the [`m3_hyperparams`] setting.
pub fn bound_m3(
    p0: &Pipeline,
    p1: &Pipeline,
    dataset: &Dataset,
    truth: &GroundTruth,
    lipschitz: LipschitzSource,
    gamma0: f64,
    gamma1: f64,
) -> Result<BoundReport> {
    let l = lipschitz.value()?;
    let s = pair_terms(p0, p1, dataset, truth)?;
    let n = dataset.n();
    let mut terms = BTreeMap::from([
        ("kappa_y".to_string(), s.kappa_y),
        ("own_control".to_string(), s.own_control),
        ("own_treated".to_string(), s.own_treated),
        ("cross_control".to_string(), s.cross_control),
        ("cross_treated".to_string(), s.cross_treated),
    ]);
    let value = match l {
        None => None,
        Some(l) => {
            let (hp0, hp1) = m3_hyperparams(
                &PipelineHyperparams {
                    gamma: gamma0,
                    ..PipelineHyperparams::default()
                },
                &PipelineHyperparams {
                    gamma: gamma1,
                    ..PipelineHyperparams::default()
                },
                l,
                s.l_hat,
                dataset.n_control(),
                dataset.n_treated(),
            );
            let loss0 = outcome_unit_loss(p0, dataset, &hp0)?;
            let loss1 = outcome_unit_loss(p1, dataset, &hp1)?;
            let reg = gamma0 * p0.param_norm_sq() + gamma1 * p1.param_norm_sq();
            terms.insert("loss_control_pipeline".into(), loss0);
            terms.insert("loss_treatment_pipeline".into(), loss1);
            terms.insert("regularization".into(), reg);
            Some(
                5.0 * (loss0 + loss1 - reg + s.kappa_y / n as f64
                    - s.own_control / s.n0
                    - s.own_treated / s.n1
                    - (s.cross_control + s.cross_treated) / n as f64),
            )
        }
    };
    Ok(finish(
        BoundKind::M3,
        s.plug_in_pehe,
        value,
        l,
        s.l_hat,
        terms,
        heads_certifiable(&[p0, p1]),
        n,
    ))
}

/// Compound loss of `p` on raw data, with the data terms expressed in
/// outcome units (the working-unit terms times `y_scale²`).
fn outcome_unit_loss(p: &Pipeline, dataset: &Dataset, hp: &PipelineHyperparams) -> Result<f64> {
    let x = p.scaler.transform_x(dataset.x())?;
    let y: Vec<f64> = dataset.y().iter().map(|&v| p.scaler.transform_y(v)).collect();
    let twins = mirror_twins(&p.phi.forward_batch(&x)?, dataset.t())?;
    let parts = compound_loss(p, &x, dataset.t(), &y, &twins, hp)?;
    let s2 = p.scaler.y_scale * p.scaler.y_scale;
    // The twin-distance term lives in latent space and is not rescaled.
    Ok(s2 * (parts.factual_own + parts.factual_other) + parts.counterfactual + parts.regularization)
}

/// Operator norm `‖A⁻ᵀβ‖` of `x ↦ βᵀx` seen through the embedding `z = Ax + b`.
pub fn latent_lipschitz(a: &Matrix, beta: &[f64]) -> Result<f64> {
    if a.rows() != a.cols() || beta.len() != a.cols() {
        return Err(Error::Shape {
            context: "latent Lipschitz",
            expected: a.cols(),
            got: beta.len(),
        });
    }
    let inv = a
        .to_nalgebra()
        .try_inverse()
        .ok_or_else(|| Error::Hypothesis("embedding matrix is singular".into()))?;
    let v = inv.transpose() * nalgebra::DVector::from_column_slice(beta);
    Ok(v.norm())
}
