use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pipeline::{Pipeline, Role};
use crate::propensity::{predict_eta, PropensityModel};

/// A sweep member with its validation factual μ-risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPipeline {
    pub pipeline: Pipeline,
    pub mu_risk: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EnsembleMode {
    TopK { k: usize },
    Softmax { lambda: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleFamily {
    TopK,
    Softmax,
}

/// Averages of ranked control-driven and treatment-driven members, mixed by `η̂`.
/// Members are paired by rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members0: Vec<RankedPipeline>,
    pub members1: Vec<RankedPipeline>,
    pub eta: PropensityModel,
    pub clip: f64,
    pub mode: EnsembleMode,
}

/// Member weights for `risks` (sorted ascending) under `mode`.
/// Top-K puts `1/K` on the first `K`; softmax uses `exp(−λ·risk)` normalized
/// after subtracting the smallest exponent.
pub fn member_weights(risks: &[f64], mode: EnsembleMode) -> Result<Vec<f64>> {
    match mode {
        EnsembleMode::TopK { k } => {
            if k == 0 || k > risks.len() {
                return Err(Error::InvalidArgument(format!("K = {k} outside 1..={}", risks.len())));
            }
            Ok((0..risks.len())
                .map(|i| if i < k { 1.0 / k as f64 } else { 0.0 })
                .collect())
        }
        EnsembleMode::Softmax { lambda } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
            }
            if risks.iter().any(|r| !r.is_finite()) {
                return Err(Error::NonFinite("member μ-risk".into()));
            }
            let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = risks.iter().map(|r| (-lambda * (r - min)).exp()).collect();
            let z: f64 = e.iter().sum();
            Ok(e.into_iter().map(|v| v / z).collect())
        }
    }
}

fn sorted(mut members: Vec<RankedPipeline>, role: Role) -> Result<Vec<RankedPipeline>> {
    if members.is_empty() {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one member per arm".into(),
        ));
    }
    if members.iter().any(|m| m.pipeline.role != role) {
        return Err(Error::Structure(format!("ensemble members must all be {role:?}")));
    }
    members.sort_by(|a, b| a.mu_risk.total_cmp(&b.mu_risk));
    Ok(members)
}

fn weighted(values: &[Vec<f64>], weights: &[f64], mode: EnsembleMode) -> Vec<f64> {
    let n = values[0].len();
    match mode {
        // Sum then divide keeps K = 1 bitwise identical to the single member.
        EnsembleMode::TopK { k } => (0..n)
            .map(|i| values[..k].iter().map(|v| v[i]).sum::<f64>() / k as f64)
            .collect(),
        EnsembleMode::Softmax { .. } => (0..n)
            .map(|i| values.iter().zip(weights).map(|(v, w)| w * v[i]).sum())
            .collect(),
    }
}

impl EnsembleModel {
    pub fn new(
        members0: Vec<RankedPipeline>,
        members1: Vec<RankedPipeline>,
        eta: PropensityModel,
        clip: f64,
        mode: EnsembleMode,
    ) -> Result<Self> {
        let members0 = sorted(members0, Role::ControlDriven)?;
        let members1 = sorted(members1, Role::TreatmentDriven)?;
        if let EnsembleMode::TopK { k } = mode {
            if k == 0 || k > members0.len().min(members1.len()) {
                return Err(Error::InvalidArgument(format!(
                    "K = {k} outside 1..={}",
                    members0.len().min(members1.len())
                )));
            }
        }
        let model = Self {
            members0,
            members1,
            eta,
            clip,
            mode,
        };
        model.weights()?;
        Ok(model)
    }

    pub fn weights(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let r0: Vec<f64> = self.members0.iter().map(|m| m.mu_risk).collect();
        let r1: Vec<f64> = self.members1.iter().map(|m| m.mu_risk).collect();
        Ok((member_weights(&r0, self.mode)?, member_weights(&r1, self.mode)?))
    }

    pub fn predict_tau(&self, x: &Matrix) -> Result<Vec<f64>> {
        let outputs = MemberOutputs::compute(&self.members0, &self.members1, &self.eta, self.clip, x)?;
        outputs.tau(self.mode)
    }

    pub fn predict_outcomes(&self, x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let outputs = MemberOutputs::compute(&self.members0, &self.members1, &self.eta, self.clip, x)?;
        outputs.outcomes(self.mode)
    }
}

pub fn build_topk_ensemble(
    members0: Vec<RankedPipeline>,
    members1: Vec<RankedPipeline>,
    eta: PropensityModel,
    clip: f64,
    k: usize,
) -> Result<EnsembleModel> {
    EnsembleModel::new(members0, members1, eta, clip, EnsembleMode::TopK { k })
}

pub fn build_softmax_ensemble(
    members0: Vec<RankedPipeline>,
    members1: Vec<RankedPipeline>,
    eta: PropensityModel,
    clip: f64,
    lambda: f64,
) -> Result<EnsembleModel> {
    EnsembleModel::new(members0, members1, eta, clip, EnsembleMode::Softmax { lambda })
}

/// Member predictions on a fixed set of rows, cached so that many ensemble
/// settings can be scored cheaply.
#[derive(Clone, Debug)]
pub struct MemberOutputs {
    risks0: Vec<f64>,
    risks1: Vec<f64>,
    /// Per member: `(h⁰∘φ, h¹∘φ)` in outcome units.
    out0: Vec<(Vec<f64>, Vec<f64>)>,
    out1: Vec<(Vec<f64>, Vec<f64>)>,
    /// Per member `τ̂`, computed exactly as [`Pipeline::predict_tau`] does.
    tau0: Vec<Vec<f64>>,
    tau1: Vec<Vec<f64>>,
    eta: Vec<f64>,
}

impl MemberOutputs {
    /// `members*` must already be sorted by μ-risk.
    pub fn compute(
        members0: &[RankedPipeline],
        members1: &[RankedPipeline],
        eta: &PropensityModel,
        clip: f64,
        x: &Matrix,
    ) -> Result<Self> {
        let out = |ms: &[RankedPipeline]| {
            ms.iter()
                .map(|m| m.pipeline.predict_outcomes(x))
                .collect::<Result<Vec<_>>>()
        };
        let tau = |ms: &[RankedPipeline]| ms.iter().map(|m| m.pipeline.predict_tau(x)).collect::<Result<Vec<_>>>();
        Ok(Self {
            risks0: members0.iter().map(|m| m.mu_risk).collect(),
            risks1: members1.iter().map(|m| m.mu_risk).collect(),
            out0: out(members0)?,
            out1: out(members1)?,
            tau0: tau(members0)?,
            tau1: tau(members1)?,
            eta: predict_eta(eta, x, clip),
        })
    }

    pub fn max_k(&self) -> usize {
        self.out0.len().min(self.out1.len())
    }

    fn arm_average(
        &self,
        mode: EnsembleMode,
        pick: impl Fn(&(Vec<f64>, Vec<f64>)) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let w0 = member_weights(&self.risks0, mode)?;
        let w1 = member_weights(&self.risks1, mode)?;
        let v0: Vec<Vec<f64>> = self.out0.iter().map(&pick).collect();
        let v1: Vec<Vec<f64>> = self.out1.iter().map(&pick).collect();
        Ok((weighted(&v0, &w0, mode), weighted(&v1, &w1, mode)))
    }

    fn mix(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.eta.len())
            .map(|i| (1.0 - self.eta[i]) * a[i] + self.eta[i] * b[i])
            .collect()
    }

    pub fn tau(&self, mode: EnsembleMode) -> Result<Vec<f64>> {
        let w0 = member_weights(&self.risks0, mode)?;
        let w1 = member_weights(&self.risks1, mode)?;
        let (a, b) = (weighted(&self.tau0, &w0, mode), weighted(&self.tau1, &w1, mode));
        Ok(self.mix(&a, &b))
    }

    pub fn outcomes(&self, mode: EnsembleMode) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a0, b0) = self.arm_average(mode, |(m0, _)| m0.clone())?;
        let (a1, b1) = self.arm_average(mode, |(_, m1)| m1.clone())?;
        Ok((self.mix(&a0, &b0), self.mix(&a1, &b1)))
    }

    /// Factual μ-risk `mean (y − μ̂ᵗ(x))²` of the ensemble on these rows.
    pub fn mu_risk(&self, mode: EnsembleMode, t: &[u8], y: &[f64]) -> Result<f64> {
        let (m0, m1) = self.outcomes(mode)?;
        Ok((0..t.len())
            .map(|i| (y[i] - if t[i] == 1 { m1[i] } else { m0[i] }).powi(2))
            .sum::<f64>()
            / t.len() as f64)
    }
}

/// `λ = 10^{k/2}` for `k = −2..=16`.
pub fn lambda_grid() -> Vec<f64> {
    (-2..=16).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}

pub fn candidate_modes(family: EnsembleFamily, max_k: usize) -> Vec<EnsembleMode> {
    match family {
        EnsembleFamily::TopK => (1..=max_k).map(|k| EnsembleMode::TopK { k }).collect(),
        EnsembleFamily::Softmax => lambda_grid()
            .into_iter()
            .map(|lambda| EnsembleMode::Softmax { lambda })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCandidateScore {
    pub mode: EnsembleMode,
    pub mu_risk: f64,
}

/// Chooses the K or λ minimizing the ensemble's factual μ-risk on the
/// validation rows; ties keep the smaller value.
pub fn select_ensemble_hyperparam(
    outputs: &MemberOutputs,
    candidates: &[EnsembleMode],
    t: &[u8],
    y: &[f64],
) -> Result<(EnsembleMode, Vec<EnsembleCandidateScore>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no ensemble candidates".into()));
    }
    let scores = candidates
        .iter()
        .map(|&mode| {
            Ok(EnsembleCandidateScore {
                mode,
                mu_risk: outputs.mu_risk(mode, t, y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mu_risk < scores[best].mu_risk {
            best = i;
        }
    }
    Ok((scores[best].mode, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scaler;
    use crate::nn::{Activation, Mlp};

    fn constant(role: Role, mu0: f64, mu1: f64, risk: f64) -> RankedPipeline {
        let phi = Mlp::from_parts(
            vec![1, 1],
            Activation::Identity,
            false,
            vec![Matrix::identity(1)],
            vec![vec![0.0]],
        )
        .unwrap();
        let head = |c: f64| {
            Mlp::from_parts(
                vec![1, 1],
                Activation::Identity,
                false,
                vec![Matrix::zeros(1, 1)],
                vec![vec![c]],
            )
            .unwrap()
        };
        RankedPipeline {
            pipeline: Pipeline::new(role, phi, head(mu0), head(mu1), Scaler::identity(1)).unwrap(),
            mu_risk: risk,
        }
    }

    fn half() -> PropensityModel {
        PropensityModel::logistic(vec![0.0], 0.0)
    }

    fn x() -> Matrix {
        Matrix::from_rows(&[[0.3], [-1.0]]).unwrap()
    }

    #[test]
    fn softmax_weights_hand_checked() {
        let w = member_weights(&[0.0, std::f64::consts::LN_2], EnsembleMode::Softmax { lambda: 1.0 }).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        let w = member_weights(&[0.1, 0.2, 5.0], EnsembleMode::Softmax { lambda: 1e-12 }).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-9));
        let w = member_weights(&[0.1, 0.2, 5.0, 1e3], EnsembleMode::Softmax { lambda: 3.0 }).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn topk_matches_hand_average() {
        let m0 = vec![
            constant(Role::ControlDriven, 0.0, 1.0, 0.1),
            constant(Role::ControlDriven, 0.0, 2.0, 0.3),
            constant(Role::ControlDriven, 1.0, 4.0, 0.2),
            constant(Role::ControlDriven, 0.0, 100.0, 0.9),
        ];
        let m1 = vec![
            constant(Role::TreatmentDriven, 0.0, 3.0, 0.5),
            constant(Role::TreatmentDriven, 0.0, 6.0, 0.4),
            constant(Role::TreatmentDriven, 0.0, 9.0, 0.6),
        ];
        let e = build_topk_ensemble(m0, m1, half(), 0.01, 3).unwrap();
        // control τ̂ by rank: 1, 3, 2 → mean 2; treatment: 6, 3, 9 → mean 6
        let tau = e.predict_tau(&x()).unwrap();
        assert!(tau.iter().all(|&v| (v - 4.0).abs() < 1e-12));
        assert!(build_topk_ensemble(e.members0.clone(), e.members1.clone(), half(), 0.01, 4).is_err());
    }

    #[test]
    fn large_lambda_recovers_best_member() {
        let m0 = vec![
            constant(Role::ControlDriven, 0.0, 1.0, 0.1),
            constant(Role::ControlDriven, 0.0, 5.0, 0.2),
        ];
        let m1 = vec![
            constant(Role::TreatmentDriven, 0.0, 3.0, 0.5),
            constant(Role::TreatmentDriven, 0.0, 7.0, 0.4),
        ];
        let e = build_softmax_ensemble(m0, m1, half(), 0.01, 1e6).unwrap();
        let tau = e.predict_tau(&x()).unwrap();
        assert!(tau.iter().all(|&v| (v - 0.5 * (1.0 + 7.0)).abs() < 1e-6));
    }

    #[test]
    fn selection_prefers_dominant_member() {
        // y matches member 0 of each arm exactly.
        let m0 = vec![
            constant(Role::ControlDriven, 1.0, 2.0, 0.0),
            constant(Role::ControlDriven, 5.0, 9.0, 1.0),
        ];
        let m1 = vec![
            constant(Role::TreatmentDriven, 1.0, 2.0, 0.0),
            constant(Role::TreatmentDriven, -5.0, 9.0, 1.0),
        ];
        let out = MemberOutputs::compute(&m0, &m1, &half(), 0.01, &x()).unwrap();
        let (mode, scores) =
            select_ensemble_hyperparam(&out, &candidate_modes(EnsembleFamily::TopK, 2), &[0, 1], &[1.0, 2.0]).unwrap();
        assert_eq!(mode, EnsembleMode::TopK { k: 1 });
        assert_eq!(scores[0].mu_risk, 0.0);
        let (single, _) =
            select_ensemble_hyperparam(&out, &[EnsembleMode::TopK { k: 2 }], &[0, 1], &[1.0, 2.0]).unwrap();
        assert_eq!(single, EnsembleMode::TopK { k: 2 });
    }
}
