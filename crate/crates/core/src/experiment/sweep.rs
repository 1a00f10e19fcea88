use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig};
use crate::data::{
    generate_acic_like, generate_ihdp_like, generate_two_cluster_toy_labeled, load_csv, split, Dataset, GroundTruth,
    SplitIndices,
};
use crate::error::{Error, Result};
use crate::learner::{candidate_modes, EnsembleFamily, EnsembleMode, MemberOutputs, RankedPipeline};
use crate::linalg::Matrix;
use crate::metrics::pehe_values;
use crate::pipeline::{train_pipeline, Pipeline, PipelineHyperparams, Role, TrainReport};
use crate::propensity::{predict_eta, select_propensity, CvScore, PropensityModel, DEFAULT_CLIP};
use crate::rng::{derive_seed, stream};
use crate::selection::{
    fit_auxiliaries, proxy_score, rank_agreement, CandidatePredictions, ProxyKind, RankAgreement, ValidationContext,
};

/// Dataset, optional ground truth and the train/validation/test split of a run.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub truth: Option<GroundTruth>,
    pub split: SplitIndices,
}

/// Builds the dataset described by the config. Generated data depends only
/// on the master seed and the generator parameters.
pub fn materialize(cfg: &ExperimentConfig) -> Result<(Dataset, Option<GroundTruth>)> {
    let seed = derive_seed(cfg.seed, stream::GENERATOR, 0);
    match &cfg.dataset {
        DatasetSource::IhdpLike { config } => generate_ihdp_like(seed, config).map(|(d, g)| (d, Some(g))),
        DatasetSource::AcicLike { n, protocol } => generate_acic_like(seed, *n, protocol).map(|(d, g)| (d, Some(g))),
        DatasetSource::Toy { n } => generate_two_cluster_toy_labeled(seed, *n).map(|(d, _, _)| (d, None)),
        DatasetSource::Csv { path } => load_csv(path),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (dataset, truth) = materialize(cfg)?;
    let split = split(
        &dataset,
        cfg.split.test_fraction,
        cfg.split.validation_fraction,
        derive_seed(cfg.seed, stream::SPLIT, 0),
    )?;
    Ok(Prepared { dataset, truth, split })
}

/// One trained (or failed) sweep member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub role: Role,
    pub index: usize,
    pub seed: u64,
    pub hyperparams: PipelineHyperparams,
    pub pipeline: Option<Pipeline>,
    pub report: Option<TrainReport>,
    pub error: Option<String>,
}

impl MemberRecord {
    /// Validation factual MSE of the retained epoch.
    pub fn mu_risk(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.retained_validation_mse)
    }

    pub fn is_trained(&self) -> bool {
        self.pipeline.is_some()
    }
}

fn train_member(prepared: &Prepared, role: Role, index: usize, hp: &PipelineHyperparams, seed: u64) -> MemberRecord {
    let run = catch_unwind(AssertUnwindSafe(|| {
        train_pipeline(&prepared.dataset, &prepared.split, role, hp, seed)
    }));
    let (pipeline, report, error) = match run {
        Ok(Ok((p, r))) => (Some(p), Some(r), None),
        Ok(Err(e)) => (None, None, Some(e.to_string())),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (None, None, Some(format!("panic: {msg}")))
        }
    };
    MemberRecord {
        role,
        index,
        seed,
        hyperparams: hp.clone(),
        pipeline,
        report,
        error,
    }
}

/// Trains every member concurrently on the current rayon pool. Member seeds
/// depend only on the master seed, the role and the member index.
pub fn train_members(
    prepared: &Prepared,
    settings0: &[PipelineHyperparams],
    settings1: &[PipelineHyperparams],
    seed: u64,
) -> (Vec<MemberRecord>, Vec<MemberRecord>) {
    let jobs: Vec<(Role, usize, &PipelineHyperparams)> = settings0
        .iter()
        .enumerate()
        .map(|(k, h)| (Role::ControlDriven, k, h))
        .chain(settings1.iter().enumerate().map(|(k, h)| (Role::TreatmentDriven, k, h)))
        .collect();
    let records: Vec<MemberRecord> = jobs
        .par_iter()
        .map(|&(role, k, hp)| {
            let s = match role {
                Role::ControlDriven => derive_seed(seed, stream::SWEEP_CONTROL, k as u64),
                Role::TreatmentDriven => derive_seed(seed, stream::SWEEP_TREATMENT, k as u64),
            };
            train_member(prepared, role, k, hp, s)
        })
        .collect();
    let (a, b): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.role == Role::ControlDriven);
    (a, b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub members0: Vec<MemberRecord>,
    pub members1: Vec<MemberRecord>,
    pub eta: PropensityModel,
    pub propensity_scores: Vec<CvScore>,
}

pub fn run_sweep(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<SweepResult> {
    let (s0, s1) = cfg.sample_settings();
    let ((members0, members1), eta) = rayon::join(
        || train_members(prepared, &s0, &s1, cfg.seed),
        || {
            select_propensity(
                &prepared.dataset,
                &prepared.split.train,
                &cfg.propensity_grid,
                crate::learner::PROPENSITY_FOLDS,
                derive_seed(cfg.seed, stream::PROPENSITY, 0),
            )
        },
    );
    let (eta, propensity_scores) = eta?;
    Ok(SweepResult {
        members0,
        members1,
        eta,
        propensity_scores,
    })
}

/// Arm outputs `(h⁰∘φ, h¹∘φ)` of every trained member on all rows.
type Outputs = Vec<Option<(Vec<f64>, Vec<f64>)>>;

fn member_outputs(members: &[MemberRecord], x: &Matrix) -> Result<Outputs> {
    members
        .iter()
        .map(|m| m.pipeline.as_ref().map(|p| p.predict_outcomes(x)).transpose())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub id: usize,
    pub control: usize,
    pub treatment: usize,
    /// Proxy scores in [`ProxyKind::ALL`] order; empty for failed candidates.
    pub scores: BTreeMap<ProxyKind, f64>,
    pub pehe_within: Option<f64>,
    pub pehe_out: Option<f64>,
    pub failed: bool,
}

impl CandidateRow {
    pub fn sqrt_pehe_within(&self) -> Option<f64> {
        self.pehe_within.map(f64::sqrt)
    }

    pub fn sqrt_pehe_out(&self) -> Option<f64> {
        self.pehe_out.map(f64::sqrt)
    }
}

/// Aggregated candidates: every control member paired with every treatment
/// member through the shared propensity model, `id = control·ℓ₁ + treatment`.
pub fn score_candidates(cfg: &ExperimentConfig, prepared: &Prepared, sweep: &SweepResult) -> Result<Vec<CandidateRow>> {
    let d = &prepared.dataset;
    let sp = &prepared.split;
    let aux = fit_auxiliaries(
        d,
        &sp.train,
        &cfg.propensity_grid,
        derive_seed(cfg.seed, stream::AUXILIARIES, 0),
    )?;
    let ctx = ValidationContext::new(&aux, &d.subset(&sp.validation))?;
    let out0 = member_outputs(&sweep.members0, d.x())?;
    let out1 = member_outputs(&sweep.members1, d.x())?;
    let eta = predict_eta(&sweep.eta, d.x(), DEFAULT_CLIP);
    let within = sp.within_sample();
    let l1 = sweep.members1.len();

    let pairs: Vec<(usize, usize)> = (0..sweep.members0.len())
        .flat_map(|i| (0..l1).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let id = i * l1 + j;
            let (Some(a), Some(b)) = (&out0[i], &out1[j]) else {
                return Ok(CandidateRow {
                    id,
                    control: i,
                    treatment: j,
                    scores: BTreeMap::new(),
                    pehe_within: None,
                    pehe_out: None,
                    failed: true,
                });
            };
            let mix = |u: &[f64], v: &[f64]| -> Vec<f64> {
                (0..d.n()).map(|r| (1.0 - eta[r]) * u[r] + eta[r] * v[r]).collect()
            };
            let mu0 = mix(&a.0, &b.0);
            let mu1 = mix(&a.1, &b.1);
            let tau: Vec<f64> = mu0.iter().zip(&mu1).map(|(u, v)| v - u).collect();
            let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&r| v[r]).collect::<Vec<f64>>();
            let cand = CandidatePredictions {
                tau: Some(pick(&tau, &sp.validation)),
                outcomes: Some((pick(&mu0, &sp.validation), pick(&mu1, &sp.validation))),
            };
            let scores = ProxyKind::ALL
                .iter()
                .map(|&k| Ok((k, proxy_score(k, &cand, &ctx)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let pehe_on = |idx: &[usize]| -> Result<Option<f64>> {
                prepared
                    .truth
                    .as_ref()
                    .map(|g| pehe_values(&pick(&tau, idx), &pick(g.tau(), idx)))
                    .transpose()
            };
            Ok(CandidateRow {
                id,
                control: i,
                treatment: j,
                scores,
                pehe_within: pehe_on(&within)?,
                pehe_out: pehe_on(&sp.test)?,
                failed: false,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub kind: ProxyKind,
    pub winner: Option<usize>,
    pub score: Option<f64>,
    pub pehe_within: Option<f64>,
    pub pehe_out: Option<f64>,
    /// Agreement between the proxy and the within-sample PEHE, when known.
    pub agreement: Option<RankAgreement>,
}

/// Winner per proxy (argmin, ties to the lowest id) among live candidates.
pub fn select_per_proxy(rows: &[CandidateRow]) -> Result<Vec<SelectionRow>> {
    let live: Vec<&CandidateRow> = rows.iter().filter(|r| !r.failed).collect();
    ProxyKind::ALL
        .iter()
        .map(|&kind| {
            let mut best: Option<&CandidateRow> = None;
            for r in &live {
                let s = r.scores[&kind];
                if best.is_none_or(|b| s < b.scores[&kind]) {
                    best = Some(r);
                }
            }
            let agreement = if live.len() >= 2 && live.iter().all(|r| r.pehe_within.is_some()) {
                let u: Vec<f64> = live.iter().map(|r| r.pehe_within.expect("checked")).collect();
                let v: Vec<f64> = live.iter().map(|r| r.scores[&kind]).collect();
                Some(rank_agreement(&u, &v, u.len())?)
            } else {
                None
            };
            Ok(SelectionRow {
                kind,
                winner: best.map(|b| b.id),
                score: best.map(|b| b.scores[&kind]),
                pehe_within: best.and_then(|b| b.pehe_within),
                pehe_out: best.and_then(|b| b.pehe_out),
                agreement,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mode: EnsembleMode,
    pub mu_risk: f64,
    pub pehe_within: Option<f64>,
    pub pehe_out: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCurves {
    pub top_k: Vec<CurvePoint>,
    pub softmax: Vec<CurvePoint>,
    /// Index into the curve of the configured family with the smallest μ-risk.
    pub selected: usize,
    pub family: EnsembleFamily,
}

impl EnsembleCurves {
    pub fn selected_point(&self) -> &CurvePoint {
        match self.family {
            EnsembleFamily::TopK => &self.top_k[self.selected],
            EnsembleFamily::Softmax => &self.softmax[self.selected],
        }
    }
}

fn ranked(members: &[MemberRecord]) -> Vec<RankedPipeline> {
    let mut v: Vec<RankedPipeline> = members
        .iter()
        .filter_map(|m| {
            Some(RankedPipeline {
                pipeline: m.pipeline.clone()?,
                mu_risk: m.mu_risk()?,
            })
        })
        .collect();
    v.sort_by(|a, b| a.mu_risk.total_cmp(&b.mu_risk));
    v
}

/// Validation μ-risk and PEHE of every top-K and softmax ensemble.
pub fn ensemble_curves(cfg: &ExperimentConfig, prepared: &Prepared, sweep: &SweepResult) -> Result<EnsembleCurves> {
    let r0 = ranked(&sweep.members0);
    let r1 = ranked(&sweep.members1);
    if r0.is_empty() || r1.is_empty() {
        return Err(Error::Structure(
            "ensembles need at least one trained member per role".into(),
        ));
    }
    let d = &prepared.dataset;
    let sp = &prepared.split;
    let val = d.subset(&sp.validation);
    let on_val = MemberOutputs::compute(&r0, &r1, &sweep.eta, DEFAULT_CLIP, val.x())?;
    let all = MemberOutputs::compute(&r0, &r1, &sweep.eta, DEFAULT_CLIP, d.x())?;
    let within = sp.within_sample();
    let curve = |family: EnsembleFamily| -> Result<Vec<CurvePoint>> {
        candidate_modes(family, on_val.max_k())
            .into_iter()
            .map(|mode| {
                let tau = all.tau(mode)?;
                let pehe_on = |idx: &[usize]| -> Result<Option<f64>> {
                    prepared
                        .truth
                        .as_ref()
                        .map(|g| {
                            let a: Vec<f64> = idx.iter().map(|&r| tau[r]).collect();
                            let b: Vec<f64> = idx.iter().map(|&r| g.tau()[r]).collect();
                            pehe_values(&a, &b)
                        })
                        .transpose()
                };
                Ok(CurvePoint {
                    mode,
                    mu_risk: on_val.mu_risk(mode, val.t(), val.y())?,
                    pehe_within: pehe_on(&within)?,
                    pehe_out: pehe_on(&sp.test)?,
                })
            })
            .collect()
    };
    let top_k = curve(EnsembleFamily::TopK)?;
    let softmax = curve(EnsembleFamily::Softmax)?;
    let family = cfg.ensemble.family;
    let chosen = match family {
        EnsembleFamily::TopK => &top_k,
        EnsembleFamily::Softmax => &softmax,
    };
    let mut selected = 0;
    for (i, p) in chosen.iter().enumerate() {
        if p.mu_risk < chosen[selected].mu_risk {
            selected = i;
        }
    }
    Ok(EnsembleCurves {
        top_k,
        softmax,
        selected,
        family,
    })
}
