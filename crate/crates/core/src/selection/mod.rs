//! Model selection without ground-truth effects: auxiliary nuisance models,
//! proxy metrics computed on the validation set, and rank statistics that
//! measure how well a proxy orders candidates by their true error.

mod kernel_ridge;
mod rank;

use serde::{Deserialize, Serialize};

pub use kernel_ridge::{
    fit_cv, median_distance, KernelRidge, BANDWIDTH_MULTIPLIERS, CV_FOLDS, MAX_FIT_POINTS, RIDGE_GRID,
};
pub use rank::{average_ranks, dcg, kendall, rank_agreement, spearman, RankAgreement};

use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::propensity::{predict_eta, select_propensity, PropensityModel, PropensitySpec, DEFAULT_CLIP};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Nuisance models fitted on training indices: outcome regressions per arm,
/// the mean outcome `m̂`, and a propensity model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Auxiliaries {
    pub scaler: Scaler,
    pub mu0: KernelRidge,
    pub mu1: KernelRidge,
    pub m: KernelRidge,
    pub eta: PropensityModel,
    pub clip: f64,
}

pub fn fit_auxiliaries(
    dataset: &Dataset,
    train: &[usize],
    propensity_grid: &[PropensitySpec],
    seed: u64,
) -> Result<Auxiliaries> {
    let sub = dataset.subset(train);
    sub.require_both_arms("auxiliary fit")?;
    let scaler = Scaler::fit(dataset, train)?;
    let x = scaler.transform_x(sub.x())?;
    let mut rng = rng_from_seed(derive_seed(seed, stream::AUXILIARIES, 0));
    let arm = |a: u8| -> Result<KernelRidge> {
        let idx = sub.arm_indices(a);
        let y: Vec<f64> = idx.iter().map(|&i| sub.y()[i]).collect();
        fit_cv(
            &x.select_rows(&idx),
            &y,
            &mut rng_from_seed(derive_seed(seed, stream::AUXILIARIES, 1 + a as u64)),
        )
    };
    let mu0 = arm(0)?;
    let mu1 = arm(1)?;
    let m = fit_cv(&x, sub.y(), &mut rng)?;
    let (eta, _) = select_propensity(
        dataset,
        train,
        propensity_grid,
        5,
        derive_seed(seed, stream::AUXILIARIES, 3),
    )?;
    Ok(Auxiliaries {
        scaler,
        mu0,
        mu1,
        m,
        eta,
        clip: DEFAULT_CLIP,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    MuRisk,
    MuRiskIptw,
    RRisk,
    TauNaive,
    Tau1nni,
    TauIptw,
    TauU,
    TauDr,
}

impl ProxyKind {
    pub const ALL: [ProxyKind; 8] = [
        ProxyKind::MuRisk,
        ProxyKind::MuRiskIptw,
        ProxyKind::RRisk,
        ProxyKind::TauNaive,
        ProxyKind::Tau1nni,
        ProxyKind::TauIptw,
        ProxyKind::TauU,
        ProxyKind::TauDr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProxyKind::MuRisk => "mu_risk",
            ProxyKind::MuRiskIptw => "mu_risk_iptw",
            ProxyKind::RRisk => "r_risk",
            ProxyKind::TauNaive => "tau_naive",
            ProxyKind::Tau1nni => "tau_1nni",
            ProxyKind::TauIptw => "tau_iptw",
            ProxyKind::TauU => "tau_u",
            ProxyKind::TauDr => "tau_dr",
        }
    }

    fn needs_outcomes(self) -> bool {
        matches!(self, ProxyKind::MuRisk | ProxyKind::MuRiskIptw | ProxyKind::TauDr)
    }

    fn needs_tau(self) -> bool {
        !matches!(self, ProxyKind::MuRisk | ProxyKind::MuRiskIptw)
    }
}

impl std::fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProxyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProxyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown proxy kind `{s}`")))
    }
}

/// A candidate's predictions on the validation rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidatePredictions {
    pub tau: Option<Vec<f64>>,
    /// Factual-capable predictions `(μ̂⁰, μ̂¹)`.
    pub outcomes: Option<(Vec<f64>, Vec<f64>)>,
}

/// Everything the proxies need about the validation rows, evaluated once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationContext {
    pub t: Vec<u8>,
    pub y: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub m: Vec<f64>,
    /// Clipped propensity.
    pub eta: Vec<f64>,
    /// Outcome of the opposite-arm nearest neighbour within the validation set.
    pub nn_outcome: Vec<f64>,
}

impl ValidationContext {
    pub fn new(aux: &Auxiliaries, validation: &Dataset) -> Result<Self> {
        validation.require_both_arms("validation set")?;
        let x = aux.scaler.transform_x(validation.x())?;
        let t = validation.t();
        let nn_outcome = (0..validation.n())
            .map(|i| {
                let mut best = (f64::INFINITY, 0usize);
                for j in 0..validation.n() {
                    if t[j] != t[i] {
                        let d = squared_distance(x.row(i), x.row(j));
                        if d < best.0 {
                            best = (d, j);
                        }
                    }
                }
                validation.y()[best.1]
            })
            .collect();
        Ok(Self {
            t: t.to_vec(),
            y: validation.y().to_vec(),
            mu0: aux.mu0.predict(&x),
            mu1: aux.mu1.predict(&x),
            m: aux.m.predict(&x),
            eta: predict_eta(&aux.eta, validation.x(), aux.clip),
            nn_outcome,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Inverse propensity of arm `arm` at row `i`.
    fn rho(&self, arm: u8, i: usize) -> f64 {
        if arm == 1 {
            1.0 / self.eta[i]
        } else {
            1.0 / (1.0 - self.eta[i])
        }
    }
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Shape {
            context: "candidate predictions",
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// Mean over the validation rows of the proxy's per-row expression.
pub fn proxy_score(kind: ProxyKind, cand: &CandidatePredictions, ctx: &ValidationContext) -> Result<f64> {
    let n = ctx.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    let missing = |what: &str| Error::KindMismatch {
        kind: kind.name().into(),
        missing: what.into(),
    };
    let outcomes = if kind.needs_outcomes() {
        let o = cand
            .outcomes
            .as_ref()
            .ok_or_else(|| missing("factual outcome predictions"))?;
        check_len(&o.0, n)?;
        check_len(&o.1, n)?;
        Some(o)
    } else {
        None
    };
    let tau = if kind.needs_tau() {
        let t = cand.tau.as_deref().ok_or_else(|| missing("effect predictions"))?;
        check_len(t, n)?;
        t
    } else {
        &[][..]
    };
    let mu_t = |i: usize| {
        let (a, b) = outcomes.expect("checked");
        if ctx.t[i] == 1 {
            b[i]
        } else {
            a[i]
        }
    };
    let mut total = 0.0;
    for i in 0..n {
        let (t, y) = (ctx.t[i], ctx.y[i]);
        let sign = 2.0 * t as f64 - 1.0;
        let v = match kind {
            ProxyKind::MuRisk => (y - mu_t(i)).powi(2),
            ProxyKind::MuRiskIptw => ctx.rho(t, i) * (y - mu_t(i)).powi(2),
            ProxyKind::RRisk => (tau[i] * (t as f64 - ctx.eta[i]) - (y - ctx.m[i])).powi(2),
            ProxyKind::TauNaive => (tau[i] - (ctx.mu1[i] - ctx.mu0[i])).powi(2),
            ProxyKind::Tau1nni => (tau[i] - sign * (y - ctx.nn_outcome[i])).powi(2),
            ProxyKind::TauIptw => (tau[i] - sign * ctx.rho(t, i) * y).powi(2),
            ProxyKind::TauU => (tau[i] - sign * ctx.rho(1 - t, i) * (y - ctx.m[i])).powi(2),
            ProxyKind::TauDr => {
                let (a, b) = outcomes.expect("checked");
                (tau[i] - ((b[i] - a[i]) + sign * ctx.rho(t, i) * (y - mu_t(i)))).powi(2)
            }
        };
        total += v;
    }
    Ok(total / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub winner: usize,
    pub scores: Vec<f64>,
}

/// Candidate with the smallest proxy score; ties keep the lowest index.
pub fn select_candidate(
    candidates: &[CandidatePredictions],
    kind: ProxyKind,
    ctx: &ValidationContext,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to select from".into()));
    }
    let scores = candidates
        .iter()
        .map(|c| proxy_score(kind, c, ctx))
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[winner] || (scores[winner].is_nan() && !s.is_nan()) {
            winner = i;
        }
    }
    Ok(Selection { winner, scores })
}
