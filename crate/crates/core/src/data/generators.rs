//! Deterministic synthetic benchmark generators.
//!
//! The IHDP-like and ACIC-like generators reproduce the structure of the two
//! public benchmarks (response-surface shapes, dimensions, overlap) without
//! their real covariates. Covariate marginals are stand-ins: continuous
//! columns are standard normal, binary columns Bernoulli(0.5), counts Poisson(2).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureKind, GroundTruth};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, rng_from_seed, stream};

const MAX_RETRIES: u64 = 10;

/// Lower/upper clip applied to generating propensities of the ACIC-like protocol.
pub const PROPENSITY_CLIP: (f64, f64) = (0.05, 0.95);

#[inline]
pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// How treatment is assigned in the IHDP-like generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assignment {
    /// `T ~ Ber(p_treat)` independently of covariates.
    Bernoulli,
    /// `T ~ Ber(σ(logit(p_treat) + strength·⟨x, v⟩/√d))` for a random unit direction `v`.
    Confounded { strength: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IhdpConfig {
    pub n: usize,
    pub d: usize,
    /// Leading columns that are continuous; the rest are binary.
    pub n_continuous: usize,
    pub p_treat: f64,
    /// Support of each coefficient of `β`.
    pub beta_grid: Vec<f64>,
    /// Sampling weights over `beta_grid`.
    pub beta_weights: Vec<f64>,
    /// Target mean effect over treated samples.
    pub att: f64,
    pub noise_sd: f64,
    pub assignment: Assignment,
}

impl Default for IhdpConfig {
    fn default() -> Self {
        Self {
            n: 747,
            d: 25,
            n_continuous: 6,
            p_treat: 139.0 / 747.0,
            beta_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            beta_weights: vec![0.6, 0.1, 0.1, 0.1, 0.1],
            att: 4.0,
            noise_sd: 1.0,
            assignment: Assignment::Bernoulli,
        }
    }
}

impl IhdpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::Config(format!("ihdp_like.n must be ≥ 20, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::Config("ihdp_like.d must be ≥ 1".into()));
        }
        if self.n_continuous > self.d {
            return Err(Error::Config(format!(
                "ihdp_like.n_continuous ({}) exceeds d ({})",
                self.n_continuous, self.d
            )));
        }
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(Error::Config(format!(
                "ihdp_like.p_treat must lie in (0,1), got {}",
                self.p_treat
            )));
        }
        if self.beta_grid.is_empty() || self.beta_grid.len() != self.beta_weights.len() {
            return Err(Error::Config(
                "ihdp_like.beta_grid and beta_weights must be non-empty and of equal length".into(),
            ));
        }
        if self.beta_weights.iter().any(|w| !(*w >= 0.0)) || self.beta_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "ihdp_like.beta_weights must be non-negative with positive sum".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("ihdp_like.noise_sd must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// IHDP-style data: `μ⁰ = exp⟨x+0.5, β⟩`, `μ¹ = ⟨x+0.5, β⟩ + ω`, with `ω`
/// chosen so that the treated-sample mean of `μ¹ − μ⁰` equals `att`.
pub fn generate_ihdp_like(seed: u64, config: &IhdpConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    with_retries(seed, |rng| ihdp_attempt(rng, config))
}

fn ihdp_attempt(rng: &mut ChaCha8Rng, cfg: &IhdpConfig) -> Result<Option<(Dataset, GroundTruth)>> {
    let (n, d) = (cfg.n, cfg.d);
    let total: f64 = cfg.beta_weights.iter().sum();
    let beta: Vec<f64> = (0..d)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            for (g, w) in cfg.beta_grid.iter().zip(&cfg.beta_weights) {
                if u < *w {
                    return *g;
                }
                u -= w;
            }
            *cfg.beta_grid.last().expect("validated non-empty")
        })
        .collect();

    let mut kinds = vec![FeatureKind::Continuous; cfg.n_continuous];
    kinds.resize(d, FeatureKind::Binary);
    let x = sample_covariates(rng, n, &kinds);

    let direction: Vec<f64> = match cfg.assignment {
        Assignment::Bernoulli => Vec::new(),
        Assignment::Confounded { .. } => {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = crate::linalg::l2_norm(&v).max(1e-12);
            v.into_iter().map(|c| c / norm).collect()
        }
    };
    let base_logit = (cfg.p_treat / (1.0 - cfg.p_treat)).ln();
    let propensity: Vec<f64> = (0..n)
        .map(|i| match cfg.assignment {
            Assignment::Bernoulli => cfg.p_treat,
            Assignment::Confounded { strength } => {
                let proj = crate::linalg::dot(x.row(i), &direction) * (d as f64).sqrt() / d as f64;
                sigmoid(base_logit + strength * proj)
            }
        })
        .collect();
    let t: Vec<u8> = propensity.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
    if !both_arms(&t) {
        return Ok(None);
    }

    let s: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().zip(&beta).map(|(xi, b)| (xi + 0.5) * b).sum())
        .collect();
    let treated: Vec<usize> = (0..n).filter(|&i| t[i] == 1).collect();
    let omega = cfg.att + treated.iter().map(|&i| s[i].exp() - s[i]).sum::<f64>() / treated.len() as f64;
    let mu0: Vec<f64> = s.iter().map(|v| v.exp()).collect();
    let mu1: Vec<f64> = s.iter().map(|v| v + omega).collect();

    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let y: Vec<f64> = (0..n)
        .map(|i| if t[i] == 1 { mu1[i] } else { mu0[i] } + noise.sample(rng))
        .collect();
    let dataset = Dataset::new(x, t, y, kinds)?;
    let truth = GroundTruth::new(mu0, mu1)?.with_propensity(propensity)?;
    Ok(Some((dataset, truth)))
}

/// One additive component of an ACIC-style surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Zero,
    /// `c₀ + c₁x + c₂x² + c₃x³` (at most four coefficients).
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `low` for `x ≤ threshold`, `high` otherwise.
    Step {
        threshold: f64,
        low: f64,
        high: f64,
    },
    /// `1[x > threshold]`.
    Indicator {
        threshold: f64,
    },
}

impl Term {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Term::Zero => 0.0,
            Term::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Term::Step { threshold, low, high } => {
                if x <= *threshold {
                    *low
                } else {
                    *high
                }
            }
            Term::Indicator { threshold } => f64::from(u8::from(x > *threshold)),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Term::Polynomial { coeffs } = self {
            if coeffs.len() > 4 {
                return Err(Error::Config(format!(
                    "polynomial terms have degree ≤ 3, got {} coefficients",
                    coeffs.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link {
    Identity,
    Sigmoid,
    Clip { lo: f64, hi: f64 },
}

impl Link {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Link::Identity => u,
            Link::Sigmoid => sigmoid(u),
            Link::Clip { lo, hi } => u.clamp(lo, hi),
        }
    }
}

/// `g(f₁(x_a) + f₂(x_b) + f₃(x_a)·f₄(x_b))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub feature_a: usize,
    pub feature_b: usize,
    pub f1: Term,
    pub f2: Term,
    pub f3: Term,
    pub f4: Term,
    pub link: Link,
}

impl Surface {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let (a, b) = (x[self.feature_a], x[self.feature_b]);
        self.link
            .apply(self.f1.eval(a) + self.f2.eval(b) + self.f3.eval(a) * self.f4.eval(b))
    }

    fn validate(&self, d: usize, name: &str) -> Result<()> {
        if self.feature_a >= d || self.feature_b >= d {
            return Err(Error::Config(format!("{name}: feature index out of range for d = {d}")));
        }
        for term in [&self.f1, &self.f2, &self.f3, &self.f4] {
            term.validate()?;
        }
        if let Link::Clip { lo, hi } = self.link {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name}: clip link needs lo ≤ hi")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcicProtocol {
    pub n_continuous: usize,
    pub n_count: usize,
    pub n_binary: usize,
    pub propensity: Surface,
    pub outcome0: Surface,
    pub outcome1: Surface,
    pub noise_scale: f64,
}

impl Default for AcicProtocol {
    /// 58 covariates (23 continuous, 30 count-valued, 5 binary) with a
    /// nonlinear, imbalanced assignment and heterogeneous effect.
    fn default() -> Self {
        Self {
            n_continuous: 23,
            n_count: 30,
            n_binary: 5,
            propensity: Surface {
                feature_a: 0,
                feature_b: 1,
                f1: Term::Polynomial {
                    coeffs: vec![-0.6, 0.9],
                },
                f2: Term::Step {
                    threshold: 0.0,
                    low: -0.4,
                    high: 0.4,
                },
                f3: Term::Indicator { threshold: 0.5 },
                f4: Term::Polynomial { coeffs: vec![0.0, 0.5] },
                link: Link::Sigmoid,
            },
            outcome0: Surface {
                feature_a: 0,
                feature_b: 2,
                f1: Term::Polynomial {
                    coeffs: vec![1.0, 0.8, 0.3],
                },
                f2: Term::Step {
                    threshold: 0.0,
                    low: 0.0,
                    high: 1.0,
                },
                f3: Term::Polynomial { coeffs: vec![0.0, 1.0] },
                f4: Term::Indicator { threshold: 0.0 },
                link: Link::Identity,
            },
            outcome1: Surface {
                feature_a: 0,
                feature_b: 2,
                f1: Term::Polynomial {
                    coeffs: vec![2.0, 1.2, 0.3, -0.1],
                },
                f2: Term::Step {
                    threshold: 0.0,
                    low: 0.5,
                    high: 2.0,
                },
                f3: Term::Polynomial { coeffs: vec![0.0, 1.0] },
                f4: Term::Indicator { threshold: 0.0 },
                link: Link::Clip { lo: -6.0, hi: 8.0 },
            },
            noise_scale: 1.0,
        }
    }
}

impl AcicProtocol {
    pub fn d(&self) -> usize {
        self.n_continuous + self.n_count + self.n_binary
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 {
            return Err(Error::Config("acic_like: at least one covariate is required".into()));
        }
        if !(self.noise_scale > 0.0) {
            return Err(Error::Config(format!(
                "acic_like.noise_scale must be > 0, got {}",
                self.noise_scale
            )));
        }
        self.propensity.validate(d, "acic_like.propensity")?;
        self.outcome0.validate(d, "acic_like.outcome0")?;
        self.outcome1.validate(d, "acic_like.outcome1")?;
        Ok(())
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        let mut kinds = vec![FeatureKind::Continuous; self.n_continuous];
        kinds.extend(std::iter::repeat_n(FeatureKind::Count, self.n_count));
        kinds.extend(std::iter::repeat_n(FeatureKind::Binary, self.n_binary));
        kinds
    }

    /// Generating propensity, clipped to [`PROPENSITY_CLIP`].
    pub fn propensity_at(&self, x: &[f64]) -> f64 {
        self.propensity.eval(x).clamp(PROPENSITY_CLIP.0, PROPENSITY_CLIP.1)
    }
}

/// ACIC-style data: `T ~ Ber(clip(f(X)))`, `Yᵗ = gₜ(X) + noise`.
pub fn generate_acic_like(seed: u64, n: usize, protocol: &AcicProtocol) -> Result<(Dataset, GroundTruth)> {
    protocol.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("acic_like.n must be ≥ 2, got {n}")));
    }
    with_retries(seed, |rng| {
        let kinds = protocol.feature_kinds();
        let x = sample_covariates(rng, n, &kinds);
        let propensity: Vec<f64> = x.row_iter().map(|r| protocol.propensity_at(r)).collect();
        let t: Vec<u8> = propensity.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
        if !both_arms(&t) {
            return Ok(None);
        }
        let mu0: Vec<f64> = x.row_iter().map(|r| protocol.outcome0.eval(r)).collect();
        let mu1: Vec<f64> = x.row_iter().map(|r| protocol.outcome1.eval(r)).collect();
        let noise = Normal::new(0.0, protocol.noise_scale).map_err(|e| Error::Config(e.to_string()))?;
        let y: Vec<f64> = (0..n)
            .map(|i| if t[i] == 1 { mu1[i] } else { mu0[i] } + noise.sample(rng))
            .collect();
        let dataset = Dataset::new(x, t, y, kinds)?;
        let truth = GroundTruth::new(mu0, mu1)?.with_propensity(propensity)?;
        Ok(Some((dataset, truth)))
    })
}

/// Vertical offset of the two toy clusters (centres at `(0, ±offset)`).
pub const TOY_CLUSTER_OFFSET: f64 = 3.0;
/// Standard deviation of the horizontal coordinate.
pub const TOY_SPREAD_X: f64 = 1.5;
/// Standard deviation of the vertical coordinate within a cluster.
pub const TOY_SPREAD_Y: f64 = 0.5;
/// Logistic slope of the treatment probability along the horizontal axis.
pub const TOY_SLOPE: f64 = 2.0;

/// Two horizontal clusters; treatment probability rises left-to-right in the
/// upper cluster and falls in the lower one.
pub fn generate_two_cluster_toy(seed: u64, n: usize) -> Result<Dataset> {
    Ok(generate_two_cluster_toy_labeled(seed, n)?.0)
}

/// Same as [`generate_two_cluster_toy`], also returning each sample's cluster
/// (0 = upper, 1 = lower) and its treatment probability.
pub fn generate_two_cluster_toy_labeled(seed: u64, n: usize) -> Result<(Dataset, Vec<u8>, Vec<f64>)> {
    if n < 40 {
        return Err(Error::InvalidArgument(format!("toy generator needs n ≥ 40, got {n}")));
    }
    let (dataset, (clusters, propensity)) = with_retries(seed, |rng| {
        let mut rows = Vec::with_capacity(n);
        let mut clusters = Vec::with_capacity(n);
        let mut propensity = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let cluster = (i % 2) as u8;
            let sign = if cluster == 0 { 1.0 } else { -1.0 };
            let x1 = TOY_SPREAD_X * rng.sample::<f64, _>(StandardNormal);
            let x2 = sign * TOY_CLUSTER_OFFSET + TOY_SPREAD_Y * rng.sample::<f64, _>(StandardNormal);
            let p = sigmoid(sign * TOY_SLOPE * x1);
            let ti = u8::from(rng.random::<f64>() < p);
            y.push(x1 + 0.5 * sign + f64::from(ti) + 0.1 * rng.sample::<f64, _>(StandardNormal));
            rows.push([x1, x2]);
            clusters.push(cluster);
            propensity.push(p);
            t.push(ti);
        }
        if !both_arms(&t) {
            return Ok(None);
        }
        let x = Matrix::from_rows(&rows)?;
        Ok(Some((Dataset::continuous(x, t, y)?, (clusters, propensity))))
    })?;
    Ok((dataset, clusters, propensity))
}

fn sample_covariates(rng: &mut ChaCha8Rng, n: usize, kinds: &[FeatureKind]) -> Matrix {
    let poisson = Poisson::new(2.0).expect("positive rate");
    let mut x = Matrix::zeros(n, kinds.len());
    for i in 0..n {
        for (j, kind) in kinds.iter().enumerate() {
            let v = match kind {
                FeatureKind::Continuous => rng.sample::<f64, _>(StandardNormal),
                FeatureKind::Binary => f64::from(u8::from(rng.random::<f64>() < 0.5)),
                FeatureKind::Count => poisson.sample(rng),
            };
            x.set(i, j, v);
        }
    }
    x
}

fn both_arms(t: &[u8]) -> bool {
    t.contains(&0) && t.contains(&1)
}

/// Runs `attempt` with the base seed and then with derived retry seeds until
/// it produces a non-degenerate draw.
fn with_retries<T>(seed: u64, mut attempt: impl FnMut(&mut ChaCha8Rng) -> Result<Option<T>>) -> Result<T> {
    for k in 0..=MAX_RETRIES {
        let s = if k == 0 {
            seed
        } else {
            derive_seed(seed, stream::RETRY, k)
        };
        let mut rng = rng_from_seed(s);
        if let Some(out) = attempt(&mut rng)? {
            return Ok(out);
        }
    }
    Err(Error::Degenerate(format!(
        "a treatment arm stayed empty after {MAX_RETRIES} retries"
    )))
}
