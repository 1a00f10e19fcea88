use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{AcicProtocol, IhdpConfig};
use crate::error::{Error, Result};
use crate::learner::EnsembleFamily;
use crate::nn::Activation;
use crate::pipeline::PipelineHyperparams;
use crate::propensity::PropensitySpec;
use crate::selection::ProxyKind;

fn half_powers(lo: i32, hi: i32) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((lo..=hi).map(|k| 10f64.powf(k as f64 / 2.0)))
        .collect()
}

/// `{0} ∪ {10^{k/2} : k = −4..=4}`.
pub fn alpha_domain() -> Vec<f64> {
    half_powers(-4, 4)
}

/// `{0} ∪ {10^{k/2} : k = −4..=2}`.
pub fn beta_domain() -> Vec<f64> {
    half_powers(-4, 2)
}

pub const LAYER_DOMAIN: std::ops::RangeInclusive<usize> = 1..=5;
pub const WIDTH_DOMAIN: [usize; 4] = [20, 50, 100, 200];
pub const BATCH_DOMAIN: [usize; 4] = [50, 100, 200, 500];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    IhdpLike {
        #[serde(flatten)]
        config: IhdpConfig,
    },
    AcicLike {
        n: usize,
        #[serde(default)]
        protocol: AcicProtocol,
    },
    Toy {
        n: usize,
    },
    Csv {
        path: PathBuf,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::IhdpLike {
            config: IhdpConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Fraction of the non-test samples held out for validation.
    pub validation_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.1,
            validation_fraction: 0.3,
        }
    }
}

/// Grids the sweep samples from. Every listed value must belong to the
/// documented domain of its hyper-parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub embed_layers: Vec<usize>,
    pub head_layers: Vec<usize>,
    pub embed_width: Vec<usize>,
    pub head_width: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub gamma: f64,
    pub epochs: usize,
    pub base_lr: f64,
    pub activation: Activation,
    /// Number of control-driven settings.
    pub l0: usize,
    /// Number of treatment-driven settings.
    pub l1: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            alpha: alpha_domain(),
            beta: beta_domain(),
            embed_layers: LAYER_DOMAIN.collect(),
            head_layers: LAYER_DOMAIN.collect(),
            embed_width: WIDTH_DOMAIN.to_vec(),
            head_width: WIDTH_DOMAIN.to_vec(),
            batch_size: BATCH_DOMAIN.to_vec(),
            gamma: 1e-4,
            epochs: 100,
            base_lr: 1e-3,
            activation: Activation::Elu,
            l0: 4,
            l1: 4,
        }
    }
}

fn in_domain(v: f64, domain: &[f64]) -> bool {
    domain.iter().any(|d| (v - d).abs() <= 1e-9 * d.abs().max(1.0))
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("search.alpha", &self.alpha, alpha_domain()),
            ("search.beta", &self.beta, beta_domain()),
        ];
        for (name, values, domain) in reals {
            if values.is_empty() {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
            if let Some(v) = values.iter().find(|v| !in_domain(**v, &domain)) {
                return Err(Error::Config(format!(
                    "{name}: {v} is not 0 or a half-integer power of ten within range"
                )));
            }
        }
        let ints: [(&str, &Vec<usize>, Vec<usize>); 5] = [
            ("search.embed_layers", &self.embed_layers, LAYER_DOMAIN.collect()),
            ("search.head_layers", &self.head_layers, LAYER_DOMAIN.collect()),
            ("search.embed_width", &self.embed_width, WIDTH_DOMAIN.to_vec()),
            ("search.head_width", &self.head_width, WIDTH_DOMAIN.to_vec()),
            ("search.batch_size", &self.batch_size, BATCH_DOMAIN.to_vec()),
        ];
        for (name, values, domain) in ints {
            if values.is_empty() {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
            if let Some(v) = values.iter().find(|v| !domain.contains(v)) {
                return Err(Error::Config(format!("{name}: {v} not in {domain:?}")));
            }
        }
        if self.l0 == 0 || self.l1 == 0 {
            return Err(Error::Config("search.l0 and search.l1 must be ≥ 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("search.gamma must be ≥ 0, got {}", self.gamma)));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::Config(format!(
                "search.base_lr must be > 0, got {}",
                self.base_lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Family used for the selected ensemble; curves are emitted for both.
    pub family: EnsembleFamily,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            family: EnsembleFamily::TopK,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Lipschitz constant of the true response surfaces, if known.
    pub lipschitz: Option<f64>,
}

/// Settings of the single model trained by `fit`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub control: PipelineHyperparams,
    pub treatment: PipelineHyperparams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub search: SearchSpace,
    pub propensity_grid: Vec<PropensitySpec>,
    pub proxy: ProxyKind,
    pub ensemble: EnsembleConfig,
    pub fit: FitConfig,
    pub bounds: BoundsConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetSource::default(),
            split: SplitConfig::default(),
            search: SearchSpace::default(),
            propensity_grid: PropensitySpec::default_grid(),
            proxy: ProxyKind::MuRisk,
            ensemble: EnsembleConfig::default(),
            fit: FitConfig::default(),
            bounds: BoundsConfig::default(),
            output_dir: PathBuf::from("run"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("split.test_fraction", self.split.test_fraction),
            ("split.validation_fraction", self.split.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {f}")));
            }
        }
        match &self.dataset {
            DatasetSource::IhdpLike { config } => config.validate().map_err(as_config)?,
            DatasetSource::AcicLike { n, protocol } => {
                if *n < 20 {
                    return Err(Error::Config(format!("dataset.n must be ≥ 20, got {n}")));
                }
                protocol.validate().map_err(as_config)?;
            }
            DatasetSource::Toy { n } => {
                if *n < 20 {
                    return Err(Error::Config(format!("dataset.n must be ≥ 20, got {n}")));
                }
            }
            DatasetSource::Csv { path } => {
                if path.as_os_str().is_empty() {
                    return Err(Error::Config("dataset.path must not be empty".into()));
                }
            }
        }
        self.search.validate()?;
        if self.propensity_grid.is_empty() {
            return Err(Error::Config("propensity_grid must not be empty".into()));
        }
        for spec in &self.propensity_grid {
            spec.validate().map_err(as_config)?;
        }
        self.fit
            .control
            .validate()
            .map_err(|e| Error::Config(format!("fit.control: {e}")))?;
        self.fit
            .treatment
            .validate()
            .map_err(|e| Error::Config(format!("fit.treatment: {e}")))?;
        if let Some(l) = self.bounds.lipschitz {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!(
                    "bounds.lipschitz must be finite and ≥ 0, got {l}"
                )));
            }
        }
        Ok(())
    }

    /// Control-driven and treatment-driven settings sampled from the search space.
    pub fn sample_settings(&self) -> (Vec<PipelineHyperparams>, Vec<PipelineHyperparams>) {
        use crate::rng::{derive_seed, rng_from_seed, stream};
        use rand::seq::IndexedRandom;
        let s = &self.search;
        let draw = |role: u64, k: usize| {
            let mut rng = rng_from_seed(derive_seed(
                derive_seed(self.seed, stream::HYPERPARAMS, role),
                stream::HYPERPARAMS,
                k as u64,
            ));
            let pick_f = |v: &[f64], rng: &mut _| *v.choose(rng).expect("validated non-empty");
            let pick_u = |v: &[usize], rng: &mut _| *v.choose(rng).expect("validated non-empty");
            PipelineHyperparams {
                alpha: pick_f(&s.alpha, &mut rng),
                beta: pick_f(&s.beta, &mut rng),
                gamma: s.gamma,
                embed_layers: pick_u(&s.embed_layers, &mut rng),
                embed_width: pick_u(&s.embed_width, &mut rng),
                head_layers: pick_u(&s.head_layers, &mut rng),
                head_width: pick_u(&s.head_width, &mut rng),
                batch_size: pick_u(&s.batch_size, &mut rng),
                epochs: s.epochs,
                base_lr: s.base_lr,
                activation: s.activation,
                ..PipelineHyperparams::default()
            }
        };
        (
            (0..s.l0).map(|k| draw(0, k)).collect(),
            (0..s.l1).map(|k| draw(1, k)).collect(),
        )
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("dataset: {m}")),
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_fraction_names_field() {
        let err = ExperimentConfig::from_json(r#"{"split": {"test_fraction": 1.5}}"#).unwrap_err();
        assert!(err.to_string().contains("split.test_fraction"), "{err}");
    }

    #[test]
    fn off_grid_values_rejected() {
        let err = ExperimentConfig::from_json(r#"{"search": {"alpha": [0.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("search.alpha"));
        let err = ExperimentConfig::from_json(r#"{"search": {"embed_width": [30]}}"#).unwrap_err();
        assert!(err.to_string().contains("search.embed_width"));
        assert!(ExperimentConfig::from_json(r#"{"search": {"l0": 0}}"#).is_err());
    }

    #[test]
    fn domains_have_documented_sizes() {
        assert_eq!(alpha_domain().len(), 10);
        assert_eq!(beta_domain().len(), 8);
        assert!((alpha_domain()[9] - 100.0).abs() < 1e-9);
        assert!((beta_domain()[7] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn dataset_kinds_parse() {
        let cfg = ExperimentConfig::from_json(r#"{"dataset": {"kind": "toy", "n": 100}}"#).unwrap();
        assert_eq!(cfg.dataset, DatasetSource::Toy { n: 100 });
        let cfg = ExperimentConfig::from_json(r#"{"dataset": {"kind": "ihdp_like", "n": 300}}"#).unwrap();
        match cfg.dataset {
            DatasetSource::IhdpLike { config } => assert_eq!((config.n, config.d), (300, 25)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampled_settings_are_deterministic_and_in_grid() {
        let cfg = ExperimentConfig::default();
        let (a, b) = cfg.sample_settings();
        assert_eq!((a.len(), b.len()), (4, 4));
        assert_eq!(cfg.sample_settings(), (a.clone(), b));
        assert!(a
            .iter()
            .all(|h| in_domain(h.alpha, &alpha_domain()) && WIDTH_DOMAIN.contains(&h.embed_width)));
    }
}
