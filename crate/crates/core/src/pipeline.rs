//! A pipeline is an embedding φ with two outcome heads h⁰, h¹ on top of it,
//! trained with a loss that favours one arm: factual accuracy on both arms,
//! importance-weighted accuracy on the other arm, and a penalty on the latent
//! distance between own-arm samples and their mirror twins.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Scaler, SplitIndices};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::nn::{param_norm_sq, Activation, AdamState, Mlp};
use crate::rng::rng_from_seed;
use crate::twin::{mirror_twins, TwinMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ControlDriven,
    TreatmentDriven,
}

impl Role {
    /// The arm whose samples drive the twin-distance penalty.
    pub fn own_arm(self) -> u8 {
        match self {
            Role::ControlDriven => 0,
            Role::TreatmentDriven => 1,
        }
    }

    pub fn other_arm(self) -> u8 {
        1 - self.own_arm()
    }
}

fn default_activation() -> Activation {
    Activation::Elu
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineHyperparams {
    /// Strength of the twin-distance penalty.
    pub alpha: f64,
    /// Importance of the twin-count reweighting on the other arm.
    pub beta: f64,
    /// L2 strength on all parameters.
    pub gamma: f64,
    pub embed_layers: usize,
    pub embed_width: usize,
    pub head_layers: usize,
    pub head_width: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub normalize_embedding: bool,
    #[serde(default)]
    pub normalize_heads: bool,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

impl Default for PipelineHyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            gamma: 1e-4,
            embed_layers: 2,
            embed_width: 50,
            head_layers: 2,
            head_width: 50,
            batch_size: 100,
            epochs: 100,
            base_lr: 1e-3,
            activation: Activation::Elu,
            normalize_embedding: true,
            normalize_heads: false,
            standardize: true,
        }
    }
}

impl PipelineHyperparams {
    /// Linear embedding `z = Ax + b` (square) and linear heads, without any
    /// normalization or standardization.
    pub fn linear(d: usize) -> Self {
        Self {
            embed_layers: 1,
            embed_width: d,
            head_layers: 1,
            head_width: 1,
            activation: Activation::Identity,
            normalize_embedding: false,
            normalize_heads: false,
            standardize: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("embed_layers", self.embed_layers),
            ("embed_width", self.embed_width),
            ("head_layers", self.head_layers),
            ("head_width", self.head_width),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        Ok(())
    }

    fn embed_dims(&self, d: usize) -> Vec<usize> {
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(self.embed_width, self.embed_layers));
        dims
    }

    fn head_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.embed_width];
        dims.extend(std::iter::repeat_n(self.head_width, self.head_layers - 1));
        dims.push(1);
        dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub role: Role,
    pub phi: Mlp,
    pub h0: Mlp,
    pub h1: Mlp,
    pub scaler: Scaler,
}

impl Pipeline {
    pub fn new(role: Role, phi: Mlp, h0: Mlp, h1: Mlp, scaler: Scaler) -> Result<Self> {
        let k = phi.output_dim();
        for (name, h) in [("h0", &h0), ("h1", &h1)] {
            if h.input_dim() != k || h.output_dim() != 1 {
                return Err(Error::Structure(format!(
                    "{name} must map the {k}-dimensional latent space to a scalar"
                )));
            }
        }
        if scaler.dim() != phi.input_dim() {
            return Err(Error::Shape {
                context: "scaler vs embedding input",
                expected: phi.input_dim(),
                got: scaler.dim(),
            });
        }
        Ok(Self {
            role,
            phi,
            h0,
            h1,
            scaler,
        })
    }

    /// Freshly initialized pipeline for `d` covariates.
    pub fn init(role: Role, d: usize, hp: &PipelineHyperparams, scaler: Scaler, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = rng_from_seed(seed);
        let phi = Mlp::new(&hp.embed_dims(d), hp.activation, hp.normalize_embedding, &mut rng)?;
        let h0 = Mlp::new(&hp.head_dims(), hp.activation, hp.normalize_heads, &mut rng)?;
        let h1 = Mlp::new(&hp.head_dims(), hp.activation, hp.normalize_heads, &mut rng)?;
        Self::new(role, phi, h0, h1, scaler)
    }

    pub fn head(&self, arm: u8) -> &Mlp {
        if arm == 0 {
            &self.h0
        } else {
            &self.h1
        }
    }

    pub fn param_norm_sq(&self) -> f64 {
        param_norm_sq(&[&self.phi, &self.h0, &self.h1])
    }

    /// Parameters of φ, h⁰, h¹ concatenated in that order.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.phi.flatten_into(&mut out);
        self.h0.flatten_into(&mut out);
        self.h1.flatten_into(&mut out);
        out
    }

    pub fn param_count(&self) -> usize {
        self.phi.param_count() + self.h0.param_count() + self.h1.param_count()
    }

    pub fn assign_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                context: "pipeline parameters",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = self.phi.assign_params(params)?;
        offset += self.h0.assign_params(&params[offset..])?;
        self.h1.assign_params(&params[offset..])?;
        Ok(())
    }

    /// Latent points `φ(scale(x))` for raw covariates.
    pub fn latent(&self, x: &Matrix) -> Result<Matrix> {
        self.phi.forward_batch(&self.scaler.transform_x(x)?)
    }

    /// Head outputs `(h⁰∘φ, h¹∘φ)` in the pipeline's working units.
    fn heads_working(&self, x_working: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.phi.forward_batch(x_working)?;
        let a = self.h0.forward_batch(&z)?.into_vec();
        let b = self.h1.forward_batch(&z)?.into_vec();
        Ok((a, b))
    }

    /// Potential-outcome predictions `(h⁰∘φ(x), h¹∘φ(x))` in outcome units.
    pub fn predict_outcomes(&self, x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = self.heads_working(&self.scaler.transform_x(x)?)?;
        let s = &self.scaler;
        Ok((
            a.into_iter().map(|v| s.inverse_y(v)).collect(),
            b.into_iter().map(|v| s.inverse_y(v)).collect(),
        ))
    }

    /// `h¹∘φ(x) − h⁰∘φ(x)` in outcome units, one value per row.
    pub fn predict_tau(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (a, b) = self.heads_working(&self.scaler.transform_x(x)?)?;
        Ok(a.iter()
            .zip(&b)
            .map(|(u, v)| self.scaler.inverse_effect(v - u))
            .collect())
    }

    pub fn predict_tau_one(&self, x: &[f64]) -> Result<f64> {
        let z = self.phi.forward(&self.scaler.transform_row(x))?;
        let v = self.h1.forward(&z)?[0] - self.h0.forward(&z)?[0];
        Ok(self.scaler.inverse_effect(v))
    }
}

/// Mean squared factual error `(y − h^t(φ(x)))²` over `indices`, in outcome units.
pub fn factual_mse(p: &Pipeline, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("factual_mse: empty index set".into()));
    }
    let sub = dataset.subset(indices);
    let (m0, m1) = p.predict_outcomes(sub.x())?;
    let sum: f64 = (0..sub.n())
        .map(|i| {
            let pred = if sub.t()[i] == 1 { m1[i] } else { m0[i] };
            (sub.y()[i] - pred).powi(2)
        })
        .sum();
    Ok(sum / indices.len() as f64)
}

/// The four terms of the compound loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean squared error of the own-arm head on own-arm samples.
    pub factual_own: f64,
    /// Twin-count weighted squared error of the other head on other-arm samples.
    pub factual_other: f64,
    /// α-scaled mean squared latent distance of own-arm samples to their twins.
    pub counterfactual: f64,
    /// γ‖𝒫‖².
    pub regularization: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.factual_own + self.factual_other + self.counterfactual + self.regularization
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("factual_own", self.factual_own),
            ("factual_other", self.factual_other),
            ("counterfactual", self.counterfactual),
            ("regularization", self.regularization),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }

    fn add_scaled(&mut self, other: &LossBreakdown, s: f64) {
        self.factual_own += s * other.factual_own;
        self.factual_other += s * other.factual_other;
        self.counterfactual += s * other.counterfactual;
        self.regularization += s * other.regularization;
    }
}

/// Working-unit training data with the arm sizes used as normalizers.
struct LossInputs<'a> {
    x: &'a Matrix,
    t: &'a [u8],
    y: &'a [f64],
    twins: &'a TwinMap,
    n_own: f64,
    n_other: f64,
}

impl<'a> LossInputs<'a> {
    fn new(p: &Pipeline, x: &'a Matrix, t: &'a [u8], y: &'a [f64], twins: &'a TwinMap) -> Result<Self> {
        let n = t.len();
        if x.rows() != n || y.len() != n || twins.len() != n {
            return Err(Error::Shape {
                context: "compound loss inputs",
                expected: n,
                got: x.rows().min(y.len()).min(twins.len()),
            });
        }
        let n_own = t.iter().filter(|&&v| v == p.role.own_arm()).count();
        let n_other = n - n_own;
        if n_own == 0 || n_other == 0 {
            return Err(Error::Structure(format!(
                "compound loss needs both arms (own={n_own}, other={n_other})"
            )));
        }
        Ok(Self {
            x,
            t,
            y,
            twins,
            n_own: n_own as f64,
            n_other: n_other as f64,
        })
    }
}

/// Compound loss of `p` on working-unit data `(x, t, y)` with a frozen twin map.
///
/// For the control-driven orientation (own arm 0):
/// `(1/n₀)Σ_{t=0}(y−h⁰∘φ)² + 1/(n₁+βn₀)·Σ_{t=1}(1+βw)(y−h¹∘φ)²
///  + (α/n₀)Σ_{t=0}‖φ(x)−φ(xᵐ)‖² + γ‖𝒫‖²`; the treatment-driven loss swaps arms.
pub fn compound_loss(
    p: &Pipeline,
    x: &Matrix,
    t: &[u8],
    y: &[f64],
    twins: &TwinMap,
    hp: &PipelineHyperparams,
) -> Result<LossBreakdown> {
    let inputs = LossInputs::new(p, x, t, y, twins)?;
    let all: Vec<usize> = (0..t.len()).collect();
    Ok(batch_loss(p, &inputs, &all, hp, false)?.0)
}

/// [`compound_loss`] together with its gradient with respect to
/// [`Pipeline::flatten_params`]. The twin indices are treated as constants.
pub fn compound_loss_with_gradients(
    p: &Pipeline,
    x: &Matrix,
    t: &[u8],
    y: &[f64],
    twins: &TwinMap,
    hp: &PipelineHyperparams,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let inputs = LossInputs::new(p, x, t, y, twins)?;
    let all: Vec<usize> = (0..t.len()).collect();
    let (loss, grad) = batch_loss(p, &inputs, &all, hp, true)?;
    Ok((loss, grad.expect("gradients requested")))
}

/// Minibatch estimate of the compound loss: data terms over `batch` are
/// scaled by `n/|batch|`, normalizers use the full arm sizes.
fn batch_loss(
    p: &Pipeline,
    inputs: &LossInputs,
    batch: &[usize],
    hp: &PipelineHyperparams,
    with_gradients: bool,
) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
    let own = p.role.own_arm();
    let other = p.role.other_arm();
    let scale = inputs.t.len() as f64 / batch.len() as f64;
    let own_norm = scale / inputs.n_own;
    let other_norm = scale / (inputs.n_other + hp.beta * inputs.n_own);
    let cf_norm = scale * hp.alpha / inputs.n_own;

    // Embedding rows: the batch, then twins of own-arm members when α > 0.
    let mut rows: Vec<usize> = batch.to_vec();
    let mut twin_pairs: Vec<(usize, usize)> = Vec::new();
    if hp.alpha > 0.0 {
        for (r, &i) in batch.iter().enumerate() {
            if inputs.t[i] == own {
                twin_pairs.push((r, rows.len()));
                rows.push(inputs.twins.twin_index[i]);
            }
        }
    }
    let phi_cache = p.phi.forward_cached(&inputs.x.select_rows(&rows))?;
    let z = phi_cache.output();

    let mut loss = LossBreakdown::default();
    let mut dz = Matrix::zeros(z.rows(), z.cols());
    let mut head_grads = [None, None];

    for arm in [own, other] {
        let members: Vec<usize> = (0..batch.len()).filter(|&r| inputs.t[batch[r]] == arm).collect();
        if members.is_empty() {
            continue;
        }
        let head = p.head(arm);
        let head_cache = head.forward_cached(&z.select_rows(&members))?;
        let pred = head_cache.output().as_slice();
        let mut upstream = Matrix::zeros(members.len(), 1);
        let mut total = 0.0;
        for (k, &r) in members.iter().enumerate() {
            let i = batch[r];
            let c = if arm == own {
                own_norm
            } else {
                other_norm * (1.0 + hp.beta * inputs.twins.weight[i] as f64)
            };
            let resid = pred[k] - inputs.y[i];
            total += c * resid * resid;
            upstream.set(k, 0, 2.0 * c * resid);
        }
        if arm == own {
            loss.factual_own = total;
        } else {
            loss.factual_other = total;
        }
        if with_gradients {
            let back = head.backward_cached(&head_cache, &upstream)?;
            for (k, &r) in members.iter().enumerate() {
                for (d, &g) in dz.row_mut(r).iter_mut().zip(back.input_gradient.row(k)) {
                    *d += g;
                }
            }
            head_grads[arm as usize] = Some(back.gradients);
        }
    }

    for &(r, m) in &twin_pairs {
        loss.counterfactual += cf_norm * squared_distance(z.row(r), z.row(m));
        if with_gradients {
            let diff: Vec<f64> = z
                .row(r)
                .iter()
                .zip(z.row(m))
                .map(|(a, b)| 2.0 * cf_norm * (a - b))
                .collect();
            for (d, g) in dz.row_mut(r).iter_mut().zip(&diff) {
                *d += g;
            }
            for (d, g) in dz.row_mut(m).iter_mut().zip(&diff) {
                *d -= g;
            }
        }
    }

    loss.regularization = hp.gamma * p.param_norm_sq();
    if let Some(term) = loss.first_non_finite() {
        return Err(Error::NonFinite(format!("compound loss term `{term}`")));
    }
    if !with_gradients {
        return Ok((loss, None));
    }

    let phi_grads = p.phi.backward_cached(&phi_cache, &dz)?.gradients;
    let mut grad = Vec::with_capacity(p.param_count());
    phi_grads.flatten_into(&mut grad);
    for (arm, net) in [(0u8, &p.h0), (1u8, &p.h1)] {
        match &head_grads[arm as usize] {
            Some(g) => g.flatten_into(&mut grad),
            None => grad.extend(std::iter::repeat_n(0.0, net.param_count())),
        }
    }
    if hp.gamma > 0.0 {
        for (g, w) in grad.iter_mut().zip(p.flatten_params()) {
            *g += 2.0 * hp.gamma * w;
        }
    }
    Ok((loss, Some(grad)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the minibatch loss estimates over the epoch.
    pub loss: LossBreakdown,
    pub validation_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub role: Role,
    /// Validation factual MSE of the initialization (epoch 0).
    pub initial_validation_mse: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch improved on the initialization.
    pub retained_epoch: usize,
    pub retained_validation_mse: f64,
}

/// Working-unit factual MSE, weighted back to outcome units.
fn validation_mse(p: &Pipeline, x: &Matrix, t: &[u8], y: &[f64]) -> Result<f64> {
    let (a, b) = p.heads_working(x)?;
    let sum: f64 = (0..t.len())
        .map(|i| {
            let pred = if t[i] == 1 { b[i] } else { a[i] };
            (y[i] - pred).powi(2)
        })
        .sum();
    Ok(sum / t.len() as f64 * p.scaler.y_scale * p.scaler.y_scale)
}

/// Trains one pipeline on `split.train` and keeps the epoch with the lowest
/// validation factual MSE.
///
/// Twins are recomputed on the whole training set at the start of every
/// epoch; minibatches are drawn uniformly without stratification.
pub fn train_pipeline(
    dataset: &Dataset,
    split: &SplitIndices,
    role: Role,
    hp: &PipelineHyperparams,
    seed: u64,
) -> Result<(Pipeline, TrainReport)> {
    hp.validate()?;
    let train = dataset.subset(&split.train);
    let validation = dataset.subset(&split.validation);
    train.require_both_arms("training set")?;
    validation.require_both_arms("validation set")?;

    let scaler = if hp.standardize {
        Scaler::fit(dataset, &split.train)?
    } else {
        Scaler::identity(dataset.d())
    };
    let train = scaler.transform(&train)?;
    let validation = scaler.transform(&validation)?;

    let mut rng = rng_from_seed(seed);
    let mut pipeline = Pipeline::init(role, dataset.d(), hp, scaler, rand::Rng::random(&mut rng))?;
    let mut params = pipeline.flatten_params();
    let mut adam = AdamState::new(params.len(), hp.base_lr);

    let initial = validation_mse(&pipeline, validation.x(), validation.t(), validation.y())?;
    let mut best = (0usize, initial, params.clone());
    let mut records = Vec::with_capacity(hp.epochs);
    let mut order: Vec<usize> = (0..train.n()).collect();

    for epoch in 1..=hp.epochs {
        let latent = pipeline.phi.forward_batch(train.x())?;
        let twins = mirror_twins(&latent, train.t())?;
        let inputs = LossInputs::new(&pipeline, train.x(), train.t(), train.y(), &twins)?;
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = order.chunks(hp.batch_size).collect();
        let mut epoch_loss = LossBreakdown::default();
        for batch in &batches {
            let (loss, grad) = batch_loss(&pipeline, &inputs, batch, hp, true)?;
            let grad = grad.expect("gradients requested");
            epoch_loss.add_scaled(&loss, 1.0 / batches.len() as f64);
            adam.update(&mut params, &grad)?;
            pipeline.assign_params(&params)?;
        }
        let val = validation_mse(&pipeline, validation.x(), validation.t(), validation.y())?;
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation MSE at epoch {epoch}")));
        }
        if val < best.1 {
            best = (epoch, val, params.clone());
        }
        records.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            validation_mse: val,
        });
    }

    pipeline.assign_params(&best.2)?;
    let report = TrainReport {
        role,
        initial_validation_mse: initial,
        epochs: records,
        retained_epoch: best.0,
        retained_validation_mse: best.1,
    };
    Ok((pipeline, report))
}
