use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm, spectral_norm, Matrix};

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Elu => elu(u),
            Activation::Identity => u,
        }
    }

    /// Derivative with respect to the pre-activation `u`.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Elu => {
                if u >= 0.0 {
                    1.0
                } else {
                    u.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `u` for `u ≥ 0`, `eᵘ − 1` otherwise.
#[inline]
pub fn elu(u: f64) -> f64 {
    if u >= 0.0 {
        u
    } else {
        u.exp_m1()
    }
}

/// Dense feed-forward network.
///
/// `layer_dims = [input, hidden…, output]`; layer `l` maps `layer_dims[l]`
/// to `layer_dims[l + 1]` with a weight matrix of shape `(out, in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpDocument", try_from = "MlpDocument")]
pub struct Mlp {
    layer_dims: Vec<usize>,
    activation: Activation,
    output_normalization: bool,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// On-disk JSON layout of an [`Mlp`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpDocument {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub output_normalization: bool,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<Mlp> for MlpDocument {
    fn from(m: Mlp) -> Self {
        let weights = m
            .weights
            .iter()
            .map(|w| w.row_iter().map(<[f64]>::to_vec).collect())
            .collect();
        MlpDocument {
            layer_dims: m.layer_dims,
            activation: m.activation,
            output_normalization: m.output_normalization,
            weights,
            biases: m.biases,
        }
    }
}

impl TryFrom<MlpDocument> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDocument) -> Result<Self> {
        let weights = doc
            .weights
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    Ok(Matrix::zeros(0, 0))
                } else {
                    Matrix::from_rows(rows)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_parts(
            doc.layer_dims,
            doc.activation,
            doc.output_normalization,
            weights,
            doc.biases,
        )
    }
}

/// Per-parameter gradients, laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Same ordering as [`Mlp::flatten_params`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.as_slice().iter().all(|&v| v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}

/// Activations recorded during a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l` (batch × layer_dims[l]).
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre_activations: Vec<Matrix>,
    /// Row norms of the final affine output, when normalization is on.
    output_norms: Option<Vec<f64>>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Result of a backward pass: parameter gradients plus the gradient with
/// respect to the network input, which lets networks be chained.
#[derive(Clone, Debug)]
pub struct Backward {
    pub gradients: Gradients,
    pub input_gradient: Matrix,
}

impl Mlp {
    /// Random network with scaled-uniform weights `±√(6/(fan_in+fan_out))` and zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_dims: &[usize],
        activation: Activation,
        output_normalization: bool,
        rng: &mut R,
    ) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            output_normalization,
            weights,
            biases,
        })
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        activation: Activation,
        output_normalization: bool,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Shape {
                context: "layer count",
                expected: layers,
                got: weights.len().min(biases.len()),
            });
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            let w = &weights[l];
            if w.rows() != pair[1] || w.cols() != pair[0] {
                return Err(Error::Shape {
                    context: "weight matrix",
                    expected: pair[1] * pair[0],
                    got: w.rows() * w.cols(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::Shape {
                    context: "bias vector",
                    expected: pair[1],
                    got: biases[l].len(),
                });
            }
            crate::error::ensure_finite(w.as_slice(), "weights")?;
            crate::error::ensure_finite(&biases[l], "biases")?;
        }
        Ok(Self {
            layer_dims,
            activation,
            output_normalization,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_normalization(&self) -> bool {
        self.output_normalization
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_into(&mut out);
        out
    }

    /// Overwrites every parameter from `params` (layout of [`Mlp::flatten_params`]).
    /// Returns the number of values consumed.
    pub fn assign_params(&mut self, params: &[f64]) -> Result<usize> {
        if params.len() < self.param_count() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wl = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&params[offset..offset + wl]);
            offset += wl;
            let bl = b.len();
            b.copy_from_slice(&params[offset..offset + bl]);
            offset += bl;
        }
        Ok(offset)
    }

    /// Evaluates the network on a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next: Vec<f64> = w.row_iter().zip(b).map(|(r, bi)| dot(r, &a) + bi).collect();
            if l < last {
                next.iter_mut().for_each(|u| *u = self.activation.apply(*u));
            }
            a = next;
        }
        if self.output_normalization {
            normalize_in_place(&mut a);
        }
        Ok(a)
    }

    /// Evaluates the network on every row of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_batch(x)?;
        let last = self.num_layers() - 1;
        let mut a = x.clone();
        for l in 0..self.num_layers() {
            let mut z = affine(&a, &self.weights[l], &self.biases[l]);
            if l < last {
                z.as_mut_slice().iter_mut().for_each(|u| *u = self.activation.apply(*u));
            }
            a = z;
        }
        if self.output_normalization {
            for r in 0..a.rows() {
                normalize_in_place(a.row_mut(r));
            }
        }
        Ok(a)
    }

    /// Forward pass that keeps what [`Mlp::backward_cached`] needs.
    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_batch(x)?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre_activations = Vec::with_capacity(self.num_layers());
        let mut a = x.clone();
        for l in 0..self.num_layers() {
            let z = affine(&a, &self.weights[l], &self.biases[l]);
            let next = if l < last {
                let mut h = z.clone();
                h.as_mut_slice().iter_mut().for_each(|u| *u = self.activation.apply(*u));
                h
            } else {
                z.clone()
            };
            inputs.push(a);
            pre_activations.push(z);
            a = next;
        }
        let output_norms = if self.output_normalization {
            let mut norms = Vec::with_capacity(a.rows());
            for r in 0..a.rows() {
                norms.push(normalize_in_place(a.row_mut(r)));
            }
            Some(norms)
        } else {
            None
        };
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output_norms,
            output: a,
        })
    }

    /// Reverse-mode differentiation of `Σ_rows ⟨upstream_row, output_row⟩`.
    pub fn backward_cached(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Backward> {
        let out = &cache.output;
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::Shape {
                context: "upstream gradient",
                expected: out.rows() * out.cols(),
                got: upstream.rows() * upstream.cols(),
            });
        }
        crate::error::ensure_finite(upstream.as_slice(), "upstream gradient")?;

        let mut delta = upstream.clone();
        if let Some(norms) = &cache.output_norms {
            // d(u/‖u‖)/du = (I − o oᵀ)/‖u‖ with o = u/‖u‖; identity when u = 0.
            for (r, &norm) in norms.iter().enumerate() {
                if norm > 0.0 {
                    let o = out.row(r);
                    let g = delta.row(r).to_vec();
                    let proj = dot(o, &g);
                    for (d, (&gi, &oi)) in delta.row_mut(r).iter_mut().zip(g.iter().zip(o)) {
                        *d = (gi - oi * proj) / norm;
                    }
                }
            }
        }

        let mut grads = Gradients::zeros_like(self);
        let last = self.num_layers() - 1;
        for l in (0..self.num_layers()).rev() {
            if l < last {
                let z = &cache.pre_activations[l];
                for (d, &u) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *d *= self.activation.derivative(u);
                }
            }
            let input = &cache.inputs[l];
            let w = &self.weights[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for r in 0..delta.rows() {
                let dr = delta.row(r);
                let ar = input.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, &a) in gw.row_mut(o).iter_mut().zip(ar) {
                        *g += d * a;
                    }
                }
            }
            let mut next = Matrix::zeros(delta.rows(), w.cols());
            for r in 0..delta.rows() {
                let dr = delta.row(r).to_vec();
                let nr = next.row_mut(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (n, &wv) in nr.iter_mut().zip(w.row(o)) {
                        *n += d * wv;
                    }
                }
            }
            delta = next;
        }
        Ok(Backward {
            gradients: grads,
            input_gradient: delta,
        })
    }

    /// Convenience: forward then backward on `x`.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<Gradients> {
        let cache = self.forward_cached(x)?;
        Ok(self.backward_cached(&cache, upstream)?.gradients)
    }

    /// Product of per-layer spectral norms. ELU and the identity are
    /// 1-Lipschitz, so this bounds the Lipschitz constant of the affine
    /// stack. The unit-norm output rescaling is not covered.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.weights.iter().map(spectral_norm).product()
    }

    fn check_batch(&self, x: &Matrix) -> Result<()> {
        if x.rows() > 0 && x.cols() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        Ok(())
    }
}

/// Sum of squared weights and biases over all given networks.
pub fn param_norm_sq(nets: &[&Mlp]) -> f64 {
    nets.iter()
        .flat_map(|m| {
            m.weights
                .iter()
                .flat_map(|w| w.as_slice().iter())
                .chain(m.biases.iter().flatten())
        })
        .map(|v| v * v)
        .sum()
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "a network needs at least an input and an output dimension".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
    }
    Ok(())
}

fn affine(a: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let mut z = Matrix::zeros(a.rows(), w.rows());
    for r in 0..a.rows() {
        let ar = a.row(r);
        for (o, zv) in z.row_mut(r).iter_mut().enumerate() {
            *zv = dot(w.row(o), ar) + b[o];
        }
    }
    z
}

/// Rescales `v` to unit L2 norm when its norm is positive. Returns the original norm.
fn normalize_in_place(v: &mut [f64]) -> f64 {
    let norm = l2_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}
