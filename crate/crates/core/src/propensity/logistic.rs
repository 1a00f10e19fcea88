use crate::linalg::{dot, Matrix};
use crate::nn::AdamState;

pub(super) const MAX_STEPS: usize = 5000;
pub(super) const GRAD_TOL: f64 = 1e-6;
const LEARNING_RATE: f64 = 0.05;

/// `log(1 + eˢ)` without overflow.
pub(super) fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Class-balanced cross-entropy of a logistic model plus `l2‖w‖²`, with its
/// gradient `(∂/∂w, ∂/∂b)`:
/// `−(1/n₁)Σ_{t=1} log σ(s) − (1/n₀)Σ_{t=0} log(1−σ(s)) + l2‖w‖²`, `s = wᵀx + b`.
pub fn balanced_logistic_loss(x: &Matrix, t: &[u8], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n1 = t.iter().filter(|&&v| v == 1).count().max(1) as f64;
    let n0 = t.iter().filter(|&&v| v == 0).count().max(1) as f64;
    let mut loss = l2 * dot(weights, weights);
    let mut gw: Vec<f64> = weights.iter().map(|w| 2.0 * l2 * w).collect();
    let mut gb = 0.0;
    for (row, &ti) in x.row_iter().zip(t) {
        let s = dot(row, weights) + bias;
        let sigma = 1.0 / (1.0 + (-s).exp());
        let ds = if ti == 1 {
            loss += softplus(-s) / n1;
            -(1.0 - sigma) / n1
        } else {
            loss += softplus(s) / n0;
            sigma / n0
        };
        gb += ds;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g += ds * v;
        }
    }
    (loss, gw, gb)
}

pub(super) struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Best objective value seen after each step (non-increasing).
    pub best_trace: Vec<f64>,
}

/// Full-batch Adam until the gradient norm drops below `GRAD_TOL` or
/// `MAX_STEPS` is reached; returns the best iterate seen.
pub(super) fn fit(x: &Matrix, t: &[u8], l2: f64) -> LogisticFit {
    let d = x.cols();
    let mut params = vec![0.0; d + 1];
    let mut adam = AdamState::new(d + 1, LEARNING_RATE).with_decay(1.0, 1);
    let mut best = (f64::INFINITY, params.clone());
    let mut trace = Vec::new();
    for _ in 0..MAX_STEPS {
        let (loss, gw, gb) = balanced_logistic_loss(x, t, &params[..d], params[d], l2);
        if loss < best.0 {
            best = (loss, params.clone());
        }
        trace.push(best.0);
        let mut grad = gw;
        grad.push(gb);
        if dot(&grad, &grad).sqrt() < GRAD_TOL {
            break;
        }
        adam.update(&mut params, &grad).expect("shapes fixed at construction");
    }
    let (loss, ..) = balanced_logistic_loss(x, t, &params[..d], params[d], l2);
    if loss < best.0 {
        best = (loss, params);
        trace.push(loss);
    }
    let mut p = best.1;
    let bias = p.pop().expect("bias present");
    LogisticFit {
        weights: p,
        bias,
        best_trace: trace,
    }
}
