#![allow(dead_code)]

use alrite::data::{split, Dataset, GroundTruth, Scaler, SplitIndices};
use alrite::linalg::Matrix;
use alrite::metrics::latent_lipschitz;
use alrite::nn::{Activation, Mlp};
use alrite::pipeline::{
    compound_loss, compound_loss_with_gradients, train_pipeline, LossBreakdown, Pipeline, PipelineHyperparams, Role,
};
use alrite::propensity::balanced_logistic_loss;
use alrite::rng::rng_from_seed;
use alrite::twin::{mirror_twins, TwinMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Relative error with a small floor so that coordinates whose gradient is
/// essentially zero are compared on an absolute scale.
pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6)
}

pub fn central_differences(theta: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            work[k] = theta[k] + FD_STEP;
            let up = f(&work);
            work[k] = theta[k] - FD_STEP;
            let down = f(&work);
            work[k] = theta[k];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| rel_err(*a, *f))
        .fold(0.0, f64::max)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub struct TinyProblem {
    pub pipeline: Pipeline,
    pub x: Matrix,
    pub t: Vec<u8>,
    pub y: Vec<f64>,
    pub twins: TwinMap,
    pub hp: PipelineHyperparams,
}

/// Random pipeline (≤ 4 layers per network, width ≤ 8) and data with both arms.
pub fn tiny_problem(seed: u64) -> TinyProblem {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(6..12);
    // d = 1 with a normalized embedding collapses the latent space to two points
    let d = rng.random_range(2..5);
    let hp = PipelineHyperparams {
        alpha: rng.random_range(0.1..2.0),
        beta: rng.random_range(0.1..2.0),
        gamma: rng.random_range(1e-3..0.1),
        embed_layers: rng.random_range(1..4),
        embed_width: rng.random_range(2..9),
        head_layers: rng.random_range(1..4),
        head_width: rng.random_range(2..9),
        normalize_embedding: rng.random_bool(0.5),
        normalize_heads: rng.random_bool(0.3),
        ..PipelineHyperparams::default()
    };
    let role = if rng.random_bool(0.5) {
        Role::ControlDriven
    } else {
        Role::TreatmentDriven
    };
    let x = random_matrix(&mut rng, n, d);
    let mut t: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    t[0] = 0;
    t[1] = 1;
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pipeline = Pipeline::init(role, d, &hp, Scaler::identity(d), rng.random()).unwrap();
    let twins = mirror_twins(&pipeline.phi.forward_batch(&x).unwrap(), &t).unwrap();
    TinyProblem {
        pipeline,
        x,
        t,
        y,
        twins,
        hp,
    }
}

/// Analytic vs finite-difference gradients of one instance. Returns the
/// worst relative error for the whole loss and for each isolated term:
/// `[total, factual, counterfactual, regularization]`.
pub fn compound_gradient_errors(prob: &TinyProblem) -> [f64; 4] {
    let TinyProblem {
        pipeline,
        x,
        t,
        y,
        twins,
        hp,
    } = prob;
    let theta = pipeline.flatten_params();
    let mut work = pipeline.clone();
    let mut eval = |hp: &PipelineHyperparams, pick: &dyn Fn(&LossBreakdown) -> f64| {
        central_differences(&theta, |th| {
            work.assign_params(th).unwrap();
            pick(&compound_loss(&work, x, t, y, twins, hp).unwrap())
        })
    };
    let grad = |hp: &PipelineHyperparams| compound_loss_with_gradients(pipeline, x, t, y, twins, hp).unwrap().1;
    let g_full = grad(hp);
    let fd_full = eval(hp, &|l| l.total());

    let data_only = PipelineHyperparams {
        alpha: 0.0,
        gamma: 0.0,
        ..hp.clone()
    };
    let g_data = grad(&data_only);
    let fd_data = eval(&data_only, &|l| l.factual_own + l.factual_other);

    let no_alpha = PipelineHyperparams {
        alpha: 0.0,
        ..hp.clone()
    };
    let g_cf: Vec<f64> = g_full.iter().zip(grad(&no_alpha)).map(|(a, b)| a - b).collect();
    let fd_cf = eval(hp, &|l| l.counterfactual);

    let no_gamma = PipelineHyperparams {
        gamma: 0.0,
        ..hp.clone()
    };
    let g_reg: Vec<f64> = g_full.iter().zip(grad(&no_gamma)).map(|(a, b)| a - b).collect();
    let fd_reg = eval(hp, &|l| l.regularization);

    [
        max_rel(&g_full, &fd_full),
        max_rel(&g_data, &fd_data),
        max_rel(&g_cf, &fd_cf),
        max_rel(&g_reg, &fd_reg),
    ]
}

/// Random 3-layer ELU network under a squared-error loss.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let dims = [
        rng.random_range(1..5),
        rng.random_range(2..9),
        rng.random_range(2..9),
        rng.random_range(1..3),
    ];
    let net = Mlp::new(&dims, Activation::Elu, false, &mut rng).unwrap();
    let x = random_matrix(&mut rng, 5, dims[0]);
    let target = random_matrix(&mut rng, 5, dims[3]);
    let loss = |m: &Mlp| -> f64 {
        let out = m.forward_batch(&x).unwrap();
        out.as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(o, t)| (o - t).powi(2))
            .sum::<f64>()
    };
    let out = net.forward_batch(&x).unwrap();
    let upstream = Matrix::from_vec(
        out.rows(),
        out.cols(),
        out.as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(o, t)| 2.0 * (o - t))
            .collect(),
    )
    .unwrap();
    let analytic = net.backward(&x, &upstream).unwrap().flatten();
    let mut work = net.clone();
    let fd = central_differences(&net.flatten_params(), |th| {
        work.assign_params(th).unwrap();
        loss(&work)
    });
    max_rel(&analytic, &fd)
}

/// Balanced logistic cross-entropy with its L2 term.
pub fn propensity_gradient_error(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let d = rng.random_range(1..5);
    let n = 12;
    let x = random_matrix(&mut rng, n, d);
    let t: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let theta: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l2 = rng.random_range(0.0..0.5);
    let (_, gw, gb) = balanced_logistic_loss(&x, &t, &theta[..d], theta[d], l2);
    let mut analytic = gw;
    analytic.push(gb);
    let fd = central_differences(&theta, |th| balanced_logistic_loss(&x, &t, &th[..d], th[d], l2).0);
    max_rel(&analytic, &fd)
}

/// Exhaustive twin search used as an oracle.
pub fn brute_force_twins(latent: &Matrix, t: &[u8]) -> (Vec<usize>, Vec<u32>) {
    let n = t.len();
    let mut idx = vec![0; n];
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if t[j] == t[i] {
                continue;
            }
            let d: f64 = latent
                .row(i)
                .iter()
                .zip(latent.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best.0 || (d == best.0 && j < best.1) {
                best = (d, j);
            }
        }
        idx[i] = best.1;
    }
    let mut w = vec![0u32; n];
    for &j in &idx {
        w[j] += 1;
    }
    (idx, w)
}

/// Linear synthetic instance with a known Lipschitz constant:
/// `μ^t(x) = ⟨β_t, x⟩ + c_t`, Gaussian noise, uniform assignment.
pub struct LinearInstance {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub beta: [Vec<f64>; 2],
    pub split: SplitIndices,
}

pub fn linear_instance(seed: u64, n: usize, d: usize, noise: f64) -> LinearInstance {
    let mut rng = rng_from_seed(seed);
    let beta = [
        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>(),
        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>(),
    ];
    let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    loop {
        let x = random_matrix(&mut rng, n, d);
        let t: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        let mu = |a: usize, i: usize| -> f64 { alrite::linalg::dot(&beta[a], x.row(i)) + c[a] };
        let mu0: Vec<f64> = (0..n).map(|i| mu(0, i)).collect();
        let mu1: Vec<f64> = (0..n).map(|i| mu(1, i)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                (if t[i] == 1 { mu1[i] } else { mu0[i] }) + noise * e
            })
            .collect();
        let dataset = Dataset::continuous(x, t, y).unwrap();
        let Ok(split) = split(&dataset, 0.1, 0.3, seed) else {
            continue;
        };
        return LinearInstance {
            truth: GroundTruth::new(mu0, mu1).unwrap(),
            dataset,
            beta,
            split,
        };
    }
}

/// Trains a linear pipeline (`z = Ax + b`, linear heads) briefly.
pub fn train_linear(inst: &LinearInstance, role: Role, epochs: usize, seed: u64) -> Pipeline {
    let hp = PipelineHyperparams {
        epochs,
        batch_size: 32,
        base_lr: 1e-2,
        ..PipelineHyperparams::linear(inst.dataset.d())
    };
    train_pipeline(&inst.dataset, &inst.split, role, &hp, seed).unwrap().0
}

/// Lipschitz constant of both true surfaces seen through the embeddings of `pipes`.
pub fn truth_lipschitz(inst: &LinearInstance, pipes: &[&Pipeline]) -> f64 {
    let mut l: f64 = 0.0;
    for p in pipes {
        let a = &p.phi.weights()[0];
        for b in &inst.beta {
            l = l.max(latent_lipschitz(a, b).unwrap());
        }
    }
    l
}
