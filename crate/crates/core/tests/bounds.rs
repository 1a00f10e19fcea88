mod common;

use alrite::data::{Dataset, GroundTruth, Scaler};
use alrite::linalg::Matrix;
use alrite::metrics::{bound_m1, bound_m2, bound_m3, latent_lipschitz, plug_in_effects, LipschitzSource};
use alrite::nn::{Activation, Mlp};
use alrite::pipeline::{Pipeline, Role};
use alrite::twin::cross_pipeline_weights;
use common::*;

fn linear_pipeline(role: Role, a: Matrix, heads: [(Vec<f64>, f64); 2]) -> Pipeline {
    let d = a.rows();
    let phi = Mlp::from_parts(vec![d, d], Activation::Identity, false, vec![a], vec![vec![0.0; d]]).unwrap();
    let head = |(w, b): (Vec<f64>, f64)| {
        Mlp::from_parts(
            vec![d, 1],
            Activation::Identity,
            false,
            vec![Matrix::from_vec(1, d, w).unwrap()],
            vec![vec![b]],
        )
        .unwrap()
    };
    let [h0, h1] = heads;
    Pipeline::new(role, phi, head(h0), head(h1), Scaler::identity(d)).unwrap()
}

fn noiseless_perfect() -> (Dataset, GroundTruth, Pipeline, Pipeline) {
    // Two exact copies of every point, one per arm, so twins coincide.
    let pts = [[0.0, 1.0], [1.0, -1.0], [2.0, 0.5]];
    let mut rows = Vec::new();
    let mut t = Vec::new();
    for p in pts {
        rows.push(p);
        t.push(0);
        rows.push(p);
        t.push(1);
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let b0 = vec![1.0, 2.0];
    let b1 = vec![-1.0, 0.5];
    let mu = |b: &[f64]| rows.iter().map(|r| b[0] * r[0] + b[1] * r[1]).collect::<Vec<f64>>();
    let (mu0, mu1) = (mu(&b0), mu(&b1));
    let y: Vec<f64> = (0..t.len()).map(|i| if t[i] == 1 { mu1[i] } else { mu0[i] }).collect();
    let d = Dataset::continuous(x, t, y).unwrap();
    let g = GroundTruth::new(mu0, mu1).unwrap();
    let heads = [(b0, 0.0), (b1, 0.0)];
    let p0 = linear_pipeline(Role::ControlDriven, Matrix::identity(2), heads.clone());
    let p1 = linear_pipeline(Role::TreatmentDriven, Matrix::identity(2), heads);
    (d, g, p0, p1)
}

#[test]
fn perfect_noiseless_models_give_zero_bounds() {
    let (d, g, p0, p1) = noiseless_perfect();
    let l = LipschitzSource::Known(3.0);
    let m1 = bound_m1(&p0, &d, &g, l).unwrap();
    assert!(m1.bound.unwrap().abs() < 1e-12 && m1.pehe.abs() < 1e-12);
    let m2 = bound_m2(&p0, &p1, &d, &g, l).unwrap();
    assert!(m2.bound.unwrap().abs() < 1e-12 && m2.pehe.abs() < 1e-12);
    assert_eq!(m2.terms["kappa_y"], 0.0);
    let m3 = bound_m3(&p0, &p1, &d, &g, l, 0.0, 0.0).unwrap();
    assert!(m3.bound.unwrap().abs() < 1e-12);
}

#[test]
fn unknown_lipschitz_is_report_only() {
    let (d, g, p0, p1) = noiseless_perfect();
    let r = bound_m2(&p0, &p1, &d, &g, LipschitzSource::Unknown).unwrap();
    assert!(r.bound.is_none() && r.slack.is_none() && !r.certified);
    assert!(r.terms.contains_key("kappa_y"));
}

#[test]
fn m3_equals_m2_term_by_term() {
    for seed in 0..5 {
        let inst = linear_instance(seed, 80, 2, 0.3);
        let p0 = train_linear(&inst, Role::ControlDriven, 5, seed);
        let p1 = train_linear(&inst, Role::TreatmentDriven, 5, seed + 100);
        let l = LipschitzSource::Known(truth_lipschitz(&inst, &[&p0, &p1]));
        let m2 = bound_m2(&p0, &p1, &inst.dataset, &inst.truth, l).unwrap();
        let m3 = bound_m3(&p0, &p1, &inst.dataset, &inst.truth, l, 1e-4, 1e-4).unwrap();
        let (a, b) = (m2.bound.unwrap(), m3.bound.unwrap());
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn plug_in_pehe_matches_manual_assembly() {
    let inst = linear_instance(3, 60, 2, 0.5);
    let p0 = train_linear(&inst, Role::ControlDriven, 3, 1);
    let p1 = train_linear(&inst, Role::TreatmentDriven, 3, 2);
    let tau_bar = plug_in_effects(&p0, &p1, &inst.dataset).unwrap();
    let want = tau_bar
        .iter()
        .zip(inst.truth.tau())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / 60.0;
    let r = bound_m2(&p0, &p1, &inst.dataset, &inst.truth, LipschitzSource::Known(1.0)).unwrap();
    assert!((r.pehe - want).abs() < 1e-12);
    let w = cross_pipeline_weights(
        &p0.phi.forward_batch(inst.dataset.x()).unwrap(),
        &p1.phi.forward_batch(inst.dataset.x()).unwrap(),
        inst.dataset.t(),
    )
    .unwrap();
    let kappa: f64 = (0..60)
        .map(|i| (1.0 + w[i] as f64) * (inst.dataset.y()[i] - inst.truth.mu(inst.dataset.t()[i], i)).powi(2))
        .sum();
    assert!((r.terms["kappa_y"] - kappa).abs() < 1e-9);
}

#[test]
fn factual_term_scales_quadratically() {
    let (d, g, p0, _) = noiseless_perfect();
    let shifted = |c: f64| {
        let mut p = p0.clone();
        let mut params = p.h0.flatten_params();
        let last = params.len() - 1;
        params[last] += c;
        p.h0.assign_params(&params).unwrap();
        bound_m1(&p, &d, &g, LipschitzSource::Known(1.0)).unwrap().terms["weighted_factual"]
    };
    let (a, b) = (shifted(0.5), shifted(1.0));
    assert!((b - 4.0 * a).abs() < 1e-9 * b.max(1.0), "{a} {b}");
}

#[test]
fn latent_lipschitz_of_identity_is_norm() {
    let l = latent_lipschitz(&Matrix::identity(2), &[3.0, 4.0]).unwrap();
    assert!((l - 5.0).abs() < 1e-12);
    let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.5]]).unwrap();
    // z = Ax → x = A⁻¹z, βᵀA⁻¹ = (1.5, 8)
    assert!((latent_lipschitz(&a, &[3.0, 4.0]).unwrap() - (1.5f64.hypot(8.0))).abs() < 1e-12);
}
