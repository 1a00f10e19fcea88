//! PEHE upper bounds for linear pipelines on a linear problem whose Lipschitz
//! constant is known exactly.
//!
//! cargo run --release --example pehe_bounds -- [seed]

use alrite::data::{split, Dataset, GroundTruth};
use alrite::linalg::{dot, Matrix};
use alrite::metrics::{bound_m1, bound_m2, bound_m3, latent_lipschitz, BoundReport, LipschitzSource};
use alrite::pipeline::{train_pipeline, PipelineHyperparams, Role};
use alrite::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn show(name: &str, r: &BoundReport) {
    println!(
        "{name:<8} pehe {:.4}  bound {:.4}  slack {:.4}",
        r.pehe,
        r.bound.unwrap_or(f64::NAN),
        r.slack.unwrap_or(f64::NAN)
    );
}

fn main() -> alrite::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut rng = rng_from_seed(seed);
    let (n, d) = (300, 2);
    let beta = [[1.0, -0.5], [0.5, 1.5]];
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect())?;
    let t: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    let mu0: Vec<f64> = (0..n).map(|i| dot(&beta[0], x.row(i))).collect();
    let mu1: Vec<f64> = (0..n).map(|i| dot(&beta[1], x.row(i)) + 1.0).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| if t[i] == 1 { mu1[i] } else { mu0[i] } + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let data = Dataset::continuous(x, t, y)?;
    let truth = GroundTruth::new(mu0, mu1)?;
    let s = split(&data, 0.1, 0.3, seed)?;

    let hp = PipelineHyperparams {
        epochs: 40,
        batch_size: 32,
        base_lr: 1e-2,
        ..PipelineHyperparams::linear(d)
    };
    let (p0, _) = train_pipeline(&data, &s, Role::ControlDriven, &hp, seed)?;
    let (p1, _) = train_pipeline(&data, &s, Role::TreatmentDriven, &hp, seed + 1)?;

    // Lipschitz constant of μ⁰, μ¹ seen through each linear embedding
    let mut l: f64 = 0.0;
    for p in [&p0, &p1] {
        for b in &beta {
            l = l.max(latent_lipschitz(&p.phi.weights()[0], b)?);
        }
    }
    println!("L = {l:.4}");
    let src = LipschitzSource::Known(l);
    show("M1(P0)", &bound_m1(&p0, &data, &truth, src)?);
    show("M1(P1)", &bound_m1(&p1, &data, &truth, src)?);
    show("M2", &bound_m2(&p0, &p1, &data, &truth, src)?);
    show("M3", &bound_m3(&p0, &p1, &data, &truth, src, hp.gamma, hp.gamma)?);
    let report_only = bound_m2(&p0, &p1, &data, &truth, LipschitzSource::Unknown)?;
    println!(
        "without L the terms are still reported: {:?}",
        report_only.terms.keys().collect::<Vec<_>>()
    );
    Ok(())
}
