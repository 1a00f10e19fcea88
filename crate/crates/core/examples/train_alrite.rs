//! Fits a single twin-pipeline model on an IHDP-like instance and reports its
//! error next to a two-model least-squares baseline.
//!
//! cargo run --release --example train_alrite -- [seed] [epochs]

use alrite::baseline::OlsTLearner;
use alrite::data::{generate_ihdp_like, split, IhdpConfig};
use alrite::learner::{alrite_fit, alrite_predict};
use alrite::metrics::{eps_ate, pehe};
use alrite::pipeline::PipelineHyperparams;
use alrite::propensity::PropensitySpec;

fn main() -> alrite::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);

    let (data, truth) = generate_ihdp_like(seed, &IhdpConfig::default())?;
    let s = split(&data, 0.1, 0.3, seed)?;
    let hp = PipelineHyperparams {
        alpha: 0.1,
        beta: 1.0,
        embed_layers: 2,
        embed_width: 50,
        head_layers: 2,
        head_width: 50,
        epochs,
        ..PipelineHyperparams::default()
    };
    let (model, report) = alrite_fit(&data, &s, &hp, &hp, &PropensitySpec::default_grid(), seed)?;
    println!(
        "retained epochs: control {} treatment {}; propensity {:?}",
        report.control.retained_epoch,
        report.treatment.retained_epoch,
        model.eta.spec()
    );

    let ols = OlsTLearner::fit(&data, &s.train)?;
    for (name, idx) in [("within", s.within_sample()), ("test", s.test.clone())] {
        let x = data.subset(&idx).x().clone();
        let tau = alrite_predict(&model, &x)?;
        let base = ols.predict_tau(&x);
        println!(
            "{name:<6}  alrite sqrt-PEHE {:.3} eps-ATE {:.3} | ols-2 sqrt-PEHE {:.3} eps-ATE {:.3}",
            pehe(&tau, &truth, &idx)?.sqrt_pehe,
            eps_ate(&tau, &truth, &idx)?,
            pehe(&base, &truth, &idx)?.sqrt_pehe,
            eps_ate(&base, &truth, &idx)?,
        );
    }
    Ok(())
}
