//! Sweep + selection + ensemble on several IHDP-like instances, compared
//! with a two-model least-squares baseline.
//!
//! cargo run --release --example ihdp_benchmark -- [instances] [epochs] [lr]

use alrite::baseline::OlsTLearner;
use alrite::data::IhdpConfig;
use alrite::experiment::{
    ensemble_curves, prepare, run_sweep, score_candidates, select_per_proxy, DatasetSource, ExperimentConfig,
    SearchSpace,
};
use alrite::metrics::pehe;
use alrite::selection::ProxyKind;

fn main() -> alrite::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let instances: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(5);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(80);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let mut wins = 0;
    let (mut sum_sel, mut sum_ens, mut sum_ols) = (0.0, 0.0, 0.0);
    for seed in 0..instances {
        let cfg = ExperimentConfig {
            seed,
            dataset: DatasetSource::IhdpLike {
                config: IhdpConfig::default(),
            },
            search: SearchSpace {
                embed_layers: vec![1, 2, 3],
                head_layers: vec![1, 2, 3],
                embed_width: vec![20, 50],
                head_width: vec![20, 50],
                batch_size: vec![50, 100],
                epochs,
                base_lr: lr,
                l0: 6,
                l1: 6,
                ..SearchSpace::default()
            },
            ..ExperimentConfig::default()
        };
        let t0 = std::time::Instant::now();
        let prepared = prepare(&cfg)?;
        let sweep = run_sweep(&cfg, &prepared)?;
        let candidates = score_candidates(&cfg, &prepared, &sweep)?;
        let selection = select_per_proxy(&candidates)?;
        let chosen = selection
            .iter()
            .find(|s| s.kind == ProxyKind::MuRisk)
            .expect("all kinds present");
        let curves = ensemble_curves(&cfg, &prepared, &sweep)?;

        let within = prepared.split.within_sample();
        let truth = prepared.truth.as_ref().expect("generated data has truth");
        let ols = OlsTLearner::fit(&prepared.dataset, &prepared.split.train)?;
        let tau_ols = ols.predict_tau(&prepared.dataset.subset(&within).x().clone());
        let ols_pehe = pehe(&tau_ols, truth, &within)?.sqrt_pehe;

        let sel = chosen.pehe_within.expect("truth known").sqrt();
        let ens = curves.selected_point().pehe_within.expect("truth known").sqrt();
        wins += (sel < ols_pehe) as usize;
        sum_sel += sel;
        sum_ens += ens;
        sum_ols += ols_pehe;
        println!(
            "instance {seed:>2}: selected {sel:.3}  ensemble {ens:.3} ({:?})  ols-2 {ols_pehe:.3}  [{:.1}s]",
            curves.selected_point().mode,
            t0.elapsed().as_secs_f64()
        );
    }
    let k = instances as f64;
    println!(
        "mean sqrt PEHE: selected {:.3}  ensemble {:.3}  ols-2 {:.3}; selected beats ols-2 on {wins}/{instances}",
        sum_sel / k,
        sum_ens / k,
        sum_ols / k
    );
    Ok(())
}
