//! Top-K and softmax ensembles over a small sweep: factual μ-risk and true
//! error along each curve.
//!
//! cargo run --release --example ensembles -- [seed]

use alrite::experiment::{ensemble_curves, prepare, run_sweep, CurvePoint, ExperimentConfig, SearchSpace};
use alrite::learner::EnsembleMode;

fn label(mode: EnsembleMode) -> String {
    match mode {
        EnsembleMode::TopK { k } => format!("K = {k}"),
        EnsembleMode::Softmax { lambda } => format!("lambda = {lambda:.1e}"),
    }
}

fn print_curve(name: &str, points: &[CurvePoint]) {
    println!("{name}");
    for p in points {
        println!(
            "  {:<16} mu-risk {:>8.4}  sqrt-PEHE within {:.3}  out {:.3}",
            label(p.mode),
            p.mu_risk,
            p.pehe_within.unwrap_or(f64::NAN).sqrt(),
            p.pehe_out.unwrap_or(f64::NAN).sqrt()
        );
    }
}

fn main() -> alrite::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = ExperimentConfig {
        seed,
        search: SearchSpace {
            embed_layers: vec![1, 2],
            head_layers: vec![1, 2],
            embed_width: vec![20, 50],
            head_width: vec![20, 50],
            batch_size: vec![50, 100],
            epochs: 40,
            l0: 5,
            l1: 5,
            ..SearchSpace::default()
        },
        ..ExperimentConfig::default()
    };
    let prepared = prepare(&cfg)?;
    let sweep = run_sweep(&cfg, &prepared)?;
    let curves = ensemble_curves(&cfg, &prepared, &sweep)?;
    print_curve("top-K", &curves.top_k);
    print_curve("softmax", &curves.softmax);
    println!("selected {}", label(curves.selected_point().mode));
    Ok(())
}
