//! Small hyper-parameter sweep scored by every proxy metric, with each
//! proxy's winner and its rank agreement with the true PEHE.
//!
//! cargo run --release --example proxy_selection -- [seed]

use alrite::data::IhdpConfig;
use alrite::experiment::{
    prepare, run_sweep, score_candidates, select_per_proxy, DatasetSource, ExperimentConfig, SearchSpace,
};

fn main() -> alrite::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = ExperimentConfig {
        seed,
        dataset: DatasetSource::IhdpLike {
            config: IhdpConfig::default(),
        },
        search: SearchSpace {
            embed_layers: vec![1, 2],
            head_layers: vec![1, 2],
            embed_width: vec![20, 50],
            head_width: vec![20, 50],
            batch_size: vec![50, 100],
            epochs: 40,
            l0: 4,
            l1: 4,
            ..SearchSpace::default()
        },
        ..ExperimentConfig::default()
    };
    let prepared = prepare(&cfg)?;
    let sweep = run_sweep(&cfg, &prepared)?;
    let candidates = score_candidates(&cfg, &prepared, &sweep)?;
    let best = candidates
        .iter()
        .filter_map(|c| c.pehe_within)
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    println!("{} candidates, oracle sqrt-PEHE {best:.3}", candidates.len());
    println!(
        "{:<14} {:>6} {:>10} {:>9} {:>8} {:>7}",
        "proxy", "winner", "sqrt-PEHE", "spearman", "kendall", "dcg"
    );
    for row in select_per_proxy(&candidates)? {
        let a = row.agreement.as_ref();
        println!(
            "{:<14} {:>6} {:>10.3} {:>9.3} {:>8.3} {:>7.3}",
            row.kind.to_string(),
            row.winner.map_or("-".into(), |w| w.to_string()),
            row.pehe_within.unwrap_or(f64::NAN).sqrt(),
            a.map_or(f64::NAN, |a| a.spearman),
            a.map_or(f64::NAN, |a| a.kendall),
            a.map_or(f64::NAN, |a| a.dcg),
        );
    }
    Ok(())
}
