//! Draws one instance from each synthetic generator and writes them as CSV.
//!
//! cargo run --example generate_data -- [out_dir] [seed]

use std::path::PathBuf;

use alrite::data::{
    generate_acic_like, generate_ihdp_like, generate_two_cluster_toy, save_csv, split, AcicProtocol, Dataset,
    GroundTruth, IhdpConfig,
};

fn describe(name: &str, d: &Dataset, g: Option<&GroundTruth>) {
    let ate = g.map(|g| g.tau().iter().sum::<f64>() / g.len() as f64);
    println!(
        "{name:<6} n={:<5} d={:<3} treated={:<5} ate={}",
        d.n(),
        d.d(),
        d.n_treated(),
        ate.map_or("-".into(), |v| format!("{v:.3}"))
    );
}

fn main() -> alrite::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("generated", String::as_str));
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&out)?;

    let (ihdp, ihdp_truth) = generate_ihdp_like(seed, &IhdpConfig::default())?;
    let (acic, acic_truth) = generate_acic_like(seed, 2000, &AcicProtocol::default())?;
    let toy = generate_two_cluster_toy(seed, 500)?;

    describe("ihdp", &ihdp, Some(&ihdp_truth));
    describe("acic", &acic, Some(&acic_truth));
    describe("toy", &toy, None);

    let s = split(&ihdp, 0.1, 0.3, seed)?;
    println!(
        "ihdp split: train {} validation {} test {}",
        s.train.len(),
        s.validation.len(),
        s.test.len()
    );

    save_csv(out.join("ihdp.csv"), &ihdp, Some(&ihdp_truth))?;
    save_csv(out.join("acic.csv"), &acic, Some(&acic_truth))?;
    save_csv(out.join("toy.csv"), &toy, None)?;
    println!("wrote {}", out.display());
    Ok(())
}
