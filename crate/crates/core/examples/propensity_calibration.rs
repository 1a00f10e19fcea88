//! Cross-validated propensity selection on an ACIC-like instance, compared
//! with the generating propensity.
//!
//! cargo run --release --example propensity_calibration -- [seed]

use alrite::data::{generate_acic_like, split, AcicProtocol};
use alrite::propensity::{predict_eta, select_propensity, PropensitySpec, DEFAULT_CLIP};

fn main() -> alrite::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (data, truth) = generate_acic_like(seed, 2000, &AcicProtocol::default())?;
    let s = split(&data, 0.1, 0.3, seed)?;
    let (model, scores) = select_propensity(&data, &s.train, &PropensitySpec::default_grid(), 5, seed)?;
    for c in &scores {
        println!("{:<40} held-out loss {:.4}", format!("{:?}", c.spec), c.mean_loss);
    }
    println!("selected {:?}", model.spec());

    let test = data.subset(&s.test);
    let eta_hat = predict_eta(&model, test.x(), DEFAULT_CLIP);
    let eta = truth
        .subset(&s.test)
        .propensity()
        .expect("generator reports propensity")
        .to_vec();
    let mae = eta_hat.iter().zip(&eta).map(|(a, b)| (a - b).abs()).sum::<f64>() / eta.len() as f64;
    println!("test mean |eta_hat - eta| = {mae:.4}");

    // reliability table per decile; the class-balanced objective pulls
    // predictions toward 0.5 when the arms are imbalanced
    let mut order: Vec<usize> = (0..eta_hat.len()).collect();
    order.sort_by(|&a, &b| eta_hat[a].total_cmp(&eta_hat[b]));
    for chunk in order.chunks(order.len().div_ceil(10)) {
        let pred = chunk.iter().map(|&i| eta_hat[i]).sum::<f64>() / chunk.len() as f64;
        let seen = chunk.iter().filter(|&&i| test.t()[i] == 1).count() as f64 / chunk.len() as f64;
        println!("predicted {pred:.3}  observed {seen:.3}  ({} rows)", chunk.len());
    }
    Ok(())
}
