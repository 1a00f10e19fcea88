//! Mirror twins on the two-cluster toy: the raw covariates leave the arms
//! apart, projecting onto the horizontal axis brings every sample close to a
//! twin of the other arm.
//!
//! cargo run --example twin_positivity -- [n]

use alrite::data::generate_two_cluster_toy_labeled;
use alrite::linalg::Matrix;
use alrite::twin::{counterfactualizability_summary, mirror_twins};

fn main() -> alrite::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let (data, clusters, _) = generate_two_cluster_toy_labeled(3, n)?;
    let projected = Matrix::from_vec(n, 1, (0..n).map(|i| data.x().get(i, 0)).collect())?;

    for (name, latent) in [("identity", data.x().clone()), ("x-projection", projected)] {
        let map = mirror_twins(&latent, data.t())?;
        let s = counterfactualizability_summary(&map, data.t())?;
        let cross = (0..n).filter(|&i| clusters[map.twin_index[i]] != clusters[i]).count();
        let idle = map.weight.iter().filter(|&&w| w == 0).count();
        println!(
            "{name:<13} control mean {:.3} median {:.3} | treated mean {:.3} median {:.3} | \
             twins across clusters {cross} | never chosen {idle}",
            s.control.mean, s.control.median, s.treated.mean, s.treated.median
        );
    }
    Ok(())
}
