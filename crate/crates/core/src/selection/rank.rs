use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

pub fn spearman(u: &[f64], v: &[f64]) -> f64 {
    pearson(&average_ranks(u), &average_ranks(v))
}

/// Kendall τ-a: `(concordant − discordant) / (C(C−1)/2)`; tied pairs count as neither.
pub fn kendall(u: &[f64], v: &[f64]) -> f64 {
    let c = u.len();
    let mut score = 0.0;
    for i in 0..c {
        for j in i + 1..c {
            let s = (u[i] - u[j]).signum() * (v[i] - v[j]).signum();
            if u[i] != u[j] && v[i] != v[j] {
                score += s;
            }
        }
    }
    score / (c * (c - 1) / 2) as f64
}

/// `Σ_{j=1..p} 2^{m(j)}/ln(j+1)` with models ordered by increasing `u` (ties by
/// index) and `m(j) = (r_v − 1)/(C − 1)` the normalized proxy rank of the j-th model.
pub fn dcg(u: &[f64], v: &[f64], p: usize) -> f64 {
    let c = u.len();
    let rv = average_ranks(v);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
    order
        .iter()
        .take(p.min(c))
        .enumerate()
        .map(|(j, &k)| {
            let m = (rv[k] - 1.0) / (c - 1) as f64;
            2f64.powf(m) / ((j + 2) as f64).ln()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankAgreement {
    pub spearman: f64,
    pub kendall: f64,
    pub dcg: f64,
}

/// Agreement between true errors `u` and proxy scores `v` over the same candidates.
pub fn rank_agreement(u: &[f64], v: &[f64], p: usize) -> Result<RankAgreement> {
    if u.len() != v.len() {
        return Err(Error::Shape {
            context: "rank agreement",
            expected: u.len(),
            got: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::InvalidArgument(
            "rank agreement needs at least 2 candidates".into(),
        ));
    }
    Ok(RankAgreement {
        spearman: spearman(u, v),
        kendall: kendall(u, v),
        dcg: dcg(u, v, p),
    })
}
