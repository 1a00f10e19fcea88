//! Mirror twins: the nearest opposite-arm neighbour of every sample in latent
//! space, plus the counterfactual importance weights they induce.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinMap {
    pub twin_index: Vec<usize>,
    pub twin_distance: Vec<f64>,
    /// `weight[j]` counts the opposite-arm samples whose twin is `j`.
    pub weight: Vec<u32>,
}

impl TwinMap {
    pub fn len(&self) -> usize {
        self.twin_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twin_index.is_empty()
    }
}

fn check_inputs(latent: &Matrix, t: &[u8]) -> Result<(Vec<usize>, Vec<usize>)> {
    if latent.rows() != t.len() {
        return Err(Error::Shape {
            context: "latent rows vs treatment flags",
            expected: t.len(),
            got: latent.rows(),
        });
    }
    ensure_finite(latent.as_slice(), "latent points")?;
    let control: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0).collect();
    let treated: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 1).collect();
    if control.is_empty() || treated.is_empty() {
        return Err(Error::Structure(format!(
            "mirror twins need both arms (n0={}, n1={})",
            control.len(),
            treated.len()
        )));
    }
    Ok((control, treated))
}

/// Nearest member of `candidates` (ascending indices) to `point`; ties go to
/// the smallest index because the scan is in ascending order with strict `<`.
fn nearest(latent: &Matrix, point: &[f64], candidates: &[usize]) -> (usize, f64) {
    let mut best = (candidates[0], f64::INFINITY);
    for &j in candidates {
        let d = squared_distance(point, latent.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn twins_for(latent: &Matrix, queries: &[usize], candidates: &[usize]) -> Vec<(usize, usize, f64)> {
    queries
        .par_iter()
        .map(|&i| {
            let (j, d2) = nearest(latent, latent.row(i), candidates);
            (i, j, d2.sqrt())
        })
        .collect()
}

fn assert_conservation(weight: &[u32], t: &[u8], n0: usize, n1: usize) {
    let (mut on_treated, mut on_control) = (0usize, 0usize);
    for (w, &ti) in weight.iter().zip(t) {
        if ti == 1 {
            on_treated += *w as usize;
        } else {
            on_control += *w as usize;
        }
    }
    assert_eq!(on_treated, n0, "treated twin weights must sum to n0");
    assert_eq!(on_control, n1, "control twin weights must sum to n1");
}

/// Mirror twins of every sample under a single embedding.
pub fn mirror_twins(latent: &Matrix, t: &[u8]) -> Result<TwinMap> {
    let (control, treated) = check_inputs(latent, t)?;
    let n = t.len();
    let mut map = TwinMap {
        twin_index: vec![0; n],
        twin_distance: vec![0.0; n],
        weight: vec![0; n],
    };
    for (queries, candidates) in [(&control, &treated), (&treated, &control)] {
        for (i, j, d) in twins_for(latent, queries, candidates) {
            map.twin_index[i] = j;
            map.twin_distance[i] = d;
            map.weight[j] += 1;
        }
    }
    assert_conservation(&map.weight, t, control.len(), treated.len());
    Ok(map)
}

/// Twins under the arm-specific embeddings: control samples look for their
/// twin in `latent0`, treated samples in `latent1`.
pub fn cross_pipeline_twins(latent0: &Matrix, latent1: &Matrix, t: &[u8]) -> Result<TwinMap> {
    let (control, treated) = check_inputs(latent0, t)?;
    check_inputs(latent1, t)?;
    let n = t.len();
    let mut map = TwinMap {
        twin_index: vec![0; n],
        twin_distance: vec![0.0; n],
        weight: vec![0; n],
    };
    for (latent, queries, candidates) in [(latent0, &control, &treated), (latent1, &treated, &control)] {
        for (i, j, d) in twins_for(latent, queries, candidates) {
            map.twin_index[i] = j;
            map.twin_distance[i] = d;
            map.weight[j] += 1;
        }
    }
    assert_conservation(&map.weight, t, control.len(), treated.len());
    Ok(map)
}

/// Importance weights of [`cross_pipeline_twins`].
pub fn cross_pipeline_weights(latent0: &Matrix, latent1: &Matrix, t: &[u8]) -> Result<Vec<u32>> {
    Ok(cross_pipeline_twins(latent0, latent1, t)?.weight)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl DistanceStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        };
        Self {
            count: m,
            mean: sorted.iter().sum::<f64>() / m as f64,
            median,
            max: sorted[m - 1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualizabilitySummary {
    pub control: DistanceStats,
    pub treated: DistanceStats,
}

/// Per-arm twin-distance statistics; smaller means better counterfactualizability.
pub fn counterfactualizability_summary(map: &TwinMap, t: &[u8]) -> Result<CounterfactualizabilitySummary> {
    if map.len() != t.len() {
        return Err(Error::Shape {
            context: "twin map vs treatment flags",
            expected: t.len(),
            got: map.len(),
        });
    }
    let arm = |a: u8| -> Vec<f64> {
        map.twin_distance
            .iter()
            .zip(t)
            .filter(|(_, &ti)| ti == a)
            .map(|(d, _)| *d)
            .collect()
    };
    Ok(CounterfactualizabilitySummary {
        control: DistanceStats::from_values(&arm(0)),
        treated: DistanceStats::from_values(&arm(1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn oracle(latent: &Matrix, t: &[u8]) -> (Vec<usize>, Vec<u32>) {
        let n = t.len();
        let mut idx = vec![0; n];
        let mut w = vec![0; n];
        for i in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if t[j] == t[i] {
                    continue;
                }
                let d: f64 = (0..latent.cols())
                    .map(|c| (latent.get(i, c) - latent.get(j, c)).powi(2))
                    .sum();
                match best {
                    Some((_, bd)) if d >= bd => {}
                    _ => best = Some((j, d)),
                }
            }
            idx[i] = best.unwrap().0;
        }
        for i in 0..n {
            w[idx[i]] += 1;
        }
        (idx, w)
    }

    fn random_instance(seed: u64, n: usize, k: usize) -> (Matrix, Vec<u8>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let data: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
        t[0] = 0;
        t[1] = 1;
        (Matrix::from_vec(n, k, data).unwrap(), t)
    }

    #[test]
    fn one_dimensional_example() {
        let latent = Matrix::from_rows(&[[0.0], [3.0], [1.0]]).unwrap();
        let t = [0, 0, 1];
        let m = mirror_twins(&latent, &t).unwrap();
        assert_eq!(m.twin_index, vec![2, 2, 0]);
        assert_eq!(m.weight, vec![1, 0, 2]);
        assert_eq!(m.twin_distance, vec![1.0, 2.0, 1.0]);
        let s = counterfactualizability_summary(&m, &t).unwrap();
        assert_eq!(s.control.mean, 1.5);
        assert_eq!(s.treated.mean, 1.0);
    }

    #[test]
    fn pair_is_mutual() {
        let latent = Matrix::from_rows(&[[0.0, 1.0], [2.0, 2.0]]).unwrap();
        let m = mirror_twins(&latent, &[1, 0]).unwrap();
        assert_eq!(m.twin_index, vec![1, 0]);
        assert_eq!(m.weight, vec![1, 1]);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let latent = Matrix::from_rows(&[[0.0], [-1.0], [1.0]]).unwrap();
        let m = mirror_twins(&latent, &[0, 1, 1]).unwrap();
        assert_eq!(m.twin_index[0], 1);
    }

    #[test]
    fn empty_arm_is_structural_error() {
        let latent = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(mirror_twins(&latent, &[0, 0]), Err(Error::Structure(_))));
    }

    #[test]
    fn matches_exhaustive_scan() {
        let (latent, t) = random_instance(3, 500, 3);
        let m = mirror_twins(&latent, &t).unwrap();
        let (idx, w) = oracle(&latent, &t);
        assert_eq!(m.twin_index, idx);
        assert_eq!(m.weight, w);
        assert_eq!(m.weight.iter().sum::<u32>() as usize, 500);
    }

    #[test]
    fn cross_weights_match_recomputation() {
        let (l0, t) = random_instance(5, 200, 2);
        let (l1, _) = random_instance(6, 200, 2);
        let w = cross_pipeline_weights(&l0, &l1, &t).unwrap();
        let (idx0, _) = oracle(&l0, &t);
        let (idx1, _) = oracle(&l1, &t);
        let mut expect = vec![0u32; 200];
        for i in 0..200 {
            let j = if t[i] == 0 { idx0[i] } else { idx1[i] };
            expect[j] += 1;
        }
        assert_eq!(w, expect);
        assert_eq!(w.iter().sum::<u32>(), 200);
        assert_eq!(
            cross_pipeline_weights(&l0, &l0, &t).unwrap(),
            mirror_twins(&l0, &t).unwrap().weight
        );
    }

    #[test]
    fn coincident_points_have_zero_stats() {
        let latent = Matrix::zeros(4, 2);
        let t = [0, 1, 0, 1];
        let s = counterfactualizability_summary(&mirror_twins(&latent, &t).unwrap(), &t).unwrap();
        assert_eq!(
            s.control,
            DistanceStats {
                count: 2,
                mean: 0.0,
                median: 0.0,
                max: 0.0
            }
        );
        assert_eq!(s.treated.max, 0.0);
    }
}
