mod common;

use alrite::linalg::Matrix;
use alrite::rng::rng_from_seed;
use alrite::twin::{counterfactualizability_summary, cross_pipeline_twins, cross_pipeline_weights, mirror_twins};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn arms(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<u8> {
    let mut t: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
    t[0] = 0;
    t[n - 1] = 1;
    t
}

#[test]
fn mirror_twins_match_exhaustive_search_with_ties() {
    let mut rng = rng_from_seed(5);
    for n in [2, 3, 17, 120] {
        // integer grid coordinates force many exact distance ties
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.random_range(0..4) as f64).collect()).unwrap();
        let t = arms(&mut rng, n);
        let map = mirror_twins(&x, &t).unwrap();
        let (idx, w) = brute_force_twins(&x, &t);
        assert_eq!(map.twin_index, idx);
        assert_eq!(map.weight, w);
    }
}

#[test]
fn cross_weights_count_votes_across_spaces() {
    let mut rng = rng_from_seed(8);
    let n = 150;
    let l0 = random_matrix(&mut rng, n, 3);
    let l1 = random_matrix(&mut rng, n, 2);
    let t = arms(&mut rng, n);
    let (idx0, w0) = brute_force_twins(&l0, &t);
    let (idx1, w1) = brute_force_twins(&l1, &t);
    let map = cross_pipeline_twins(&l0, &l1, &t).unwrap();
    for i in 0..n {
        let want = if t[i] == 0 { idx0[i] } else { idx1[i] };
        assert_eq!(map.twin_index[i], want);
    }
    let w = cross_pipeline_weights(&l0, &l1, &t).unwrap();
    for i in 0..n {
        // a control sample is voted for by treated samples searching in φ₁ space
        let want = if t[i] == 0 { w1[i] } else { w0[i] };
        assert_eq!(w[i], want, "sample {i}");
    }
}

#[test]
fn summary_reports_per_arm_statistics() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [10.0]]).unwrap();
    let t = vec![0, 1, 0, 1];
    let map = mirror_twins(&x, &t).unwrap();
    let s = counterfactualizability_summary(&map, &t).unwrap();
    assert_eq!(s.control.count, 2);
    assert!((s.control.mean - 1.5).abs() < 1e-12);
    assert!((s.treated.max - 7.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_conserve_counts(seed in 0u64..10_000, n in 2usize..200, d in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let x = random_matrix(&mut rng, n, d);
        let t = arms(&mut rng, n);
        let map = mirror_twins(&x, &t).unwrap();
        let n1 = t.iter().filter(|&&v| v == 1).count() as u32;
        let n0 = n as u32 - n1;
        prop_assert_eq!(map.weight.iter().sum::<u32>(), n as u32);
        let treated: u32 = (0..n).filter(|&i| t[i] == 1).map(|i| map.weight[i]).sum();
        prop_assert_eq!(treated, n0);
        for i in 0..n {
            prop_assert_ne!(t[map.twin_index[i]], t[i]);
            prop_assert!(map.twin_distance[i] >= 0.0);
        }
    }
}
