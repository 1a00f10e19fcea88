use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

pub const MIN_LEAF: usize = 10;

/// Flattened CART tree; node 0 is the root. Samples with
/// `x[feature] ≤ threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "node")]
pub enum TreeNode {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

pub fn predict(nodes: &[TreeNode], x: &[f64]) -> f64 {
    let mut k = 0;
    loop {
        match &nodes[k] {
            TreeNode::Leaf { value, .. } => return *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                k = if x[*feature] <= *threshold { *left } else { *right };
            }
        }
    }
}

fn gini(treated: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = treated as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

/// Best `(feature, threshold, weighted child impurity)` over midpoints between
/// distinct consecutive values, keeping at least `min_leaf` samples per side.
/// Ties keep the first feature, then the smallest threshold.
pub fn best_split(x: &Matrix, t: &[u8], samples: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = samples.len();
    let total_treated = samples.iter().filter(|&&i| t[i] == 1).count();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order = samples.to_vec();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left_treated = 0;
        for k in 0..n - 1 {
            left_treated += t[order[k]] as usize;
            let (lo, hi) = (x.get(order[k], f), x.get(order[k + 1], f));
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let impurity = (n_left as f64 * gini(left_treated, n_left)
                + (n - n_left) as f64 * gini(total_treated - left_treated, n - n_left))
                / n as f64;
            if best.is_none_or(|(_, _, b)| impurity < b) {
                best = Some((f, 0.5 * (lo + hi), impurity));
            }
        }
    }
    best
}

pub fn grow(x: &Matrix, t: &[u8], samples: &[usize], max_depth: usize, min_leaf: usize) -> Vec<TreeNode> {
    let mut nodes = Vec::new();
    grow_into(&mut nodes, x, t, samples, max_depth, min_leaf);
    nodes
}

fn grow_into(
    nodes: &mut Vec<TreeNode>,
    x: &Matrix,
    t: &[u8],
    samples: &[usize],
    depth: usize,
    min_leaf: usize,
) -> usize {
    let id = nodes.len();
    let treated = samples.iter().filter(|&&i| t[i] == 1).count();
    let leaf = TreeNode::Leaf {
        value: treated as f64 / samples.len().max(1) as f64,
        count: samples.len(),
    };
    nodes.push(leaf.clone());
    if depth == 0 || samples.len() < 2 * min_leaf {
        return id;
    }
    let parent = gini(treated, samples.len());
    let Some((feature, threshold, impurity)) = best_split(x, t, samples, min_leaf) else {
        return id;
    };
    if impurity >= parent {
        return id;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x.get(i, feature) <= threshold);
    let left = grow_into(nodes, x, t, &l, depth - 1, min_leaf);
    let right = grow_into(nodes, x, t, &r, depth - 1, min_leaf);
    nodes[id] = TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}
