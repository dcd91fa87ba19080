use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{knn_sets, pairwise_euclidean, PointSet};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightOptions {
    /// Relative ridge added to each local Gram matrix.
    pub epsilon: f64,
    /// Drop neighbours with negative weight and re-solve until none remain.
    pub nonnegative: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            epsilon: 1e-3,
            nonnegative: false,
        }
    }
}

/// Sparse reconstruction weights: row `i` mixes `neighbors[i]` with `weights[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.weights[i].iter().sum()
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().flatten().any(|&w| w < 0.0)
    }

    /// Dense `n x n` copy.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, (nb, w)) in self.neighbors.iter().zip(&self.weights).enumerate() {
            for (&j, &v) in nb.iter().zip(w) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Ridge actually added to a Gram matrix with the given trace.
pub fn ridge(trace: f64, k: usize, epsilon: f64) -> f64 {
    if trace > 0.0 {
        epsilon * trace / k as f64
    } else {
        epsilon
    }
}

/// Weights reconstructing `x` from `nbrs`, summing to one.
pub fn local_weights(x: &[f64], nbrs: &[&[f64]], opts: &WeightOptions) -> Vec<f64> {
    let k = nbrs.len();
    let mut active: Vec<usize> = (0..k).collect();
    loop {
        let w = solve_local(x, &active.iter().map(|&a| nbrs[a]).collect::<Vec<_>>(), opts.epsilon);
        let mut full = vec![0.0; k];
        for (&a, &v) in active.iter().zip(&w) {
            full[a] = v;
        }
        if !opts.nonnegative || active.len() == 1 {
            return full;
        }
        let worst = (0..active.len()).filter(|&p| w[p] < 0.0).min_by(|&a, &b| w[a].total_cmp(&w[b]));
        match worst {
            Some(p) => {
                active.remove(p);
            }
            None => return full,
        }
    }
}

fn solve_local(x: &[f64], nbrs: &[&[f64]], epsilon: f64) -> Vec<f64> {
    let k = nbrs.len();
    let diffs: Vec<Vec<f64>> = nbrs.iter().map(|n| x.iter().zip(*n).map(|(a, b)| a - b).collect()).collect();
    let mut g = DMatrix::from_fn(k, k, |a, b| diffs[a].iter().zip(&diffs[b]).map(|(p, q)| p * q).sum::<f64>());
    let r = ridge(g.trace(), k, epsilon);
    for a in 0..k {
        g[(a, a)] += r;
    }
    let ones = DVector::from_element(k, 1.0);
    let sol = match g.clone().cholesky() {
        Some(c) => c.solve(&ones),
        None => g.lu().solve(&ones).unwrap_or_else(|| ones.clone()),
    };
    let total: f64 = sol.iter().sum();
    sol.iter().map(|v| v / total).collect()
}

/// Weights over each point's `k` nearest Euclidean neighbours in `points`.
pub fn reconstruction_weights(points: &PointSet, k: usize, opts: &WeightOptions) -> Result<WeightMatrix> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..{n}")));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::invalid("regularization must be positive"));
    }
    let d = pairwise_euclidean(points);
    let neighbors = knn_sets(&d, k);
    let weights = par::map_range(n, |i| {
        let nb: Vec<&[f64]> = neighbors[i].iter().map(|&j| points.row(j)).collect();
        local_weights(points.row(i), &nb, opts)
    });
    Ok(WeightMatrix { k, neighbors, weights })
}
