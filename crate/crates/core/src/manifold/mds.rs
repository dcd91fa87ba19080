use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use super::{DistanceMatrix, PointSet};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;

fn check_input(d: &DistanceMatrix, dim: usize) -> Result<()> {
    if d.n < 3 {
        return Err(Error::invalid("MDS needs at least three points"));
    }
    if dim == 0 || dim > d.n - 1 {
        return Err(Error::invalid(format!("MDS dimension {dim} outside 1..={}", d.n - 1)));
    }
    if d.data.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ClassicalMds {
    pub points: PointSet,
    /// All eigenvalues of the centered Gram matrix, largest first.
    pub eigenvalues: Vec<f64>,
    /// Number of requested axes that had to be zero-padded.
    pub padded_axes: usize,
}

/// Torgerson scaling. Signs are fixed so each axis' largest-magnitude
/// coordinate is positive.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Result<ClassicalMds> {
    check_input(d, dim)?;
    let n = d.n;
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j) * d.get(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| sq.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - col_means[j] + grand));
    // Exact symmetry keeps the solver on its symmetric path.
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cutoff = scale * 1e-12;

    let mut coords = vec![0.0; n * dim];
    let mut padded_axes = 0;
    for (axis, &idx) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= cutoff {
            padded_axes += 1;
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let root = lambda.sqrt();
        let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = v.iter().position(|x| x.abs() >= max_abs * (1.0 - 1e-9)).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i * dim + axis] = sign * root * v[i];
        }
    }
    if padded_axes > 0 {
        log::warn!("classical MDS: {padded_axes} of {dim} axes have no positive eigenvalue, padded with zeros");
    }
    Ok(ClassicalMds {
        points: PointSet::new(dim, coords)?,
        eigenvalues,
        padded_axes,
    })
}

/// Raw stress `sum_{i<j} (delta_ij - d_ij(X))^2`.
pub fn stress(d: &DistanceMatrix, x: &PointSet) -> f64 {
    let n = d.n;
    let per_row = par::map_range(n, |i| {
        let a = x.row(i);
        let mut s = 0.0;
        for j in i + 1..n {
            s += (d.get(i, j) - dist(a, x.row(j))).powi(2);
        }
        s
    });
    per_row.iter().sum()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct SmacofOptions {
    pub max_iters: usize,
    /// Stop once the relative stress decrease falls below this.
    pub tol: f64,
    /// Starting configuration; random when absent.
    pub init: Option<PointSet>,
}

impl Default for SmacofOptions {
    fn default() -> Self {
        SmacofOptions {
            max_iters: 500,
            tol: 1e-9,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmacofResult {
    pub points: PointSet,
    /// Stress of the initial configuration followed by one entry per iteration.
    pub stress_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Guttman transform with unit weights: `X+ = B(X) X / n`.
fn guttman(d: &DistanceMatrix, x: &PointSet) -> PointSet {
    let (n, dim) = (d.n, x.dim);
    let mut out = vec![0.0; n * dim];
    par::fill_rows(&mut out, dim, |i, row| {
        let xi = x.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = x.row(j);
            let dij = dist(xi, xj);
            if dij > 0.0 {
                let b = d.get(i, j) / dij;
                for c in 0..dim {
                    row[c] += b * (xi[c] - xj[c]);
                }
            }
        }
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    });
    PointSet {
        ids: x.ids.clone(),
        dim,
        data: out,
    }
}

/// Stress majorization from a seeded random (or given) start.
pub fn smacof_mds(d: &DistanceMatrix, dim: usize, rng: &mut Rng, opts: &SmacofOptions) -> Result<SmacofResult> {
    if d.n < 3 {
        return Err(Error::invalid("MDS needs at least three points"));
    }
    if dim == 0 {
        return Err(Error::invalid("MDS dimension must be positive"));
    }
    let n = d.n;
    let mut x = match &opts.init {
        Some(init) => {
            if init.len() != n || init.dim != dim {
                return Err(Error::invalid("initial configuration has the wrong shape"));
            }
            init.clone()
        }
        None => {
            let s = d.mean_offdiag();
            let s = if s > 0.0 { s } else { 1.0 };
            let data = (0..n * dim).map(|_| rng.random_range(-s..=s)).collect();
            PointSet::new(dim, data)?
        }
    };
    let total: f64 = d.data.iter().map(|v| v * v).sum::<f64>() / 2.0;
    let floor = total * 1e-28;
    let mut current = stress(d, &x);
    let mut history = vec![current];
    let mut converged = current <= floor;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        let next = guttman(d, &x);
        let s = stress(d, &next);
        iterations += 1;
        history.push(s);
        x = next;
        let rel = (current - s) / current;
        current = s;
        if s <= floor || rel < opts.tol {
            converged = true;
        }
    }
    if !converged {
        log::debug!("smacof stopped after {iterations} iterations without reaching tol {}", opts.tol);
    }
    Ok(SmacofResult {
        points: x,
        stress_history: history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::super::pairwise_euclidean;
    use super::*;
    use crate::rng::seeded;

    fn max_dist_gap(a: &DistanceMatrix, b: &DistanceMatrix) -> f64 {
        a.data.iter().zip(&b.data).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn equilateral_triangle() {
        let d = DistanceMatrix::from_fn(3, super::super::Metric::Euclidean, |_, _| 1.0);
        let r = classical_mds(&d, 2).unwrap();
        let back = pairwise_euclidean(&r.points);
        assert!(max_dist_gap(&d, &back) < 1e-10);
        assert_eq!(r.padded_axes, 0);
    }

    #[test]
    fn pads_missing_axes() {
        let p = PointSet::new(1, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let d = pairwise_euclidean(&p);
        let r = classical_mds(&d, 3).unwrap();
        assert_eq!(r.padded_axes, 2);
        assert!(r.points.rows().all(|row| row[1] == 0.0 && row[2] == 0.0));
        assert!(max_dist_gap(&d, &pairwise_euclidean(&r.points)) < 1e-10);
    }

    #[test]
    fn sign_convention() {
        let p = PointSet::new(1, vec![0.0, 1.0, 5.0]).unwrap();
        let r = classical_mds(&pairwise_euclidean(&p), 1).unwrap();
        let xs: Vec<f64> = r.points.data.clone();
        let pivot = xs.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        assert!(pivot > 0.0);
        // Mirror image input yields the same output.
        let q = PointSet::new(1, vec![0.0, -1.0, -5.0]).unwrap();
        let r2 = classical_mds(&pairwise_euclidean(&q), 1).unwrap();
        for (a, b) in xs.iter().zip(&r2.points.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        let d = DistanceMatrix::from_fn(3, super::super::Metric::Euclidean, |_, _| 1.0);
        assert!(classical_mds(&d, 3).is_err());
        assert!(classical_mds(&d, 0).is_err());
    }

    #[test]
    fn smacof_fixed_point() {
        let p = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 3.0, 1.0]).unwrap();
        let d = pairwise_euclidean(&p);
        let opts = SmacofOptions {
            init: Some(p.clone()),
            ..Default::default()
        };
        let r = smacof_mds(&d, 2, &mut seeded(0), &opts).unwrap();
        assert!(r.iterations <= 1);
        assert!(*r.stress_history.last().unwrap() < 1e-20);
    }

    #[test]
    fn smacof_monotone_and_recovers() {
        let mut rng = seeded(5);
        let data: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = PointSet::new(2, data).unwrap();
        let d = pairwise_euclidean(&p);
        for seed in 0..5 {
            let r = smacof_mds(&d, 2, &mut seeded(seed), &SmacofOptions::default()).unwrap();
            for w in r.stress_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-24, "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn duplicated_points_collapse() {
        let d = DistanceMatrix::from_fn(5, super::super::Metric::Euclidean, |_, _| 0.0);
        let r = smacof_mds(&d, 2, &mut seeded(1), &SmacofOptions::default()).unwrap();
        let back = pairwise_euclidean(&r.points);
        assert!(back.data.iter().all(|&x| x < 1e-12));
    }
}
