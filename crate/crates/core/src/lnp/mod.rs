//! Semi-supervised label propagation over local linear reconstructions.
//!
//! Each point is rebuilt from its `k` nearest neighbours; the same weights
//! then carry label scores from labeled to unlabeled points until a fixed
//! point. With the geodesic metric the points are first unfolded by
//! stress-majorization MDS of their shortest-path distances.

mod io;
mod propagate;
mod sweep;
mod weights;

use nalgebra::{DMatrix, SymmetricEigen};

pub use io::{read_labels, write_predictions, ClassSet};
pub use propagate::{discretize, one_hot, propagate, LabelMatrix, PropagateOptions, Propagation};
pub use sweep::{
    draw_balanced, pne_curve, read_sweep_table, sensitivity_sweep, write_sweep_table, SweepConfig, SweepRow,
    SweepSummary, SweepTable,
};
pub use weights::{local_weights, reconstruction_weights, ridge, WeightMatrix, WeightOptions};

use crate::error::{Error, Result};
use crate::manifold::{geodesic_distances, smacof_mds, Metric, PointSet, SmacofOptions};
use crate::rng::{cell_rng, Rng};

/// Replaces `points` by an MDS reconstruction of their geodesic distances,
/// in the same dimension.
pub fn unfold(points: &PointSet, rng: &mut Rng, opts: &SmacofOptions) -> Result<PointSet> {
    let geo = geodesic_distances(points)?;
    let r = smacof_mds(&geo.distances, points.dim, rng, opts)?;
    let mut out = r.points;
    out.ids = points.ids.clone();
    Ok(out)
}

/// Points the weights are computed on: as given, or unfolded for the geodesic metric.
pub fn prepare(points: &PointSet, metric: Metric, rng: &mut Rng, smacof: &SmacofOptions) -> Result<PointSet> {
    match metric {
        Metric::Euclidean => Ok(points.clone()),
        Metric::Geodesic => unfold(points, rng, smacof),
    }
}

/// Low-dimensional coordinates that the weights reconstruct best: bottom
/// non-constant eigenvectors of `(I - W)^T (I - W)`, scaled by `sqrt(n)`.
pub fn lle_embedding(w: &WeightMatrix, dim: usize) -> Result<PointSet> {
    let n = w.len();
    if dim == 0 || dim + 1 > n {
        return Err(Error::invalid(format!("embedding dimension {dim} too large for {n} points")));
    }
    let a = DMatrix::identity(n, n) - w.to_dense();
    let m = a.transpose() * &a;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    let scale = (n as f64).sqrt();
    let mut data = vec![0.0; n * dim];
    for (axis, &idx) in order.iter().skip(1).take(dim).enumerate() {
        let v = eig.eigenvectors.column(idx);
        for i in 0..n {
            data[i * dim + axis] = v[i] * scale;
        }
    }
    PointSet::new(dim, data)
}

#[derive(Debug, Clone)]
pub struct LnpProblem {
    pub points: PointSet,
    /// Known class per point, `None` when unlabeled.
    pub labels: Vec<Option<usize>>,
    pub classes: usize,
    pub k: usize,
    pub metric: Metric,
    pub seed: u64,
    pub weights: WeightOptions,
    pub propagate: PropagateOptions,
    pub smacof: SmacofOptions,
}

impl LnpProblem {
    pub fn new(points: PointSet, labels: Vec<Option<usize>>, classes: usize, k: usize, metric: Metric) -> Self {
        LnpProblem {
            points,
            labels,
            classes,
            k,
            metric,
            seed: 1,
            weights: WeightOptions::default(),
            propagate: PropagateOptions::default(),
            smacof: SmacofOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.labels.len() != self.points.len() {
            return Err(Error::invalid("label vector does not match the point count"));
        }
        if self.k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        if !self.points.is_finite() {
            return Err(Error::Data("non-finite coordinates".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub classes: Vec<Option<usize>>,
    pub propagation: Propagation,
    pub weights: WeightMatrix,
    /// The unfolded points when the geodesic metric was used.
    pub unfolded: Option<PointSet>,
}

/// Runs the whole procedure: optional unfolding, weights, propagation, argmax.
pub fn predict(problem: &LnpProblem) -> Result<Prediction> {
    problem.validate()?;
    let mut rng = cell_rng(problem.seed, "unfold", &[]);
    let prepared = prepare(&problem.points, problem.metric, &mut rng, &problem.smacof)?;
    let w = reconstruction_weights(&prepared, problem.k, &problem.weights)?;
    let propagation = propagate(&w, &problem.labels, problem.classes, &problem.propagate)?;
    let classes = discretize(&propagation.scores);
    Ok(Prediction {
        classes,
        propagation,
        weights: w,
        unfolded: (problem.metric == Metric::Geodesic).then_some(prepared),
    })
}

/// Disagreements between two entity -> class maps over the same entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureEvaluation {
    pub errors: usize,
    pub misses: Vec<String>,
}

pub fn evaluate_fixture(predictions: &[(String, String)], truth: &[(String, String)]) -> Result<FixtureEvaluation> {
    use std::collections::BTreeMap;
    let p: BTreeMap<&str, &str> = predictions.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let t: BTreeMap<&str, &str> = truth.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    if p.len() != predictions.len() || t.len() != truth.len() {
        return Err(Error::Data("duplicate entity in fixture".into()));
    }
    if !p.keys().eq(t.keys()) {
        return Err(Error::Data("prediction and truth cover different entities".into()));
    }
    // Report misses in the order of the prediction file.
    let misses: Vec<String> = predictions
        .iter()
        .filter(|(e, c)| t[e.as_str()] != c)
        .map(|(e, _)| e.clone())
        .collect();
    Ok(FixtureEvaluation {
        errors: misses.len(),
        misses,
    })
}
