use super::WeightMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Abort when any score exceeds this magnitude.
    pub divergence_limit: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            tol: 1e-9,
            max_iters: 10_000,
            divergence_limit: 1e6,
        }
    }
}

/// Soft label scores, row-major `n x classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub classes: usize,
    pub data: Vec<f64>,
}

impl LabelMatrix {
    pub fn zeros(n: usize, classes: usize) -> Self {
        LabelMatrix {
            classes,
            data: vec![0.0; n * classes],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.classes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub scores: LabelMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Synchronous label reconstruction. Labeled rows stay one-hot; unlabeled rows
/// start at zero and are replaced by the weighted mix of their neighbours.
pub fn propagate(w: &WeightMatrix, labels: &[Option<usize>], classes: usize, opts: &PropagateOptions) -> Result<Propagation> {
    let n = w.len();
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} points", labels.len())));
    }
    if classes == 0 {
        return Err(Error::invalid("need at least one class"));
    }
    let mut cur = LabelMatrix::zeros(n, classes);
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            if c >= classes {
                return Err(Error::invalid(format!("class {c} out of range")));
            }
            cur.data[i * classes + c] = 1.0;
        }
    }
    let mut next = cur.clone();
    let (mut iterations, mut converged, mut diverged) = (0, false, false);
    while iterations < opts.max_iters {
        iterations += 1;
        let mut change = 0.0f64;
        let mut peak = 0.0f64;
        for i in 0..n {
            if labels[i].is_some() {
                continue;
            }
            for c in 0..classes {
                let mut v = 0.0;
                for (&j, &wij) in w.neighbors[i].iter().zip(&w.weights[i]) {
                    v += wij * cur.data[j * classes + c];
                }
                change = change.max((v - cur.data[i * classes + c]).abs());
                peak = peak.max(v.abs());
                next.data[i * classes + c] = v;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if !(peak <= opts.divergence_limit) {
            diverged = true;
            log::debug!("label propagation diverged after {iterations} iterations");
            break;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && !diverged {
        log::debug!("label propagation hit {} iterations without converging", opts.max_iters);
    }
    Ok(Propagation {
        scores: cur,
        iterations,
        converged,
        diverged,
    })
}

/// Per-row argmax, lowest class on ties. Rows with a non-finite score get `None`.
pub fn discretize(scores: &LabelMatrix) -> Vec<Option<usize>> {
    (0..scores.len())
        .map(|i| {
            let row = scores.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            Some(best)
        })
        .collect()
}

/// One-hot rows of a discretized matrix.
pub fn one_hot(classes: &[Option<usize>], c: usize) -> LabelMatrix {
    let mut m = LabelMatrix::zeros(classes.len(), c);
    for (i, l) in classes.iter().enumerate() {
        if let Some(l) = l {
            m.data[i * c + l] = 1.0;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wm(rows: Vec<Vec<(usize, f64)>>) -> WeightMatrix {
        WeightMatrix {
            k: rows.iter().map(Vec::len).max().unwrap_or(0),
            neighbors: rows.iter().map(|r| r.iter().map(|e| e.0).collect()).collect(),
            weights: rows.iter().map(|r| r.iter().map(|e| e.1).collect()).collect(),
        }
    }

    #[test]
    fn path_midpoint() {
        let w = wm(vec![vec![(1, 1.0)], vec![(0, 0.5), (2, 0.5)], vec![(1, 1.0)]]);
        let p = propagate(&w, &[Some(0), None, Some(1)], 2, &PropagateOptions::default()).unwrap();
        assert!(p.converged);
        assert_eq!(p.scores.row(1), &[0.5, 0.5]);
        assert_eq!(p.scores.row(0), &[1.0, 0.0]);
        assert_eq!(p.scores.row(2), &[0.0, 1.0]);
    }

    #[test]
    fn unanimous_neighbours() {
        let w = wm(vec![vec![(1, 0.3), (2, 0.7)], vec![(0, 1.0)], vec![(0, 1.0)]]);
        let p = propagate(&w, &[None, Some(1), Some(1)], 2, &PropagateOptions::default()).unwrap();
        assert_eq!(discretize(&p.scores), vec![Some(1), Some(1), Some(1)]);
        assert!((p.scores.row(0)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_flagged() {
        let w = wm(vec![vec![(1, 3.0), (2, -2.0)], vec![(0, 3.0), (2, -2.0)], vec![(0, 1.0)]]);
        let p = propagate(&w, &[None, None, Some(0)], 2, &PropagateOptions::default()).unwrap();
        assert!(p.diverged && !p.converged);
    }

    #[test]
    fn discretize_ties_low() {
        let m = LabelMatrix {
            classes: 2,
            data: vec![0.7, 0.3, 0.5, 0.5, 0.1, 0.2, f64::NAN, 1.0],
        };
        assert_eq!(discretize(&m), vec![Some(0), Some(0), Some(1), None]);
    }

    #[test]
    fn rejects_bad_labels() {
        let w = wm(vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        assert!(propagate(&w, &[Some(2), None], 2, &PropagateOptions::default()).is_err());
        assert!(propagate(&w, &[None], 2, &PropagateOptions::default()).is_err());
    }
}
