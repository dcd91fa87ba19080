//! Cross-checks of the production code against the independent oracles.
//!
//! Each check returns its worst measured error so callers can report it;
//! `verify` and the test suites share these.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng as _;

use super::oracle::{
    brute_force_lnp_weights, finite_diff_grads, harmonic_solve, hypergeom_pmf, kink_distance, procrustes_residual,
};
use crate::error::Result;
use crate::hashtag::edge_pvalue;
use crate::lnp::{local_weights, propagate, ridge, PropagateOptions, WeightMatrix, WeightOptions};
use crate::manifold::{classical_mds, pairwise_euclidean, smacof_mds, PointSet, SmacofOptions};
use crate::oowe::{corrupt, gradients, Ngram, OoweModel, Shape};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    /// Cases left out by the check's own rules (e.g. too close to a kink).
    pub skipped: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.max_error < self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<14} cases={} skipped={} max_err={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.skipped,
            self.max_error,
            self.tolerance
        )
    }
}

/// NaN-propagating max, so a NaN error can never pass.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `edge_pvalue` against exact hypergeometric probabilities for every valid
/// `(N, n_i, n_j, k)` with `N <= max_n`.
pub fn check_hypergeometric(max_n: u64) -> Check {
    let mut err = 0.0f64;
    let mut cases = 0;
    for n in 1..=max_n {
        for ni in 1..=n {
            for nj in 1..=n {
                let lo = (ni + nj).saturating_sub(n).max(1);
                for k in lo..=ni.min(nj) {
                    let want = hypergeom_pmf(n, ni, nj, k);
                    let e = match edge_pvalue(ni, nj, k, n) {
                        Ok(got) if want > 0.0 => ((got - want) / want).abs(),
                        Ok(got) => got.abs(),
                        Err(_) => f64::INFINITY,
                    };
                    err = worse(err, e);
                    cases += 1;
                }
            }
        }
    }
    Check {
        name: "hypergeometric",
        cases,
        skipped: 0,
        max_error: err,
        tolerance: 1e-9,
    }
}

/// Relative error between two gradient vectors: largest entry difference over
/// the largest entry magnitude.
fn grad_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) });
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| worse(m, (a - b).abs()));
    if scale.is_nan() || diff.is_nan() {
        return f64::NAN;
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Minimum distance to a hinge or clipping kink for a gradient case to count.
pub const KINK_MARGIN: f64 = 1e-4;

/// Analytic gradients against central differences on `ngrams` random ngram
/// pairs of `model`. Pairs within [`KINK_MARGIN`] of a kink are skipped.
pub fn gradient_errors(model: &OoweModel, ngrams: usize, alpha: f64, rng: &mut Rng) -> (usize, usize, f64) {
    let s = model.shape;
    // NaN weights can silence every hinge and zero both gradients alike.
    if !model.params.is_finite() {
        return (ngrams, 0, f64::NAN);
    }
    let (mut cases, mut skipped, mut err) = (0, 0, 0.0f64);
    for _ in 0..ngrams {
        let ids: Vec<usize> = (0..s.window).map(|_| rng.random_range(0..s.rows)).collect();
        let gold = rng.random_range(1..=s.categories);
        let t = Ngram::new(ids, gold);
        let t_r = match corrupt(&t, s.rows, rng) {
            Ok(c) => c,
            Err(_) => return (cases, skipped, f64::NAN),
        };
        let kink = kink_distance(model, &t.ids, &t_r.ids, gold, alpha);
        if kink < KINK_MARGIN {
            skipped += 1;
            continue;
        }
        let analytic = match gradients(model, &t, &t_r, gold, alpha) {
            Ok((_, g)) => g,
            Err(_) => return (cases, skipped, f64::NAN),
        };
        let numeric = finite_diff_grads(model, &t.ids, &t_r.ids, gold, alpha, 1e-6);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for row in 0..s.rows {
            for col in 0..s.dim {
                a.push(analytic.emb_entry(row, col));
                b.push(numeric.emb[row * s.dim + col]);
            }
        }
        for (ga, gn) in [
            (&analytic.w1, &numeric.w1),
            (&analytic.b1, &numeric.b1),
            (&analytic.w2, &numeric.w2),
            (&analytic.b2, &numeric.b2),
        ] {
            a.extend_from_slice(ga);
            b.extend_from_slice(gn);
        }
        err = worse(err, grad_error(&a, &b));
        cases += 1;
    }
    (cases, skipped, err)
}

/// Random small models, each probed with `ngrams` random ngrams, at every `alpha`.
pub fn check_gradients(models: usize, ngrams: usize, alphas: &[f64], seed: u64) -> Check {
    let mut rng = seeded(seed);
    let (mut cases, mut skipped, mut err) = (0, 0, 0.0f64);
    for m in 0..models {
        let shape = Shape {
            rows: 12 + m,
            dim: 4,
            hidden: 5,
            categories: 6,
            window: 3,
        };
        let mut model = OoweModel::init(shape, &mut rng);
        // Larger embeddings than the training init so hidden units are not all linear.
        for x in &mut model.params.emb {
            *x = rng.random_range(-0.8..0.8);
        }
        for x in model.params.b1.iter_mut().chain(model.params.b2.iter_mut()) {
            *x = rng.random_range(-0.3..0.3);
        }
        for &alpha in alphas {
            let (c, s, e) = gradient_errors(&model, ngrams, alpha, &mut rng);
            cases += c;
            skipped += s;
            err = worse(err, e);
        }
    }
    Check {
        name: "gradients",
        cases,
        skipped,
        max_error: err,
        tolerance: 1e-4,
    }
}

fn random_point(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Weight solver against brute-force minimization for `k = 2` and `k = 3`,
/// plus the unit row-sum constraint.
pub fn check_weights(instances: usize, seed: u64) -> Check {
    let mut rng = seeded(seed);
    let opts = WeightOptions::default();
    let mut err = 0.0f64;
    for i in 0..instances {
        let k = 2 + i % 2;
        let d = 2 + rng.random_range(0..2);
        let x = random_point(&mut rng, d);
        let nbrs: Vec<Vec<f64>> = (0..k).map(|_| random_point(&mut rng, d)).collect();
        let refs: Vec<&[f64]> = nbrs.iter().map(Vec::as_slice).collect();
        let trace: f64 = refs
            .iter()
            .map(|n| n.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        let w = local_weights(&x, &refs, &opts);
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            err = f64::INFINITY;
        }
        match brute_force_lnp_weights(&x, &refs, ridge(trace, k, opts.epsilon), 1e-2) {
            Ok(b) => {
                for (a, b) in w.iter().zip(&b) {
                    err = worse(err, (a - b).abs());
                }
            }
            Err(_) => err = f64::NAN,
        }
    }
    Check {
        name: "weights",
        cases: instances,
        skipped: 0,
        max_error: err,
        tolerance: 1e-6,
    }
}

/// A random row-stochastic nonnegative weight matrix in which every point
/// reaches point 0 through its predecessor.
pub fn random_chain_weights(n: usize, k: usize, rng: &mut Rng) -> WeightMatrix {
    let mut neighbors = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut nb: Vec<usize> = sample(rng, n - 1, k.min(n - 1))
            .into_iter()
            .map(|j| if j >= i { j + 1 } else { j })
            .collect();
        if i > 0 && !nb.contains(&(i - 1)) {
            nb[0] = i - 1;
        }
        let raw: Vec<f64> = nb.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        neighbors.push(nb);
        weights.push(raw.into_iter().map(|w| w / total).collect());
    }
    WeightMatrix { k, neighbors, weights }
}

/// Iterative propagation against the direct solve of its fixed point.
pub fn check_harmonic(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = seeded(seed);
    let opts = PropagateOptions {
        tol: 1e-13,
        max_iters: 200_000,
        ..Default::default()
    };
    let mut err = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(5..=50);
        let k = rng.random_range(2..=5.min(n - 1));
        let classes = rng.random_range(2..=3);
        let w = random_chain_weights(n, k, &mut rng);
        let mut labels = vec![None; n];
        labels[0] = Some(0);
        for l in labels.iter_mut().skip(1) {
            if rng.random_bool(0.2) {
                *l = Some(rng.random_range(0..classes));
            }
        }
        let got = propagate(&w, &labels, classes, &opts)?;
        let want = harmonic_solve(&w, &labels, classes)?;
        for (a, b) in got.scores.data.iter().zip(&want.data) {
            err = worse(err, (a - b).abs());
        }
        if !got.converged {
            err = worse(err, f64::INFINITY);
        }
    }
    Ok(Check {
        name: "harmonic",
        cases: instances,
        skipped: 0,
        max_error: err,
        tolerance: 1e-8,
    })
}

/// Classical MDS on exact Euclidean distances must recover the configuration.
pub fn check_procrustes(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = seeded(seed);
    let mut err = 0.0f64;
    for _ in 0..instances {
        let d = rng.random_range(2..=10);
        let n = rng.random_range(d + 2..=100);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = PointSet::new(d, data)?;
        let y = classical_mds(&pairwise_euclidean(&x), d)?.points;
        err = worse(err, procrustes_residual(&x, &y)?);
    }
    Ok(Check {
        name: "procrustes",
        cases: instances,
        skipped: 0,
        max_error: err,
        tolerance: 1e-8,
    })
}

/// Largest relative stress increase between consecutive smacof iterations
/// over random problems, one per seed.
pub fn check_smacof_monotone(seeds: u64) -> Result<Check> {
    let mut err = 0.0f64;
    for seed in 0..seeds {
        let mut rng = seeded(1000 + seed);
        let n = rng.random_range(5..=40);
        let data: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d = pairwise_euclidean(&PointSet::new(3, data)?);
        let r = smacof_mds(&d, 2, &mut rng, &SmacofOptions::default())?;
        for w in r.stress_history.windows(2) {
            let rise = (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE);
            err = worse(err, rise.max(0.0));
        }
    }
    Ok(Check {
        name: "smacof",
        cases: seeds as usize,
        skipped: 0,
        max_error: err,
        // relative rounding slack, one part in 10^12
        tolerance: 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_pass() {
        assert!(check_hypergeometric(12).passed());
        assert!(check_gradients(2, 5, &[0.0, 0.5, 1.0], 1).passed());
        assert!(check_weights(20, 1).passed());
        assert!(check_harmonic(5, 1).unwrap().passed());
        assert!(check_procrustes(5, 1).unwrap().passed());
        assert!(check_smacof_monotone(5).unwrap().passed());
    }

    #[test]
    fn corrupted_model_fails_gradient_check() {
        let shape = Shape {
            rows: 10,
            dim: 3,
            hidden: 4,
            categories: 6,
            window: 3,
        };
        let mut m = OoweModel::init(shape, &mut seeded(1));
        m.params.w1[0] = f64::NAN;
        let (_, _, e) = gradient_errors(&m, 3, 0.5, &mut seeded(2));
        assert!(e.is_nan());
        let c = Check {
            name: "gradients",
            cases: 3,
            skipped: 0,
            max_error: e,
            tolerance: 1e-4,
        };
        assert!(!c.passed());
        assert!(c.to_string().starts_with("FAIL"));
    }
}
