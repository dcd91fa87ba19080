//! Reference computations used to cross-check the main components. None of
//! them call into the code they check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lnp::{LabelMatrix, WeightMatrix};
use crate::manifold::PointSet;
use crate::oowe::{OoweModel, Params};

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Probability of exactly `k` shared draws when `n_j` of `n` items are drawn
/// and `n_i` are marked. Exact integer arithmetic while it fits, log
/// factorials beyond.
pub fn hypergeom_pmf(n: u64, n_i: u64, n_j: u64, k: u64) -> f64 {
    if n_i > n || n_j > n || k > n_i.min(n_j) || n_j - k > n - n_i {
        return 0.0;
    }
    let exact = (|| {
        let a = binomial(n_i, k)?;
        let b = binomial(n - n_i, n_j - k)?;
        let d = binomial(n, n_j)?;
        Some((a.checked_mul(b)?, d))
    })();
    if let Some((num, den)) = exact {
        // Reduce before converting so both sides stay exact when small.
        let g = gcd(num, den);
        return (num / g) as f64 / (den / g) as f64;
    }
    let ln_c = |a: u64, b: u64| ln_factorial(a) - ln_factorial(b) - ln_factorial(a - b);
    (ln_c(n_i, k) + ln_c(n - n_i, n_j - k) - ln_c(n, n_j)).exp()
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Loss recomputed with plain matrix algebra, independent of the training code.
pub fn reference_loss(params: &Params, model: &OoweModel, t: &[usize], t_r: &[usize], gold: usize, alpha: f64) -> f64 {
    let s = model.shape;
    let w1 = DMatrix::from_row_slice(s.hidden, s.input_len(), &params.w1);
    let b1 = DVector::from_column_slice(&params.b1);
    let w2 = DMatrix::from_row_slice(s.outputs(), s.hidden, &params.w2);
    let b2 = DVector::from_column_slice(&params.b2);
    let scores = |ids: &[usize]| -> DVector<f64> {
        let x = DVector::from_iterator(
            s.input_len(),
            ids.iter().flat_map(|&id| params.emb[id * s.dim..(id + 1) * s.dim].iter().copied()),
        );
        let z = (&w1 * x + &b1).map(|a| a.clamp(-1.0, 1.0));
        &w2 * z + &b2
    };
    let f = scores(t);
    let fr = scores(t_r);
    let c = s.categories;
    let mut l = (1.0 - alpha) * (1.0 + fr[0] - f[0]).max(0.0);
    if alpha > 0.0 {
        for j in 1..=c {
            if j != gold {
                l += alpha / (c - 1) as f64 * (1.0 + f[j] - f[gold]).max(0.0);
            }
        }
    }
    l
}

/// Distance of an example from the nearest non-differentiable point: the
/// smallest hinge margin or hard-tanh boundary gap.
pub fn kink_distance(model: &OoweModel, t: &[usize], t_r: &[usize], gold: usize, alpha: f64) -> f64 {
    let s = model.shape;
    let p = &model.params;
    let w1 = DMatrix::from_row_slice(s.hidden, s.input_len(), &p.w1);
    let w2 = DMatrix::from_row_slice(s.outputs(), s.hidden, &p.w2);
    let mut gap = f64::INFINITY;
    let mut scores = |ids: &[usize]| -> DVector<f64> {
        let x = DVector::from_iterator(
            s.input_len(),
            ids.iter().flat_map(|&id| p.emb[id * s.dim..(id + 1) * s.dim].iter().copied()),
        );
        let a = &w1 * x + DVector::from_column_slice(&p.b1);
        for v in a.iter() {
            gap = gap.min((v.abs() - 1.0).abs());
        }
        &w2 * a.map(|v| v.clamp(-1.0, 1.0)) + DVector::from_column_slice(&p.b2)
    };
    let f = scores(t);
    let fr = scores(t_r);
    let mut margins = vec![1.0 + fr[0] - f[0]];
    if alpha > 0.0 {
        margins.extend((1..=s.categories).filter(|&j| j != gold).map(|j| 1.0 + f[j] - f[gold]));
    }
    margins.iter().fold(gap, |g, m| g.min(m.abs()))
}

/// Central-difference gradient of [`reference_loss`] for every parameter.
pub fn finite_diff_grads(model: &OoweModel, t: &[usize], t_r: &[usize], gold: usize, alpha: f64, eps: f64) -> Params {
    let mut grads = Params::zeros(model.shape);
    let mut p = model.params.clone();
    for g in 0..5 {
        for i in 0..p.groups()[g].len() {
            let orig = p.groups()[g][i];
            p.groups_mut()[g][i] = orig + eps;
            let up = reference_loss(&p, model, t, t_r, gold, alpha);
            p.groups_mut()[g][i] = orig - eps;
            let down = reference_loss(&p, model, t, t_r, gold, alpha);
            p.groups_mut()[g][i] = orig;
            grads.groups_mut()[g][i] = (up - down) / (2.0 * eps);
        }
    }
    grads
}

fn reconstruction_objective(x: &[f64], nbrs: &[&[f64]], w: &[f64], ridge: f64) -> f64 {
    let mut err = 0.0;
    for c in 0..x.len() {
        let r: f64 = x[c] - nbrs.iter().zip(w).map(|(n, wi)| wi * n[c]).sum::<f64>();
        err += r * r;
    }
    err + ridge * w.iter().map(|v| v * v).sum::<f64>()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimum of a convex `f`, widening the bracket around
/// `[lo, hi]` until the minimum lies strictly inside.
fn line_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let w = golden_section(&f, lo, hi, 1e-13);
        let span = hi - lo;
        if (w - lo > 1e-6 * span && hi - w > 1e-6 * span) || span > 1e12 {
            return w;
        }
        lo -= span;
        hi += span;
    }
}

/// Minimizes `|x - sum w_j n_j|^2 + ridge |w|^2` subject to `sum w = 1` by
/// search: a golden-section line search for two neighbours; for three, a
/// grid over the two free weights in `[-2, 3]` locates the basin and nested
/// line searches (inner over the second weight, outer over the first)
/// polish it.
pub fn brute_force_lnp_weights(x: &[f64], nbrs: &[&[f64]], ridge: f64, resolution: f64) -> Result<Vec<f64>> {
    match nbrs.len() {
        2 => {
            let w = line_min(|w| reconstruction_objective(x, nbrs, &[w, 1.0 - w], ridge), -2.0, 3.0);
            Ok(vec![w, 1.0 - w])
        }
        3 => {
            let f = |a: f64, b: f64| reconstruction_objective(x, nbrs, &[a, b, 1.0 - a - b], ridge);
            let steps = ((5.0 / resolution).round() as usize).max(2);
            let (mut ca, mut cb, mut best) = (0.0, 0.0, f64::INFINITY);
            for i in 0..=steps {
                for j in 0..=steps {
                    let a = -2.0 + 5.0 * i as f64 / steps as f64;
                    let b = -2.0 + 5.0 * j as f64 / steps as f64;
                    let v = f(a, b);
                    if v < best {
                        (ca, cb, best) = (a, b, v);
                    }
                }
            }
            let inner = |a: f64| line_min(|b| f(a, b), cb - 1.0, cb + 1.0);
            let a = line_min(|a| f(a, inner(a)), ca - 1.0, ca + 1.0);
            let b = inner(a);
            Ok(vec![a, b, 1.0 - a - b])
        }
        k => Err(Error::invalid(format!("brute-force weights support 2 or 3 neighbours, got {k}"))),
    }
}

/// Fixed point of the label recursion by direct linear solve of
/// `(I - W_uu) L_u = W_ul L_l`.
pub fn harmonic_solve(w: &WeightMatrix, labels: &[Option<usize>], classes: usize) -> Result<LabelMatrix> {
    let n = labels.len();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (&j, &v) in w.neighbors[i].iter().zip(&w.weights[i]) {
            dense[(i, j)] += v;
        }
    }
    let unl: Vec<usize> = (0..n).filter(|&i| labels[i].is_none()).collect();
    let mut out = LabelMatrix::zeros(n, classes);
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out.data[i * classes + c] = 1.0;
        }
    }
    if unl.is_empty() {
        return Ok(out);
    }
    let u = unl.len();
    let a = DMatrix::from_fn(u, u, |p, q| f64::from(p == q) - dense[(unl[p], unl[q])]);
    let rhs = DMatrix::from_fn(u, classes, |p, c| {
        (0..n)
            .filter(|&j| labels[j] == Some(c))
            .map(|j| dense[(unl[p], j)])
            .sum::<f64>()
    });
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::Verification("singular harmonic system".into()))?;
    for (p, &i) in unl.iter().enumerate() {
        for c in 0..classes {
            out.data[i * classes + c] = sol[(p, c)];
        }
    }
    Ok(out)
}

/// Residual `|X R - Y|_F / |Y|_F` after centring both and choosing the best
/// orthogonal `R`. The narrower set is zero-padded.
pub fn procrustes_residual(x: &PointSet, y: &PointSet) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("Procrustes needs equal point counts"));
    }
    let d = x.dim.max(y.dim);
    let centred = |p: &PointSet| {
        let n = p.len();
        let mut m = DMatrix::<f64>::zeros(n, d);
        for c in 0..p.dim {
            let mean = p.rows().map(|r| r[c]).sum::<f64>() / n as f64;
            for (i, r) in p.rows().enumerate() {
                m[(i, c)] = r[c] - mean;
            }
        }
        m
    };
    let (a, b) = (centred(x), centred(y));
    let svd = (a.transpose() * &b).svd(true, true);
    let r = svd.u.expect("u requested") * svd.v_t.expect("v requested");
    let norm = b.norm();
    let res = (a * r - &b).norm();
    Ok(if norm > 0.0 { res / norm } else { res })
}
