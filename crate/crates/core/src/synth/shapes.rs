use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::manifold::PointSet;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    TwoMoons,
    SwissRoll,
    Blobs,
    FlatGrid,
}

impl std::str::FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "two_moons" => Ok(ManifoldKind::TwoMoons),
            "swiss_roll" => Ok(ManifoldKind::SwissRoll),
            "blobs" => Ok(ManifoldKind::Blobs),
            "flat_grid" => Ok(ManifoldKind::FlatGrid),
            other => Err(Error::Config(format!("unknown manifold kind {other:?}"))),
        }
    }
}

/// Sampled points with the generator's own coordinates and classes.
#[derive(Debug, Clone)]
pub struct ManifoldSample {
    pub points: PointSet,
    /// Intrinsic coordinates per point: arc position on a moon, (arc length,
    /// height) on the swiss roll, grid position, or the blob centre offset.
    pub intrinsic: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
}

impl ManifoldSample {
    /// Euclidean distance in intrinsic coordinates.
    pub fn intrinsic_distance(&self, i: usize, j: usize) -> f64 {
        self.intrinsic[i]
            .iter()
            .zip(&self.intrinsic[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Arc length of the spiral `(t cos t, t sin t)` from 0 to `t`.
pub fn spiral_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Separation between blob centres, in units of the blob standard deviation.
pub const BLOB_SEPARATION: f64 = 10.0;

/// Standard parametric samples. `noise` is a Gaussian standard deviation;
/// for blobs it is the blob spread (1 when zero is given).
pub fn gen_manifold(kind: ManifoldKind, n: usize, noise: f64, seed: u64) -> Result<ManifoldSample> {
    if n < 10 {
        return Err(Error::invalid("manifold samples need at least ten points"));
    }
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise must be nonnegative"));
    }
    let mut rng = seeded(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let jitter = |rng: &mut crate::rng::Rng| noise * gauss.sample(rng);
    let mut data = Vec::new();
    let mut intrinsic = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    let dim;
    match kind {
        ManifoldKind::TwoMoons => {
            dim = 2;
            let outer = n / 2 + n % 2;
            for i in 0..n {
                let (c, m, idx) = if i < outer { (0, outer, i) } else { (1, n - outer, i - outer) };
                let t = std::f64::consts::PI * idx as f64 / (m - 1).max(1) as f64;
                let (x, y) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                data.push(x + jitter(&mut rng));
                data.push(y + jitter(&mut rng));
                intrinsic.push(vec![t]);
                classes.push(c);
            }
        }
        ManifoldKind::SwissRoll => {
            dim = 3;
            let mut ts = Vec::with_capacity(n);
            for _ in 0..n {
                let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random::<f64>());
                let h = 21.0 * rng.random::<f64>();
                data.push(t * t.cos() + jitter(&mut rng));
                data.push(h + jitter(&mut rng));
                data.push(t * t.sin() + jitter(&mut rng));
                intrinsic.push(vec![spiral_arc_length(t), h]);
                ts.push(t);
            }
            let mid = crate::stats::median(&ts);
            classes.extend(ts.iter().map(|&t| usize::from(t > mid)));
        }
        ManifoldKind::Blobs => {
            dim = 2;
            let sigma = if noise > 0.0 { noise } else { 1.0 };
            let spread = Normal::new(0.0, sigma).expect("positive spread");
            for i in 0..n {
                let c = i % 2;
                let cx = c as f64 * BLOB_SEPARATION * sigma;
                let (dx, dy) = (spread.sample(&mut rng), spread.sample(&mut rng));
                data.push(cx + dx);
                data.push(dy);
                intrinsic.push(vec![dx, dy]);
                classes.push(c);
            }
        }
        ManifoldKind::FlatGrid => {
            // A square grid on a tilted plane in R^3.
            dim = 3;
            let side = (n as f64).sqrt().ceil() as usize;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                let (u, v) = ((i % side) as f64, (i / side) as f64);
                data.push(u * s + jitter(&mut rng));
                data.push(u * s + jitter(&mut rng));
                data.push(v + jitter(&mut rng));
                intrinsic.push(vec![u, v]);
                classes.push(usize::from(2 * (i % side) >= side));
            }
        }
    }
    Ok(ManifoldSample {
        points: PointSet::new(dim, data)?,
        intrinsic,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swiss_roll_on_surface() {
        let s = gen_manifold(ManifoldKind::SwissRoll, 50, 0.0, 3).unwrap();
        for (p, q) in s.points.rows().zip(&s.intrinsic) {
            let t = (p[0] * p[0] + p[2] * p[2]).sqrt();
            assert!((p[0] - t * t.cos()).abs() < 1e-12 && (p[2] - t * t.sin()).abs() < 1e-12);
            assert!((spiral_arc_length(t) - q[0]).abs() < 1e-9);
            assert_eq!(p[1], q[1]);
        }
    }

    #[test]
    fn arc_length_matches_quadrature() {
        let t1 = 7.0;
        let steps = 200_000;
        let mut s = 0.0;
        for i in 0..steps {
            let t = t1 * (i as f64 + 0.5) / steps as f64;
            s += (1.0 + t * t).sqrt() * t1 / steps as f64;
        }
        assert!((spiral_arc_length(t1) - s).abs() < 1e-6);
    }

    #[test]
    fn blobs_separable_and_seeded() {
        let s = gen_manifold(ManifoldKind::Blobs, 200, 0.5, 9).unwrap();
        let mid = BLOB_SEPARATION * 0.5 / 2.0;
        for (p, &c) in s.points.rows().zip(&s.classes) {
            assert_eq!(usize::from(p[0] > mid), c);
        }
        let again = gen_manifold(ManifoldKind::Blobs, 200, 0.5, 9).unwrap();
        assert_eq!(again.points, s.points);
        assert!(gen_manifold(ManifoldKind::Blobs, 5, 0.5, 9).is_err());
    }

    #[test]
    fn two_moons_classes_balanced() {
        let s = gen_manifold(ManifoldKind::TwoMoons, 100, 0.0, 1).unwrap();
        assert_eq!(s.classes.iter().filter(|&&c| c == 1).count(), 50);
        assert!("two-moons".parse::<ManifoldKind>().is_ok());
    }
}
