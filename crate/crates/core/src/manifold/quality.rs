use super::{knn_sets, DistanceMatrix};
use crate::error::{Error, Result};
use crate::{par, stats};

fn check_pair(orig: &DistanceMatrix, embed: &DistanceMatrix) -> Result<()> {
    if orig.n != embed.n {
        return Err(Error::invalid(format!("distance matrices differ in size: {} vs {}", orig.n, embed.n)));
    }
    Ok(())
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..{n}")));
    }
    Ok(())
}

/// Mean fraction of each point's `k` nearest neighbours kept by the embedding.
pub fn neighborhood_preservation(orig: &DistanceMatrix, embed: &DistanceMatrix, k: usize) -> Result<f64> {
    check_pair(orig, embed)?;
    check_k(orig.n, k)?;
    let a = knn_sets(orig, k);
    let b = knn_sets(embed, k);
    let kept: usize = a
        .iter()
        .zip(&b)
        .map(|(x, y)| x.iter().filter(|j| y.contains(j)).count())
        .sum();
    Ok(kept as f64 / (k * orig.n) as f64)
}

/// Squared distance mismatch relative to the embedding's squared distances.
pub fn stress_measure(orig: &DistanceMatrix, embed: &DistanceMatrix) -> Result<f64> {
    check_pair(orig, embed)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (d, t) in orig.data.iter().zip(&embed.data) {
        num += (d - t) * (d - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::invalid("embedding distances are all zero"));
    }
    Ok(num / den)
}

/// Neighbourhood error: mismatch over original-space neighbours (misses)
/// plus mismatch over embedding-space neighbours (false hits).
pub fn pne(orig: &DistanceMatrix, embed: &DistanceMatrix, k: usize) -> Result<f64> {
    check_pair(orig, embed)?;
    check_k(orig.n, k)?;
    let high = knn_sets(orig, k);
    let low = knn_sets(embed, k);
    let sq = |i: usize, j: usize| (orig.get(i, j) - embed.get(i, j)).powi(2);
    let mut total = 0.0;
    for i in 0..orig.n {
        let miss: f64 = high[i].iter().map(|&j| sq(i, j)).sum();
        let hit: f64 = low[i].iter().map(|&j| sq(i, j)).sum();
        total += (miss + hit) / k as f64;
    }
    Ok(total / (2 * orig.n) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PneRow {
    pub k: usize,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    pub table: Vec<PneRow>,
}

impl KSelection {
    /// Argmin of the median, smallest `k` on ties. Rows with no finite
    /// median are ignored.
    pub fn from_table(table: Vec<PneRow>) -> Result<Self> {
        let best = table
            .iter()
            .filter(|r| r.median.is_finite())
            .min_by(|a, b| a.median.total_cmp(&b.median).then(a.k.cmp(&b.k)))
            .ok_or(Error::Empty("PNE table"))?;
        Ok(KSelection { k: best.k, table })
    }
}

/// Evaluates `pne_at(k, run)` over every `(k, run)` cell and picks the `k`
/// with the smallest median.
pub fn select_k<F>(k_range: &[usize], runs: usize, pne_at: F) -> Result<KSelection>
where
    F: Fn(usize, usize) -> Result<f64> + Sync + Send,
{
    if k_range.is_empty() || runs == 0 {
        return Err(Error::invalid("k range and run count must be nonempty"));
    }
    let cells = par::map_range(k_range.len() * runs, |c| pne_at(k_range[c / runs], c % runs));
    let cells: Vec<f64> = cells.into_iter().collect::<Result<_>>()?;
    let table = k_range
        .iter()
        .zip(cells.chunks(runs))
        .map(|(&k, values)| {
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            PneRow {
                k,
                median: stats::median(&finite),
                p05: stats::quantile(&finite, 0.05),
                p95: stats::quantile(&finite, 0.95),
                values: values.to_vec(),
            }
        })
        .collect();
    KSelection::from_table(table)
}

#[cfg(test)]
mod tests {
    use super::super::{pairwise_euclidean, Metric, PointSet};
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> DistanceMatrix {
        pairwise_euclidean(&PointSet::new(1, xs.to_vec()).unwrap())
    }

    fn random_dm(vals: &[f64], n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn(n, Metric::Euclidean, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            vals[(a * n + b) % vals.len()]
        })
    }

    #[test]
    fn identical_spaces() {
        let d = line(&[0.0, 1.0, 3.0, 7.0, 8.0]);
        assert_eq!(neighborhood_preservation(&d, &d, 2).unwrap(), 1.0);
        assert_eq!(stress_measure(&d, &d).unwrap(), 0.0);
        assert_eq!(pne(&d, &d, 2).unwrap(), 0.0);
    }

    #[test]
    fn full_neighbourhoods_always_preserved() {
        let a = line(&[0.0, 1.0, 3.0, 7.0]);
        let b = line(&[5.0, -1.0, 2.0, 0.5]);
        assert_eq!(neighborhood_preservation(&a, &b, 3).unwrap(), 1.0);
    }

    #[test]
    fn doubled_embedding_stress() {
        let a = line(&[0.0, 1.0, 3.0, 7.0]);
        assert!((stress_measure(&a, &a.scaled(2.0)).unwrap() - 0.25).abs() < 1e-15);
        let zero = a.scaled(0.0);
        assert!(stress_measure(&a, &zero).is_err());
    }

    #[test]
    fn reversed_line_np() {
        // Reversal preserves all distances.
        let xs: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let rev: Vec<f64> = xs.iter().rev().map(|x| -x).collect();
        let a = line(&xs);
        let b = line(&rev);
        // Point i of `b` sits at -x_{7-i}: a different geometry per index.
        let np = neighborhood_preservation(&a, &b, 2).unwrap();
        let (ka, kb) = (knn_sets(&a, 2), knn_sets(&b, 2));
        let mut brute = 0.0;
        for i in 0..8 {
            let mut hits = 0;
            for j in &ka[i] {
                if kb[i].contains(j) {
                    hits += 1;
                }
            }
            brute += hits as f64 / 2.0;
        }
        assert_eq!(np, brute / 8.0);
        assert!(np < 1.0);
    }

    #[test]
    fn single_discrepant_pair() {
        // Points 0,1,2,3 on a line, embedding moves only pair (0,3).
        let a = line(&[0.0, 1.0, 2.0, 3.0]);
        let mut b = a.clone();
        b.data[3] = 3.5;
        b.data[12] = 3.5;
        // k = 1: original neighbours of 0 -> 1, of 3 -> 2; embedding the same.
        // The pair (0,3) is in no neighbourhood, so PNE = 0.
        assert_eq!(pne(&a, &b, 1).unwrap(), 0.0);
        // k = 3: every point sees everyone; only rows 0 and 3 contribute,
        // each (0.25/3 + 0.25/3); total / (2n).
        let expected = 2.0 * (0.25 / 3.0 + 0.25 / 3.0) / 8.0;
        assert!((pne(&a, &b, 3).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn select_k_rules() {
        let s = select_k(&[2, 3, 4, 5], 3, |_, _| Ok(1.0)).unwrap();
        assert_eq!(s.k, 2);
        let s = select_k(&[2, 3, 4, 5], 3, |k, _| Ok(10.0 - k as f64)).unwrap();
        assert_eq!(s.k, 5);
        let s = select_k(&[2, 3, 4, 5, 6], 4, |k, r| Ok((k as f64 - 4.0).powi(2) + r as f64)).unwrap();
        assert_eq!(s.k, 4);
        assert_eq!(s.table[0].values, vec![4.0, 5.0, 6.0, 7.0]);
        assert!(select_k(&[], 3, |_, _| Ok(0.0)).is_err());
    }

    proptest! {
        #[test]
        fn measures_bounded(
            va in prop::collection::vec(0.1f64..10.0, 10..40),
            vb in prop::collection::vec(0.1f64..10.0, 10..40),
            n in 4usize..9,
            k in 1usize..4,
        ) {
            let a = random_dm(&va, n);
            let b = random_dm(&vb, n);
            let np = neighborhood_preservation(&a, &b, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&np));
            prop_assert!(stress_measure(&a, &b).unwrap() >= 0.0);
            prop_assert!(pne(&a, &b, k).unwrap() >= 0.0);
            // Brute-force stress over i<j, doubled.
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    num += 2.0 * (a.get(i, j) - b.get(i, j)).powi(2);
                    den += 2.0 * b.get(i, j).powi(2);
                }
            }
            prop_assert!((stress_measure(&a, &b).unwrap() - num / den).abs() < 1e-12);
        }

        #[test]
        fn pne_swap_symmetric_when_neighbourhoods_agree(
            xs in prop::collection::vec(-5.0f64..5.0, 5..12),
            s in 0.5f64..2.0,
        ) {
            // A uniform rescale keeps every neighbour set.
            let a = line(&xs);
            let b = a.scaled(s);
            let k = 2;
            prop_assert!((pne(&a, &b, k).unwrap() - pne(&b, &a, k).unwrap()).abs() < 1e-12);
        }
    }
}
