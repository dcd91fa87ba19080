//! Point sets, distance matrices, multidimensional scaling and
//! embedding-quality measures.

mod distance;
mod mds;
mod quality;

use std::io::{BufRead, Write};

pub use distance::{geodesic_distances, knn_graph, knn_sets, pairwise_euclidean, GeodesicGraph};
pub use mds::{classical_mds, smacof_mds, stress, ClassicalMds, SmacofOptions, SmacofResult};
pub use quality::{neighborhood_preservation, pne, select_k, stress_measure, KSelection, PneRow};

use crate::error::{Error, Result};

/// `n` points in `R^dim`, row-major, with optional ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::invalid(format!("{} values do not form rows of length {dim}", data.len())));
        }
        let ids = (0..data.len() / dim).map(|i| i.to_string()).collect();
        Ok(PointSet { ids, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged rows"));
        }
        PointSet::new(dim, rows.concat())
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::invalid("id count does not match point count"));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Points with `x -> scale * x + shift`.
    pub fn transformed(&self, scale: f64, shift: &[f64]) -> PointSet {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &x)| scale * x + shift[i % self.dim])
            .collect();
        PointSet {
            ids: self.ids.clone(),
            dim: self.dim,
            data,
        }
    }

    /// `id<TAB>x1<TAB>...<TAB>xd`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, row) in self.ids.iter().zip(self.rows()) {
            let cols: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{id}\t{}", cols.join("\t"))?;
        }
        Ok(())
    }

    /// Reads `id<TAB>coords...`. Also accepts the aggregate point format
    /// `level<TAB>id<TAB>count<TAB>coords...` when `level` is given, keeping
    /// only rows of that level.
    pub fn read_tsv<R: BufRead>(r: R, level: Option<&str>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("points line {}: {e}", n + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            if let Some(level) = level {
                if cols.next() != Some(level) {
                    continue;
                }
            }
            let id = cols.next().unwrap_or_default().to_string();
            if level.is_some() {
                cols.next();
            }
            let row: Vec<f64> = cols
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Data(format!("points line {}: bad number", n + 1)))?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Data(format!("points line {}: expected {d} coordinates", n + 1)))
                }
                _ => {}
            }
            ids.push(id);
            data.extend(row);
        }
        let dim = dim.ok_or(Error::Empty("point file"))?;
        PointSet::new(dim, data)?.with_ids(ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Geodesic,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Geodesic => "geodesic",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "euc" => Ok(Metric::Euclidean),
            "geodesic" | "geo" => Ok(Metric::Geodesic),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Symmetric `n x n` dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub data: Vec<f64>,
    pub metric: Metric,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, metric: Metric, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 0.0 } else { f(i, j) };
            }
        }
        DistanceMatrix { n, data, metric }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, factor: f64) -> DistanceMatrix {
        DistanceMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * factor).collect(),
            metric: self.metric,
        }
    }

    /// Mean of the off-diagonal entries.
    pub fn mean_offdiag(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let sum: f64 = self.data.iter().sum();
        sum / (self.n * (self.n - 1)) as f64
    }

    /// Rescaled so the mean off-diagonal distance is one (unchanged if all zero).
    pub fn normalized(&self) -> DistanceMatrix {
        let m = self.mean_offdiag();
        if m > 0.0 {
            self.scaled(1.0 / m)
        } else {
            self.clone()
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Header row of ids, then one row per point: `id<TAB>d1<TAB>...`.
    pub fn write_tsv<W: Write>(&self, mut w: W, ids: &[String]) -> std::io::Result<()> {
        writeln!(w, "\t{}", ids.join("\t"))?;
        for (i, id) in ids.iter().enumerate() {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{id}\t{}", row.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_tsv_roundtrip() {
        let p = PointSet::from_rows(&[vec![1.0, 2.5], vec![-3.0, 0.125]])
            .unwrap()
            .with_ids(vec!["CA".into(), "TX".into()])
            .unwrap();
        let mut buf = Vec::new();
        p.write_tsv(&mut buf).unwrap();
        assert_eq!(PointSet::read_tsv(&buf[..], None).unwrap(), p);
        let agg = "user\tu1\t3\t9\t9\nstate\tCA\t2\t1\t2.5\nstate\tTX\t4\t-3\t0.125\n";
        assert_eq!(PointSet::read_tsv(agg.as_bytes(), Some("state")).unwrap(), p);
        assert!(PointSet::read_tsv("a\t1\nb\t1\t2\n".as_bytes(), None).is_err());
    }

    #[test]
    fn normalization() {
        let d = DistanceMatrix::from_fn(3, Metric::Euclidean, |i, j| (i as f64 - j as f64).abs());
        assert!((d.normalized().mean_offdiag() - 1.0).abs() < 1e-15);
        assert!(d.is_symmetric(0.0));
    }
}
